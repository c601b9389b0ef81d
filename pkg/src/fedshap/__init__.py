"""Desk-scale federated learning simulator with per-round Shapley
contribution evaluation across eight aggregation strategies."""

from .aggregation import (
    ClientUpdate,
    ServerState,
    StrategyKind,
    combine,
    init_server_state,
    subset_combine,
)
from .analysis import chebyshev, expected_equal_error, pairwise_strategy_diffs, sq_euclid
from .contribution import (
    ContributionVector,
    GroundTruth,
    NonNormalizableError,
    RoundShapleyLog,
    ground_truth,
    normalize,
    optimal_halting_round,
    weighted_cumulative,
)
from .model import (
    Dataset,
    EvalResult,
    ModelSpec,
    TrainConfig,
    evaluate,
    global_objective,
    init_model,
    local_train,
)
from .partition import (
    PartitionPlan,
    PartitionSpec,
    SyntheticSpec,
    generate_synthetic,
    load_idx,
    sample_dirichlet,
    split_by_size,
)
from .runner import (
    Cell,
    ExperimentConfig,
    RunRecord,
    emit_results,
    load_config,
    parse_config,
    run_experiment,
    run_federation,
)
from .shapley import (
    CharacteristicFn,
    ShapleyVector,
    exact_shapley,
    monte_carlo_shapley,
    round_shapley,
)

__version__ = "0.1.0"
