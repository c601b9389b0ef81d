"""Experiment orchestration: configs, the federation round loop, sweeps over
(strategy, alpha, epochs, seed), persistence, and report emission.

Every cell of the sweep grid is fully deterministic: all randomness flows
from named substreams derived from the cell seed (see :mod:`fedshap.rng`),
so serial and parallel execution emit byte-identical results.
"""
from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np

from . import analysis
from .aggregation import (
    MOMENT_KINDS,
    ClientUpdate,
    ServerState,
    StrategyKind,
    _apply,
    combine,
    init_server_state,
)
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
    init_model,
    local_train,
)
from .partition import SyntheticSpec, generate_synthetic, load_idx, sample_dirichlet, split_by_size
from .rng import substream, substream_seed
from .shapley import (
    CharacteristicFn,
    ShapleyVector,
    exact_shapley,
    monte_carlo_shapley,
    round_characteristic,
)

Array = np.ndarray


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class TaskSpec:
    """What to classify: a synthetic cluster task or an IDX file pair."""

    kind: Literal["synthetic", "idx"]
    name: str
    num_examples: int = 2000
    num_classes: int = 4
    input_dim: int = 10
    cluster_spread: float = 1.0
    images_path: str | None = None
    labels_path: str | None = None


@dataclass(frozen=True)
class ShapleyMode:
    kind: Literal["exact", "monte_carlo"]
    num_permutations: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskSpec
    num_clients: int
    alphas: tuple[float, ...]
    epochs_list: tuple[int, ...]
    rounds: int
    seeds: tuple[int, ...]
    strategies: tuple[StrategyKind, ...]
    train: TrainConfig
    shapley_mode: ShapleyMode = ShapleyMode("exact")
    eval_fraction: float = 0.2
    halting_round: int | Literal["auto"] = "auto"
    hidden_dims: tuple[int, ...] = (16,)
    utility: Literal["accuracy", "neg_loss"] = "accuracy"
    subset_moment_mode: Literal["frozen", "replay"] = "frozen"

    def __post_init__(self) -> None:
        if self.num_clients < 2:
            raise ConfigError("num_clients must be >= 2")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ConfigError("alphas must be positive")
        if not self.epochs_list or any(e < 0 for e in self.epochs_list):
            raise ConfigError("epochs must be non-negative")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.strategies:
            raise ConfigError("need at least one strategy")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ConfigError("eval_fraction must be in (0, 1)")
        if self.halting_round != "auto" and int(self.halting_round) < 1:
            raise ConfigError("halting_round must be >= 1 or 'auto'")


@dataclass(frozen=True)
class Cell:
    strategy: StrategyKind
    alpha: float
    epochs: int
    seed: int


@dataclass
class RunRecord:
    """Everything one cell produced, enough to replay the Shapley pipeline."""

    fingerprint: str
    cell: Cell
    client_sizes: list[int] = field(default_factory=list)
    round_start_params: list[Array] = field(default_factory=list)
    round_updates: list[list[ClientUpdate]] = field(default_factory=list)
    shapley_log: RoundShapleyLog | None = None
    global_evals: list[EvalResult] = field(default_factory=list)
    eval_data: Dataset | None = None
    flags: list[str] = field(default_factory=list)
    error: str | None = None

    def to_json(self) -> str:
        payload: dict[str, Any] = {
            "fingerprint": self.fingerprint,
            "cell": {
                "strategy": self.cell.strategy.value,
                "alpha": self.cell.alpha,
                "epochs": self.cell.epochs,
                "seed": self.cell.seed,
            },
            "client_sizes": self.client_sizes,
            "round_start_params": [p.tolist() for p in self.round_start_params],
            "round_updates": [
                [
                    {
                        "client_id": u.client_id,
                        "num_examples": u.num_examples,
                        "params": u.params.tolist(),
                    }
                    for u in updates
                ]
                for updates in self.round_updates
            ],
            "shapley_log": [r.tolist() for r in self.shapley_log.rounds]
            if self.shapley_log is not None
            else None,
            "global_evals": [
                {"loss": e.loss, "accuracy": e.accuracy} for e in self.global_evals
            ],
            "flags": self.flags,
            "error": self.error,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    raw = asdict(config)
    raw["strategies"] = [s.value for s in config.strategies]
    raw["train"] = {
        "batch_size": config.train.batch_size,
        "learning_rate": config.train.learning_rate,
    }
    task = {k: v for k, v in raw["task"].items() if v is not None}
    if config.task.kind == "synthetic":
        task.pop("images_path", None)
        task.pop("labels_path", None)
    else:
        for key in ("num_examples", "num_classes", "input_dim", "cluster_spread"):
            task.pop(key, None)
    raw["task"] = task
    sm = raw["shapley_mode"]
    raw["shapley_mode"] = sm["kind"] if sm["kind"] == "exact" else sm
    return raw


def _reject_unknown(section: str, given: dict, allowed: set[str]) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain dict, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {
        "task", "num_clients", "alphas", "epochs_list", "rounds", "seeds",
        "strategies", "train", "shapley_mode", "eval_fraction", "halting_round",
        "hidden_dims", "utility", "subset_moment_mode",
    }
    _reject_unknown("config", raw, allowed)
    required = {"task", "num_clients", "alphas", "epochs_list", "rounds", "seeds", "strategies", "train"}
    missing = required - set(raw)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")

    task_raw = raw["task"]
    if not isinstance(task_raw, dict) or "kind" not in task_raw:
        raise ConfigError("task must be an object with a 'kind'")
    if task_raw["kind"] == "synthetic":
        _reject_unknown(
            "task", task_raw,
            {"kind", "name", "num_examples", "num_classes", "input_dim", "cluster_spread"},
        )
        task = TaskSpec(
            kind="synthetic",
            name=task_raw.get("name", "synthetic"),
            num_examples=int(task_raw.get("num_examples", 2000)),
            num_classes=int(task_raw.get("num_classes", 4)),
            input_dim=int(task_raw.get("input_dim", 10)),
            cluster_spread=float(task_raw.get("cluster_spread", 1.0)),
        )
    elif task_raw["kind"] == "idx":
        _reject_unknown("task", task_raw, {"kind", "name", "images", "labels"})
        if "images" not in task_raw or "labels" not in task_raw:
            raise ConfigError("idx task needs 'images' and 'labels' paths")
        task = TaskSpec(
            kind="idx",
            name=task_raw.get("name", "idx"),
            images_path=str(task_raw["images"]),
            labels_path=str(task_raw["labels"]),
        )
    else:
        raise ConfigError(f"unknown task kind {task_raw['kind']!r}")

    train_raw = raw["train"]
    _reject_unknown("train", train_raw, {"batch_size", "learning_rate"})
    train = TrainConfig(
        epochs=0,
        batch_size=int(train_raw.get("batch_size", 32)),
        learning_rate=float(train_raw.get("learning_rate", 0.1)),
    )

    mode_raw = raw.get("shapley_mode", "exact")
    if mode_raw == "exact":
        mode = ShapleyMode("exact")
    elif isinstance(mode_raw, dict) and set(mode_raw) == {"monte_carlo"}:
        mode = ShapleyMode("monte_carlo", int(mode_raw["monte_carlo"]))
    else:
        raise ConfigError("shapley_mode must be 'exact' or {'monte_carlo': N}")

    try:
        strategies = tuple(StrategyKind(s) for s in raw["strategies"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    halting = raw.get("halting_round", "auto")
    if halting != "auto":
        halting = int(halting)

    utility = raw.get("utility", "accuracy")
    if utility not in ("accuracy", "neg_loss"):
        raise ConfigError("utility must be 'accuracy' or 'neg_loss'")
    subset_mode = raw.get("subset_moment_mode", "frozen")
    if subset_mode not in ("frozen", "replay"):
        raise ConfigError("subset_moment_mode must be 'frozen' or 'replay'")

    try:
        return ExperimentConfig(
            task=task,
            num_clients=int(raw["num_clients"]),
            alphas=tuple(float(a) for a in raw["alphas"]),
            epochs_list=tuple(int(e) for e in raw["epochs_list"]),
            rounds=int(raw["rounds"]),
            seeds=tuple(int(s) for s in raw["seeds"]),
            strategies=strategies,
            train=train,
            shapley_mode=mode,
            eval_fraction=float(raw.get("eval_fraction", 0.2)),
            halting_round=halting,
            hidden_dims=tuple(int(h) for h in raw.get("hidden_dims", [16])),
            utility=utility,
            subset_moment_mode=subset_mode,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def grid_cells(config: ExperimentConfig) -> list[Cell]:
    return [
        Cell(strategy=s, alpha=a, epochs=e, seed=seed)
        for s in config.strategies
        for a in config.alphas
        for e in config.epochs_list
        for seed in config.seeds
    ]


def _cell_fingerprint(config: ExperimentConfig, cell: Cell) -> str:
    payload = json.dumps(
        {
            "config": config_to_dict(config),
            "cell": [cell.strategy.value, cell.alpha, cell.epochs, cell.seed],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _load_task_data(config: ExperimentConfig, cell: Cell) -> Dataset:
    if config.task.kind == "synthetic":
        spec = SyntheticSpec(
            num_examples=config.task.num_examples,
            num_classes=config.task.num_classes,
            input_dim=config.task.input_dim,
            cluster_spread=config.task.cluster_spread,
            seed=substream_seed(cell.seed, "data"),
        )
        return generate_synthetic(spec)
    assert config.task.images_path and config.task.labels_path
    return load_idx(config.task.images_path, config.task.labels_path)


def _carve_eval_split(
    data: Dataset, eval_fraction: float, num_clients: int, seed: int
) -> tuple[Dataset, Dataset]:
    """Class-stratified server evaluation split; keeps >= num_clients examples
    of every class on the training side."""
    rng = substream(seed, "eval-split")
    eval_idx: list[Array] = []
    train_idx: list[Array] = []
    for cls in np.unique(data.labels):
        cls_idx = np.flatnonzero(data.labels == cls)
        shuffled = rng.permutation(cls_idx)
        take = int(round(eval_fraction * cls_idx.size))
        take = min(take, cls_idx.size - num_clients)
        if take < 0:
            raise ValueError(
                f"class {int(cls)}: too few examples for the eval split"
            )
        eval_idx.append(shuffled[:take])
        train_idx.append(shuffled[take:])
    eval_all = np.sort(np.concatenate(eval_idx))
    train_all = np.sort(np.concatenate(train_idx))
    if eval_all.size < 1 or train_all.size < 1:
        raise ValueError("eval_fraction leaves an empty split")
    return data.subset(train_all), data.subset(eval_all)


def _round_shapley_replay(
    state: ServerState,
    replay_moments: dict[int, tuple[Array | None, Array | None]],
    updates: Sequence[ClientUpdate],
    spec: ModelSpec,
    eval_data: Dataset,
    config: ExperimentConfig,
    mc_seed: int,
) -> ShapleyVector:
    """Shapley with per-coalition server-optimizer trajectories: each coalition
    keeps moment buffers of its own advanced round by round."""
    ordered = sorted(updates, key=lambda u: u.client_id)
    num = len(ordered)

    def fn(players: tuple[int, ...]) -> float:
        mask = sum(1 << i for i in players)
        if not players:
            params = state.global_params
        else:
            m, v = replay_moments.get(mask, (state.momentum, state.second_moment))
            params, _, _ = _apply(
                state.kind, state.global_params, m, v, state.hyper,
                [ordered[i] for i in players],
            )
        result = evaluate(params, spec, eval_data)
        return result.accuracy if config.utility == "accuracy" else -result.loss

    v_fn = CharacteristicFn(fn, num)
    if config.shapley_mode.kind == "exact":
        phi = exact_shapley(v_fn, num)
    else:
        phi = monte_carlo_shapley(
            v_fn, num, config.shapley_mode.num_permutations, mc_seed
        )

    # Advance every coalition's buffers with its own update for the next round.
    for mask in range(1, 1 << num):
        subset = [ordered[i] for i in range(num) if mask & (1 << i)]
        m, v = replay_moments.get(mask, (state.momentum, state.second_moment))
        _, new_m, new_v = _apply(
            state.kind, state.global_params, m, v, state.hyper, subset
        )
        replay_moments[mask] = (new_m, new_v)
    return phi


def run_federation(config: ExperimentConfig, cell: Cell) -> RunRecord:
    """One full federated run for a sweep cell, with per-round Shapley logs."""
    fingerprint = _cell_fingerprint(config, cell)
    record = RunRecord(fingerprint=fingerprint, cell=cell)
    try:
        data = _load_task_data(config, cell)
        train_data, eval_data = _carve_eval_split(
            data, config.eval_fraction, config.num_clients, cell.seed
        )
        proportions = sample_dirichlet(
            cell.alpha, config.num_clients, substream_seed(cell.seed, "partition")
        )
        plan = split_by_size(train_data, proportions)
        client_data = [train_data.subset(idx) for idx in plan.client_indices]
        sizes = plan.sizes()
        if any(s < 1 for s in sizes):
            raise ValueError("a client received an empty shard")

        spec = ModelSpec(
            input_dim=data.features.shape[1],
            hidden_dims=config.hidden_dims,
            num_classes=data.num_classes,
        )
        params = init_model(spec, substream_seed(cell.seed, "init"))
        state = init_server_state(cell.strategy, params)
        train_cfg = replace(config.train, epochs=cell.epochs)

        use_replay = (
            config.subset_moment_mode == "replay" and cell.strategy in MOMENT_KINDS
        )
        replay_moments: dict[int, tuple[Array | None, Array | None]] = {}

        phis: list[Array] = []
        for t in range(config.rounds):
            updates = [
                ClientUpdate(
                    client_id=k,
                    params=local_train(
                        state.global_params, spec, client_data[k], train_cfg,
                        substream_seed(cell.seed, "client", k, t),
                    ),
                    num_examples=sizes[k],
                )
                for k in range(config.num_clients)
            ]
            mc_seed = substream_seed(cell.seed, "shapley", t)
            if use_replay:
                phi = _round_shapley_replay(
                    state, replay_moments, updates, spec, eval_data, config, mc_seed
                )
            else:
                v_fn = round_characteristic(
                    state, updates, spec, eval_data, config.utility
                )
                if config.shapley_mode.kind == "exact":
                    phi = exact_shapley(v_fn, config.num_clients)
                else:
                    phi = monte_carlo_shapley(
                        v_fn, config.num_clients,
                        config.shapley_mode.num_permutations, mc_seed,
                    )
            record.round_start_params.append(state.global_params.copy())
            record.round_updates.append(updates)
            phis.append(phi.values)
            _, state = combine(state, updates)
            record.global_evals.append(evaluate(state.global_params, spec, eval_data))

        record.client_sizes = sizes
        record.shapley_log = RoundShapleyLog(tuple(phis), config.num_clients)
        record.eval_data = eval_data
    except Exception as exc:  # recorded, never silently dropped
        record.error = f"{type(exc).__name__}: {exc}"
        record.flags.append("error")
    return record


# ---------------------------------------------------------------------------
# Sweep execution and result tables
# ---------------------------------------------------------------------------

CELL_COLUMNS = [
    "task", "alpha", "epochs", "strategy", "seed", "client_id",
    "contribution", "ground_truth", "raw_shapley_sum", "sq_euclid",
    "chebyshev", "optimal_R", "flags",
]
SUMMARY_COLUMNS = [
    "task", "epochs", "strategy", "alpha", "num_seeds",
    "mean_sq_euclid_x100", "mean_chebyshev_x100", "expected_equal_error_x100",
]
HISTOGRAM_COLUMNS = ["pair", "bin_lower", "bin_upper", "count"]


@dataclass
class ResultTable:
    cell_rows: list[dict[str, Any]]
    summary_rows: list[dict[str, Any]]
    histogram_rows: list[dict[str, Any]]


def _run_cell_task(args: tuple[ExperimentConfig, Cell]) -> RunRecord:
    config, cell = args
    return run_federation(config, cell)


def run_all_cells(
    config: ExperimentConfig, workers: int = 1
) -> list[tuple[Cell, RunRecord]]:
    cells = grid_cells(config)
    if workers <= 1:
        records = [run_federation(config, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_task, [(config, c) for c in cells]))
    return list(zip(cells, records))


def _auto_halting_rounds(
    config: ExperimentConfig, results: Sequence[tuple[Cell, RunRecord]]
) -> dict[StrategyKind, int]:
    """Per-strategy mean optimal halting round, rounded to the nearest round."""
    per_strategy: dict[StrategyKind, list[int]] = {s: [] for s in config.strategies}
    for cell, record in results:
        if record.error or record.shapley_log is None:
            continue
        truth = ground_truth(record.client_sizes)
        try:
            opt_r, _ = optimal_halting_round(record.shapley_log, truth)
        except NonNormalizableError:
            continue
        per_strategy[cell.strategy].append(opt_r)
    out = {}
    for strategy, values in per_strategy.items():
        if values:
            out[strategy] = max(1, int(round(float(np.mean(values)))))
        else:
            out[strategy] = config.rounds
    return out


def build_table(
    config: ExperimentConfig, results: Sequence[tuple[Cell, RunRecord]]
) -> ResultTable:
    if config.halting_round == "auto":
        halting = _auto_halting_rounds(config, results)
    else:
        fixed = min(int(config.halting_round), config.rounds)
        halting = {s: fixed for s in config.strategies}

    cell_rows: list[dict[str, Any]] = []
    # (task, alpha, epochs, seed) -> strategy -> ContributionVector
    by_cell: dict[tuple, dict[StrategyKind, ContributionVector]] = {}
    # (epochs, strategy, alpha) -> list of (sq_euclid, chebyshev)
    metrics: dict[tuple, list[tuple[float, float]]] = {}

    for cell, record in results:
        base = {
            "task": config.task.name,
            "alpha": cell.alpha,
            "epochs": cell.epochs,
            "strategy": cell.strategy.value,
            "seed": cell.seed,
        }
        if record.error or record.shapley_log is None:
            cell_rows.append({
                **base, "client_id": -1, "contribution": "", "ground_truth": "",
                "raw_shapley_sum": "", "sq_euclid": "", "chebyshev": "",
                "optimal_R": "", "flags": f"error:{record.error}",
            })
            continue

        truth = ground_truth(record.client_sizes)
        try:
            opt_r, _ = optimal_halting_round(record.shapley_log, truth)
        except NonNormalizableError:
            opt_r = ""
        raw = weighted_cumulative(record.shapley_log, halting[cell.strategy])
        flags: list[str] = list(record.flags)
        try:
            contrib = normalize(raw)
        except NonNormalizableError:
            contrib = None
            flags.append("non_normalizable")
        if contrib is not None and contrib.has_negative:
            flags.append("negative_raw")

        if contrib is not None:
            sq = analysis.sq_euclid(contrib.percentages, truth.percentages)
            cheb = analysis.chebyshev(contrib.percentages, truth.percentages)
            key = (cell.alpha, cell.epochs, cell.seed)
            by_cell.setdefault(key, {})[cell.strategy] = contrib
            metrics.setdefault((cell.epochs, cell.strategy, cell.alpha), []).append(
                (sq, cheb)
            )
        else:
            sq = cheb = ""

        for k in range(config.num_clients):
            cell_rows.append({
                **base,
                "client_id": k,
                "contribution": float(contrib.percentages[k]) if contrib is not None else "",
                "ground_truth": float(truth.percentages[k]),
                "raw_shapley_sum": float(raw.sum()),
                "sq_euclid": sq,
                "chebyshev": cheb,
                "optimal_R": opt_r,
                "flags": ";".join(flags),
            })

    summary_rows: list[dict[str, Any]] = []
    for strategy in config.strategies:
        for alpha in config.alphas:
            for epochs in config.epochs_list:
                pairs = metrics.get((epochs, strategy, alpha), [])
                row = {
                    "task": config.task.name,
                    "epochs": epochs,
                    "strategy": strategy.value,
                    "alpha": alpha,
                    "num_seeds": len(pairs),
                    "mean_sq_euclid_x100": 100.0 * float(np.mean([p[0] for p in pairs])) if pairs else "",
                    "mean_chebyshev_x100": 100.0 * float(np.mean([p[1] for p in pairs])) if pairs else "",
                    "expected_equal_error_x100": 100.0
                    * analysis.expected_equal_error(config.num_clients, alpha),
                }
                summary_rows.append(row)

    complete_cells = [
        cell_map for cell_map in by_cell.values()
        if set(cell_map) == set(config.strategies)
    ]
    histogram_rows: list[dict[str, Any]] = []
    if complete_cells and len(config.strategies) > 1:
        diffs = analysis.pairwise_strategy_diffs(complete_cells)
        for (s1, s2), dist in sorted(
            diffs.items(), key=lambda item: (item[0][0].value, item[0][1].value)
        ):
            pair = f"{s1.value}-{s2.value}"
            for b in range(dist.counts.size):
                histogram_rows.append({
                    "pair": pair,
                    "bin_lower": float(dist.bin_edges[b]),
                    "bin_upper": float(dist.bin_edges[b + 1]),
                    "count": int(dist.counts[b]),
                })
    return ResultTable(cell_rows, summary_rows, histogram_rows)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Execute every cell of the sweep grid and build the result table."""
    return build_table(config, run_all_cells(config, workers))


def _sort_rows(rows: list[dict[str, Any]], columns: list[str]) -> list[dict[str, Any]]:
    return sorted(rows, key=lambda r: tuple(str(r[c]) for c in columns))


def _write_csv(path: Path, rows: list[dict[str, Any]], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def emit_results(
    table: ResultTable, fmt: Literal["csv", "json"], out_dir: str | Path
) -> list[Path]:
    """Write cells, summary and histogram files with stable row ordering."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    parts = [
        ("cells", table.cell_rows, CELL_COLUMNS,
         ["task", "alpha", "epochs", "strategy", "seed", "client_id"]),
        ("summary", table.summary_rows, SUMMARY_COLUMNS,
         ["task", "epochs", "strategy", "alpha"]),
        ("histograms", table.histogram_rows, HISTOGRAM_COLUMNS,
         ["pair", "bin_lower"]),
    ]
    written = []
    for name, rows, columns, key_cols in parts:
        ordered = _sort_rows(rows, key_cols)
        path = out_dir / f"{name}.{fmt}"
        if fmt == "csv":
            _write_csv(path, ordered, columns)
        elif fmt == "json":
            path.write_text(
                json.dumps(
                    [{c: row[c] for c in columns} for row in ordered],
                    sort_keys=True,
                    indent=1,
                )
                + "\n"
            )
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written
