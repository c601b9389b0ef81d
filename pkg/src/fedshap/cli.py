"""Command line interface.

Subcommands:
  run         execute an experiment config, write cells/summary/histograms
  lemma-check analytic vs Monte Carlo equal-payout baseline
  analyze     pairwise strategy diffs + histograms from a results directory
  report      Table-style (x100) summaries from a results directory

Exit codes: 0 success, 1 config error, 2 runtime failure (partial results
are preserved where possible).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import analysis
from .aggregation import StrategyKind
from .contribution import ContributionVector
from .runner import (
    HISTOGRAM_COLUMNS,
    ConfigError,
    emit_results,
    load_config,
    run_experiment,
)


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    table = run_experiment(config, workers=args.workers)
    written = emit_results(table, args.format, args.out)
    for path in written:
        print(path)
    return 0


def _cmd_lemma_check(args: argparse.Namespace) -> int:
    if args.n < 2:
        raise ConfigError("--n must be >= 2")
    if args.alpha <= 0:
        raise ConfigError("--alpha must be positive")
    analytic = analysis.expected_equal_error(args.n, args.alpha)
    rng = np.random.default_rng(args.seed)
    draws = rng.gamma(args.alpha, 1.0, size=(args.draws, args.n))
    draws /= draws.sum(axis=1, keepdims=True)
    empirical = float(((draws - 1.0 / args.n) ** 2).sum(axis=1).mean())
    rel = abs(empirical - analytic) / analytic
    print(f"n={args.n} alpha={args.alpha}")
    print(f"analytic (x100):    {100.0 * analytic:.4f}")
    print(f"monte carlo (x100): {100.0 * empirical:.4f}  [{args.draws} draws]")
    print(f"relative gap:       {rel:.4%}")
    return 0


def _read_cells(results_dir: Path) -> list[dict[str, str]]:
    csv_path = results_dir / "cells.csv"
    json_path = results_dir / "cells.json"
    if csv_path.exists():
        with csv_path.open(newline="") as fh:
            return list(csv.DictReader(fh))
    if json_path.exists():
        return [
            {k: str(v) for k, v in row.items()}
            for row in json.loads(json_path.read_text())
        ]
    raise ConfigError(f"no cells.csv or cells.json in {results_dir}")


def _contributions_by_cell(
    rows: list[dict[str, str]]
) -> list[dict[StrategyKind, ContributionVector]]:
    """Regroup emitted per-client rows into per-(task, alpha, epochs, seed)
    strategy -> contribution maps; incomplete groups are dropped."""
    grouped: dict[tuple, dict[StrategyKind, dict[int, float]]] = defaultdict(dict)
    strategies = set()
    for row in rows:
        if row["contribution"] == "" or int(row["client_id"]) < 0:
            continue
        strategy = StrategyKind(row["strategy"])
        strategies.add(strategy)
        key = (row["task"], row["alpha"], row["epochs"], row["seed"])
        grouped[key].setdefault(strategy, {})[int(row["client_id"])] = float(
            row["contribution"]
        )
    cells = []
    for per_strategy in grouped.values():
        if set(per_strategy) != strategies:
            continue
        cell = {}
        for strategy, by_client in per_strategy.items():
            pct = np.array([by_client[k] for k in sorted(by_client)])
            cell[strategy] = ContributionVector(percentages=pct, raw=pct)
        cells.append(cell)
    return cells


def _cmd_analyze(args: argparse.Namespace) -> int:
    results_dir = Path(args.results_dir)
    cells = _contributions_by_cell(_read_cells(results_dir))
    if not cells:
        raise ConfigError("no complete result cells to analyze")
    diffs = analysis.pairwise_strategy_diffs(cells)
    rows = []
    for (s1, s2), dist in sorted(
        diffs.items(), key=lambda item: (item[0][0].value, item[0][1].value)
    ):
        pair = f"{s1.value}-{s2.value}"
        std = float(dist.samples.std()) if dist.samples.size else 0.0
        peak = float(np.abs(dist.samples).max()) if dist.samples.size else 0.0
        print(f"{pair}: {dist.samples.size} samples, std={std:.4f}, max|diff|={peak:.4f}")
        for b in range(dist.counts.size):
            rows.append({
                "pair": pair,
                "bin_lower": float(dist.bin_edges[b]),
                "bin_upper": float(dist.bin_edges[b + 1]),
                "count": int(dist.counts[b]),
            })
    out_dir = Path(args.out) if args.out else results_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "histograms.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTOGRAM_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    print(out_path)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    results_dir = Path(args.results_dir)
    rows = _read_cells(results_dir)
    # (task, epochs, strategy, alpha) -> per-seed metric values
    sq: dict[tuple, dict[str, float]] = defaultdict(dict)
    cheb: dict[tuple, dict[str, float]] = defaultdict(dict)
    for row in rows:
        if row["sq_euclid"] == "":
            continue
        key = (row["task"], row["epochs"], row["strategy"], row["alpha"])
        sq[key][row["seed"]] = float(row["sq_euclid"])
        cheb[key][row["seed"]] = float(row["chebyshev"])
    print(f"{'task':<12} {'e':>3} {'strategy':<12} {'alpha':>8} "
          f"{'sq_euclid x100':>15} {'chebyshev x100':>15} {'seeds':>6}")
    for key in sorted(sq):
        task, epochs, strategy, alpha = key
        mean_sq = 100.0 * float(np.mean(list(sq[key].values())))
        mean_cheb = 100.0 * float(np.mean(list(cheb[key].values())))
        print(f"{task:<12} {epochs:>3} {strategy:<12} {alpha:>8} "
              f"{mean_sq:>15.2f} {mean_cheb:>15.2f} {len(sq[key]):>6}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedshap",
        description="Federated-learning Shapley contribution simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to the JSON experiment config")
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--format", choices=["csv", "json"], default="csv")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_lemma = sub.add_parser("lemma-check", help="equal-payout baseline check")
    p_lemma.add_argument("--n", type=int, required=True)
    p_lemma.add_argument("--alpha", type=float, required=True)
    p_lemma.add_argument("--draws", type=int, default=200_000)
    p_lemma.add_argument("--seed", type=int, default=0)
    p_lemma.set_defaults(func=_cmd_lemma_check)

    p_analyze = sub.add_parser("analyze", help="pairwise strategy instability")
    p_analyze.add_argument("results_dir")
    p_analyze.add_argument("--out", default=None)
    p_analyze.set_defaults(func=_cmd_analyze)

    p_report = sub.add_parser("report", help="Table-style x100 summaries")
    p_report.add_argument("results_dir")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
