"""Command-line interface: ``run``, ``net-stats`` and ``oracle-check``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Flags given on the command line override values from the scenario file.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import kernels
from .meanfield import SolverConfig, best_response_profile, oracle_exact, random_game, solve_local_game
from .scenario import ConfigError, config_hash, default_scenario_document, load_scenario, parse_scenario
from .sim import consensus_metric, run
from .topology import LinkModelParams, connectivity_sweep

log = logging.getLogger("stagegame")

TRACE_COLUMNS = ("step", "agent_id", "x", "y", "z", "action_idx", "payoff", "swarm_mean_payoff",
                 "solver_sweeps", "solve_time_s", "consensus")
STATS_COLUMNS = ("spacing_m", "avg_direct_neighbors", "avg_hop_count", "reachable_pair_fraction")
ORACLE_COLUMNS = ("game", "n_members", "action_counts", "tv_distance", "has_dominant_eq", "dominant_eq_match",
                  "solver_sweeps", "converged", "free_energy_monotone", "marginals_normalized")
DEFAULT_SPACINGS = (250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2500, 3000)

# connected regime for the hop-count trend: most agent pairs can still reach each other
CONNECTED_FRACTION = 0.5
FREE_ENERGY_SLACK = 1e-9
NORMALIZATION_TOL = 1e-9
SINGLETON_TV_TOL = 1e-12
DOMINANT_MATCH_RATE = 0.95
TREND_RHO = 0.9


@dataclass(frozen=True)
class OutputPaths:
    trace_csv: Path
    stats_csv: Path
    oracle_csv: Path
    report_json: Path

    @classmethod
    def in_dir(cls, directory) -> "OutputPaths":
        d = Path(directory)
        return cls(d / "trace.csv", d / "stats.csv", d / "oracle_check.csv", d / "report.json")


class UsageError(Exception):
    pass


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.9g" % value


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_all(files: dict) -> None:
    """Write every ``{path: text}`` to a temp file first, then rename into place."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def cmd_run(args) -> int:
    doc = default_scenario_document() if args.scenario is None else load_scenario(args.scenario)
    if isinstance(doc, dict):
        for section, key, value in (("sim", "steps", args.steps), ("sim", "seed", args.seed),
                                    ("game", "h", args.h), ("game", "virtual_neighbors", args.virtual_neighbors)):
            if value is not None:
                doc.setdefault(section, {})[key] = value
    config, resolved = parse_scenario(doc)
    log.info("running %d agents for %d steps (kernels: %s)", config.n_agents, config.steps, kernels.BACKEND)

    records = run(config)
    consensus = consensus_metric(records)
    rows = []
    for rec, cons in zip(records, consensus):
        for a in rec.agents:
            rows.append((rec.step, a.agent_id, *a.position, a.action, a.payoff, rec.swarm_mean_payoff,
                         a.sweeps, a.solve_time_s if args.timing else math.nan, cons))

    means = [r.swarm_mean_payoff for r in records]
    report = {
        "command": "run",
        "config_hash": config_hash(resolved),
        "totals": {
            "steps": len(records),
            "agents": config.n_agents,
            "initial_mean_payoff": means[0],
            "final_mean_payoff": means[-1],
            "nondecreasing_step_fraction": (
                sum(b >= a for a, b in zip(means, means[1:])) / (len(means) - 1) if len(means) > 1 else 1.0),
            "mean_consensus": float(np.mean(consensus)),
            "total_solver_sweeps": sum(a.sweeps for r in records for a in r.agents),
        },
        "pass": {"payoff_increased": bool(means[-1] > means[0])},
    }
    if args.timing:
        solve = [a.solve_time_s for r in records for a in r.agents]
        payoff = [a.payoff_time_s for r in records for a in r.agents]
        report["timing"] = {"backend": kernels.BACKEND, "max_solve_time_s": max(solve),
                            "mean_solve_time_s": float(np.mean(solve)),
                            "mean_payoff_time_s": float(np.mean(payoff))}
    out = OutputPaths.in_dir(args.output)
    write_all({out.trace_csv: csv_text(TRACE_COLUMNS, rows), out.report_json: json_text(report)})
    log.info("final mean payoff %.6f (initial %.6f); wrote %s", means[-1], means[0], out.trace_csv)
    return 0


def parse_spacings(text):
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"invalid --spacings {text!r}") from None
    if not values:
        raise UsageError("--spacings must list at least one value")
    return values


def _spearman(x, y) -> float:
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    return float(spearmanr(x, y).statistic)


def trend_summary(records) -> dict:
    """Rank correlations of the neighbor and hop curves against spacing.

    The hop curve is restricted to the connected regime: once most pairs are
    unreachable the average over reachable pairs drifts back toward one hop.
    """
    connected = [r for r in records
                 if r.reachable_pair_fraction >= CONNECTED_FRACTION and not math.isnan(r.avg_hop_count)]
    rho_n = _spearman([r.spacing_m for r in records], [r.avg_direct_neighbors for r in records])
    rho_h = _spearman([r.spacing_m for r in connected], [r.avg_hop_count for r in connected])
    return {
        "spearman_neighbors_vs_spacing": _nan_to_none(float(rho_n)),
        "spearman_hops_vs_spacing": _nan_to_none(float(rho_h)),
        "connected_spacings": len(connected),
    }


def cmd_net_stats(args) -> int:
    spacings = parse_spacings(args.spacings)
    try:
        link = LinkModelParams(args.tx_power_dbm, args.ref_loss_db, args.path_loss_exponent,
                               args.rx_sensitivity_dbm, args.ref_distance_m)
        records = connectivity_sweep(args.n_agents, link, spacings, args.trials, args.seed, args.altitude_m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [(r.spacing_m, r.avg_direct_neighbors, r.avg_hop_count, r.reachable_pair_fraction) for r in records]
    trend = trend_summary(records)
    rho_n, rho_h = trend["spearman_neighbors_vs_spacing"], trend["spearman_hops_vs_spacing"]
    report = {
        "command": "net-stats",
        "config_hash": config_hash({"n_agents": args.n_agents, "spacings": spacings, "trials": args.trials,
                                    "seed": args.seed, "altitude_m": args.altitude_m, "link": vars(link)}),
        "totals": {"spacings": len(records), "trials": args.trials, "n_agents": args.n_agents, **trend},
        "pass": {
            "neighbors_decrease": rho_n is not None and rho_n <= -TREND_RHO,
            "hops_increase": rho_h is not None and rho_h >= TREND_RHO,
        },
    }
    out = OutputPaths.in_dir(args.output)
    write_all({out.stats_csv: csv_text(STATS_COLUMNS, rows), out.report_json: json_text(report)})
    log.info("spearman neighbors %s, hops %s; wrote %s", rho_n, rho_h, out.stats_csv)
    return 0


def check_game(game, config: SolverConfig) -> dict:
    """Solve one game by mean field and by enumeration and compare."""
    normalized = True

    def watch(_, marginals):
        nonlocal normalized
        for m in marginals:
            normalized &= abs(m.probs.sum() - 1.0) <= NORMALIZATION_TOL

    report = solve_local_game(game, config, on_sweep=watch)
    exact = oracle_exact(game)
    tv = max(0.5 * float(np.abs(report.marginals.probs[j] - exact.marginals.probs[j]).sum())
             for j in range(game.n_members))
    trace = report.free_energy_trace
    monotone = all(b <= a + FREE_ENERGY_SLACK for a, b in zip(trace, trace[1:]))
    has_dom = exact.dominant_eq is not None
    match = has_dom and best_response_profile(report.marginals) == exact.dominant_eq
    return {
        "n_members": game.n_members,
        "action_counts": "x".join(str(len(u)) for u in game.unary),
        "tv_distance": tv,
        "has_dominant_eq": has_dom,
        "dominant_eq_match": match,
        "solver_sweeps": report.sweeps_used,
        "converged": report.converged,
        "free_energy_monotone": monotone,
        "marginals_normalized": normalized,
    }


def oracle_check(n_games, max_members=3, max_actions=5, seed=0, config=SolverConfig()) -> tuple:
    """Run ``n_games`` seeded random games; returns (per-game rows, summary)."""
    rng = np.random.default_rng(seed)
    rows = [check_game(random_game(rng, max_members, max_actions), config) for _ in range(n_games)]
    singles = [r for r in rows if r["n_members"] == 1]
    dom = [r for r in rows if r["has_dominant_eq"]]
    rate = sum(r["dominant_eq_match"] for r in dom) / len(dom) if dom else 1.0
    summary = {
        "games": len(rows),
        "singleton_games": len(singles),
        "max_singleton_tv": max((r["tv_distance"] for r in singles), default=0.0),
        "games_with_dominant_eq": len(dom),
        "dominant_eq_match_rate": rate,
        "max_tv_distance": max((r["tv_distance"] for r in rows), default=0.0),
    }
    passed = {
        "oracle_exactness": summary["max_singleton_tv"] <= SINGLETON_TV_TOL and rate >= DOMINANT_MATCH_RATE,
        "variational_monotonicity": all(r["free_energy_monotone"] and r["marginals_normalized"] for r in rows),
    }
    return rows, summary, passed


def cmd_oracle_check(args) -> int:
    if not 1 <= args.max_members <= 4:
        raise UsageError("--max-members must be between 1 and 4")
    if not 1 <= args.max_actions <= 6:
        raise UsageError("--max-actions must be between 1 and 6")
    if args.n_games < 0:
        raise UsageError("--n-games must be non-negative")
    t0 = time.perf_counter()
    rows, summary, passed = oracle_check(args.n_games, args.max_members, args.max_actions, args.seed)
    elapsed = time.perf_counter() - t0
    table = [(i, *(r[c] for c in ORACLE_COLUMNS[1:])) for i, r in enumerate(rows)]
    report = {
        "command": "oracle-check",
        "config_hash": config_hash({"n_games": args.n_games, "max_members": args.max_members,
                                    "max_actions": args.max_actions, "seed": args.seed}),
        "totals": summary,
        "pass": passed,
    }
    out = OutputPaths.in_dir(args.output)
    write_all({out.oracle_csv: csv_text(ORACLE_COLUMNS, table), out.report_json: json_text(report)})
    if not args.quiet:
        for name, ok in passed.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        print(f"{summary['games']} games, dominant-eq match rate {summary['dominant_eq_match_rate']:.3f} "
              f"over {summary['games_with_dominant_eq']} games, {elapsed:.2f} s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    parser = argparse.ArgumentParser(prog="stagegame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate a coverage scenario")
    p.add_argument("scenario", nargs="?", help="scenario JSON (default: bundled example)")
    p.add_argument("--steps", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--virtual-neighbors", dest="virtual_neighbors", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock solve times (makes the trace non-reproducible)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("net-stats", parents=[common], help="connectivity against region size")
    p.add_argument("--n-agents", type=int, default=7)
    p.add_argument("--spacings", default=",".join(str(s) for s in DEFAULT_SPACINGS),
                   help="comma-separated square sides in meters")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--altitude-m", type=float, default=0.0)
    defaults = LinkModelParams()
    for name in ("tx_power_dbm", "ref_loss_db", "path_loss_exponent", "rx_sensitivity_dbm", "ref_distance_m"):
        p.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(defaults, name))
    p.set_defaults(func=cmd_net_stats)

    p = sub.add_parser("oracle-check", parents=[common], help="mean field against exact enumeration")
    p.add_argument("--n-games", type=int, default=100)
    p.add_argument("--max-members", type=int, default=3)
    p.add_argument("--max-actions", type=int, default=5)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "run" and args.seed is None:
        args.seed = 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"stagegame: config error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"stagegame: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"stagegame: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
