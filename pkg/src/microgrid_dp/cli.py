"""Command-line surface: validate, calibrate, moments, solve, simulate, paper-run.

Exit codes: 0 success, 1 configuration/usage failure, 2 I/O failure,
3 numerical failure. All numeric exports use shortest round-trip float
formatting so identical inputs yield byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .calibrate import calibration_report
from .config import (ACTION_BY_LABEL, Action, ConfigError, ModelConfig, State,
                     config_hash, load_config, seasonality, validate_config)
from .dynamics import transition_moments
from .grid import StateGrid, build_grid
from .kernel import NumericalError, TransitionKernel
from .simulate import SCENARIOS, simulate_path
from .solver import PolicyTable, ValueTable, solve

__all__ = ["cli", "export_value_policy", "main"]


class _Parser(argparse.ArgumentParser):
    """Argument errors are usage/validation failures: exit 1, not argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError([message])


def _build_parser() -> _Parser:
    parser = _Parser(prog="microgrid-dp",
                     description="Stochastic control of a standalone solar microgrid "
                                 "with battery and backup generator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config")

    p = sub.add_parser("calibrate", help="derive battery/generator parameters")
    p.add_argument("config")
    p.add_argument("--q-star", type=float, default=0.98)
    p.add_argument("--q-star-hours", type=float, default=96.0)
    p.add_argument("--charge-window", type=str, default="6,18", metavar="T1,T2")
    p.add_argument("--discharge-window", type=str, default="18,30", metavar="T1,T2")
    p.add_argument("--confidence", type=float, default=0.92)
    p.add_argument("--z1", type=float, default=0.0)
    p.add_argument("--battery-price", type=float, default=None)
    p.add_argument("--battery-life", type=float, default=None, help="hours until replacement")
    p.add_argument("--max-abs-r", type=float, default=3.0)

    p = sub.add_parser("moments", help="one-step conditional moments at a state")
    p.add_argument("config")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--action", required=True, choices=sorted(ACTION_BY_LABEL))

    p = sub.add_parser("solve", help="run the backward recursion and export tables")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--export-steps", type=str, default=None,
                   help="comma-separated step indices (default: 0, N-12, N-1, N)")

    p = sub.add_parser("simulate", help="sample scenario paths under a solved policy")
    p.add_argument("config")
    p.add_argument("--policy", required=True, help="directory produced by solve")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--seeds", type=int, default=1, help="number of path seeds")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("paper-run", help="full pipeline: solve plus all scenario path sets")
    p.add_argument("config")
    p.add_argument("--out", default="paper-run-out")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--base-seed", type=int, default=0)
    return parser


def _parse_window(raw: str) -> tuple[float, float]:
    parts = raw.split(",")
    if len(parts) != 2:
        raise ConfigError([f"window must be 'start,end' hours, got {raw!r}"])
    return float(parts[0]), float(parts[1])


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def export_value_policy(tables: tuple[ValueTable, PolicyTable], grid: StateGrid,
                        steps: list[int], out_dir: str, cfg: ModelConfig) -> list[str]:
    """Write one CSV per step (i,j,k,z,r_mid,q,g,value_eur,action) plus metadata."""
    values, policy = tables
    n_steps = cfg.discretization.steps_N
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for n in steps:
        if not 0 <= n <= n_steps:
            raise ConfigError([f"export step {n} outside 0..{n_steps}"])
        mu = seasonality(cfg.t_of(n), cfg.demand)
        path = os.path.join(out_dir, f"value_policy_step{n:04d}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("i,j,k,z,r_mid,q,g,value_eur,action\n")
            for m in range(grid.n_states):
                i, j, k = grid.ijk(m)
                z = float(grid.z.points[i])
                label = "" if n == n_steps else policy.action_at(n, m).label
                fh.write(
                    f"{i},{j},{k},{_fmt(z)},{_fmt(mu + z)},{_fmt(grid.q.points[j])},"
                    f"{_fmt(grid.g.points[k])},{_fmt(values.values[n, m])},{label}\n"
                )
        written.append(path)
    meta = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "steps": list(steps),
        "grid": {
            "z_points": [float(v) for v in grid.z.points],
            "q_points": [float(v) for v in grid.q.points],
            "g_points": [float(v) for v in grid.g.points],
        },
    }
    meta_path = os.path.join(out_dir, "value_policy_meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    return written


def _write_tables(values: ValueTable, policy: PolicyTable, out_dir: str) -> str:
    path = os.path.join(out_dir, "tables.npz")
    np.savez(path, values=values.values, actions=policy.actions)
    return path


def _load_tables(policy_dir: str) -> tuple[ValueTable, PolicyTable]:
    path = os.path.join(policy_dir, "tables.npz")
    with np.load(path) as data:
        return ValueTable(data["values"].copy()), PolicyTable(data["actions"].copy())


def _write_paths_csv(records, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,time_h,z,r,q,g,action,stage_cost_eur,cum_cost_eur\n")
        for rec in records:
            fh.write(
                f"{rec.step},{_fmt(rec.time_h)},{_fmt(rec.z)},{_fmt(rec.r)},{_fmt(rec.q)},"
                f"{_fmt(rec.g)},{rec.action.label},{_fmt(rec.stage_cost_eur)},{_fmt(rec.cum_cost_eur)}\n"
            )


def _write_manifest(out_dir: str, cfg: ModelConfig, seed, outputs: list[str]) -> None:
    manifest = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "seed": seed,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(os.path.relpath(p, out_dir) for p in outputs),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _default_export_steps(cfg: ModelConfig) -> list[int]:
    n = cfg.discretization.steps_N
    return sorted({0, max(0, n - 12), max(0, n - 1), n})


def _simulate_scenario(cfg, grid, policy, scenario, seeds: int, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for idx in range(seeds):
        records = simulate_path(policy, scenario, cfg, grid, path_index=idx)
        path = os.path.join(out_dir, f"path_{scenario.name}_seed{idx:03d}.csv")
        _write_paths_csv(records, path)
        written.append(path)
    return written


def _run(args) -> int:
    cfg = load_config(args.config)

    if args.command == "validate":
        print(f"configuration valid (hash {config_hash(cfg)[:16]})")
        return 0

    if args.command == "calibrate":
        report = calibration_report(
            cfg,
            q_star=args.q_star, q_star_hours=args.q_star_hours,
            window_charge=_parse_window(args.charge_window),
            window_discharge=_parse_window(args.discharge_window),
            p=args.confidence, z1=args.z1,
            battery_price=args.battery_price, battery_life_h=args.battery_life,
            max_abs_R=args.max_abs_r,
        )
        print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        return 0

    if args.command == "moments":
        mom = transition_moments(args.n, State(args.z, args.q, args.g),
                                 ACTION_BY_LABEL[args.action], cfg)
        print(json.dumps({k: getattr(mom, k) for k in (
            "m_Z", "var_Z", "m_Q", "var_Q", "m_G", "var_G",
            "cov_ZQ", "rho_Q", "cov_ZG", "rho_G")}, indent=2))
        return 0

    grid = build_grid(cfg)

    if args.command == "solve":
        values, policy = solve(cfg, grid)
        os.makedirs(args.out, exist_ok=True)
        steps = (_default_export_steps(cfg) if args.export_steps is None
                 else sorted({int(s) for s in args.export_steps.split(",")}))
        outputs = export_value_policy((values, policy), grid, steps, args.out, cfg)
        outputs.append(_write_tables(values, policy, args.out))
        _write_manifest(args.out, cfg, None, outputs)
        print(f"solved {cfg.discretization.steps_N} steps x {grid.n_states} states -> {args.out}")
        return 0

    if args.command == "simulate":
        _, policy = _load_tables(args.policy)
        scenario = SCENARIOS[args.scenario].with_seed(args.base_seed)
        os.makedirs(args.out, exist_ok=True)
        outputs = _simulate_scenario(cfg, grid, policy, scenario, args.seeds, args.out)
        _write_manifest(args.out, cfg, args.base_seed, outputs)
        print(f"wrote {len(outputs)} path file(s) -> {args.out}")
        return 0

    if args.command == "paper-run":
        values, policy = solve(cfg, grid)
        os.makedirs(args.out, exist_ok=True)
        outputs = export_value_policy((values, policy), grid, _default_export_steps(cfg),
                                      args.out, cfg)
        outputs.append(_write_tables(values, policy, args.out))
        for name in ("sunny-start", "overcast-break", "sunny-finish", "overcast-week"):
            scenario = SCENARIOS[name].with_seed(args.base_seed)
            outputs.extend(_simulate_scenario(cfg, grid, policy, scenario,
                                              args.seeds, args.out))
        _write_manifest(args.out, cfg, args.base_seed, outputs)
        print(f"pipeline complete: {len(outputs)} file(s) -> {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


cli = main
