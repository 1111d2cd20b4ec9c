"""Experiment harness and command-line interface.

Subcommands:
  run      one scenario, one scheme, one seed -> JSON report
  sweep    one parameter over a value grid x schemes x seeds -> CSV/JSON table
  compare  schemes side by side on shared seeds at the base scenario

Sweep cells draw fresh channels from seeds derived from (root seed, grid
index, seed index), so curves at different grid points are statistically
independent; ``--fix-placement`` reuses the seed-index placement across
the grid instead.  Tables are emitted with the fixed column set

  scheme,seed,K,Nt,N,E0_J,p_max_W,m,chi,worst_eps,energy_J,runtime_s

one data row per (scheme, grid point, seed), followed by one "mean" row
per (scheme, grid point) and, when at least two seeds ran, one "std" row
(sample standard deviation).  Emission is byte-stable for identical
results.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .baselines import SCHEMES, run_scheme
from .channels import place_users, realize_channels
from .config import SystemConfig, config_overrides, load_config, make_config

__all__ = ["CSV_COLUMNS", "SWEEP_PARAMS", "sweep", "emit_report", "run_command", "main"]

CSV_COLUMNS = (
    "scheme",
    "seed",
    "K",
    "Nt",
    "N",
    "E0_J",
    "p_max_W",
    "m",
    "chi",
    "worst_eps",
    "energy_J",
    "runtime_s",
)

SWEEP_PARAMS = {
    "N": ("N", int),
    "E0": ("E0", float),
    "Nt": ("Nt", int),
    "p_max": ("p_max", float),
    "K": ("K", int),
}


def derive_cell_seed(root_seed: int, grid_idx: int, seed_idx: int) -> int:
    ss = np.random.SeedSequence([int(root_seed), 7919 + int(grid_idx), int(seed_idx)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _cell_config(cfg: SystemConfig, param: str | None, value) -> SystemConfig:
    if param is None:
        return cfg
    field, cast = SWEEP_PARAMS[param]
    return config_overrides(cfg, **{field: cast(value)})


def _run_cell(cfg: SystemConfig, scheme: str, cell_seed: int, user_pos=None):
    cfg = config_overrides(cfg, seed=cell_seed)
    t0 = time.perf_counter()
    ch = realize_channels(cfg, user_pos=user_pos)
    alloc, rep = run_scheme(scheme, cfg, ch)
    runtime = time.perf_counter() - t0
    return alloc, rep, runtime, cfg


def _row(scheme: str, seed_label, cfg: SystemConfig, rep, runtime: float) -> dict:
    return {
        "scheme": scheme,
        "seed": seed_label,
        "K": cfg.K,
        "Nt": cfg.Nt,
        "N": cfg.N,
        "E0_J": float(cfg.E0),
        "p_max_W": float(max(cfg.p_max)),
        "m": float("nan") if rep is None else float(rep.m),
        "chi": float("nan") if rep is None else float(rep.chi),
        "worst_eps": float("nan") if rep is None else float(rep.worst_eps),
        "energy_J": float("nan") if rep is None else float(rep.energy_total),
        "runtime_s": float(runtime),
    }


def _cell_task(args):
    cfg, scheme, cell_seed, user_pos = args
    try:
        alloc, rep, runtime, cell_cfg = _run_cell(cfg, scheme, cell_seed, user_pos)
        return _row(scheme, None, cell_cfg, rep, runtime), alloc, cell_cfg, None
    except Exception as exc:  # failures are recorded per row, sweep continues
        return _row(scheme, None, cfg, None, 0.0), None, cfg, f"{type(exc).__name__}: {exc}"


def sweep(
    cfg: SystemConfig,
    param: str | None,
    values,
    schemes,
    seeds: int,
    jobs: int = 1,
    fix_placement: bool = False,
    on_result=None,
) -> list[dict]:
    """Run the grid and return the result table (data rows + aggregates).

    ``on_result(row, alloc, cell_cfg)`` is invoked for every successful
    cell, e.g. to audit allocations.
    """
    if param is not None and param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}")
    grid = list(values) if param is not None else [None]
    if not grid:
        raise ValueError("sweep needs at least one grid value")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")

    tasks = []
    labels = []
    for gi, value in enumerate(grid):
        cell_cfg = _cell_config(cfg, param, value)
        for scheme in schemes:
            for si in range(seeds):
                cell_seed = derive_cell_seed(cfg.seed, gi, si)
                user_pos = None
                if fix_placement:
                    placement_seed = derive_cell_seed(cfg.seed, 0, si)
                    user_pos = place_users(cell_cfg, seed=placement_seed)
                tasks.append((cell_cfg, scheme, cell_seed, user_pos))
                labels.append((gi, scheme, si))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_cell_task, tasks))
    else:
        outcomes = [_cell_task(t) for t in tasks]

    rows: list[dict] = []
    by_group: dict[tuple, list[dict]] = {}
    for (gi, scheme, si), (row, alloc, cell_cfg, err) in zip(labels, outcomes):
        row["seed"] = si
        if err is not None:
            print(f"warning: cell (grid={gi}, scheme={scheme}, seed={si}) failed: {err}",
                  file=sys.stderr)
        elif on_result is not None:
            on_result(row, alloc, cell_cfg)
        rows.append(row)
        by_group.setdefault((gi, scheme), []).append(row)

    agg_keys = ("m", "chi", "worst_eps", "energy_J", "runtime_s")
    for gi, _value in enumerate(grid):
        for scheme in schemes:
            group = by_group.get((gi, scheme), [])
            if not group:
                continue
            mean_row = dict(group[0])
            mean_row["seed"] = "mean"
            for key in agg_keys:
                mean_row[key] = float(np.mean([r[key] for r in group]))
            rows.append(mean_row)
            if len(group) >= 2:
                std_row = dict(group[0])
                std_row["seed"] = "std"
                for key in agg_keys:
                    std_row[key] = float(np.std([r[key] for r in group], ddof=1))
                rows.append(std_row)
    return rows


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(results: list[dict], fmt: str, path) -> None:
    """Write the result table; identical inputs yield identical bytes."""
    if not results:
        raise ValueError("no results to emit")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in results:
            lines.append(",".join(_format_value(row[c]) for c in CSV_COLUMNS))
        payload = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = json.dumps(
            [{c: row[c] for c in CSV_COLUMNS} for row in results],
            indent=2, sort_keys=True,
        ) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(payload)


def _fmt_from_path(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "json" if str(path).endswith(".json") else "csv"


def _load_base_config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else make_config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = config_overrides(cfg, **overrides)
    return cfg


def run_command(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ris-urllc",
        description="Worst-case decoding-error optimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single scenario run -> JSON report")
    p_run.add_argument("--config", help="TOML scenario file")
    p_run.add_argument("--scheme", default="proposed", choices=SCHEMES)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="parameter sweep -> CSV/JSON table")
    p_sweep.add_argument("--config", help="TOML scenario file")
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p_sweep.add_argument("--values", required=True, help="comma-separated grid")
    p_sweep.add_argument("--seeds", type=int, default=50)
    p_sweep.add_argument("--schemes", default="proposed")
    p_sweep.add_argument("--seed", type=int, default=None, help="root seed")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--fix-placement", action="store_true")
    p_sweep.add_argument("--format", choices=("csv", "json"), default=None)
    p_sweep.add_argument("--out", required=True)

    p_cmp = sub.add_parser("compare", help="schemes on shared seeds -> table")
    p_cmp.add_argument("--config", help="TOML scenario file")
    p_cmp.add_argument("--schemes", default=",".join(SCHEMES))
    p_cmp.add_argument("--seeds", type=int, default=50)
    p_cmp.add_argument("--seed", type=int, default=None, help="root seed")
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--format", choices=("csv", "json"), default=None)
    p_cmp.add_argument("--out", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = _load_base_config(args)
        if args.command == "run":
            t0 = time.perf_counter()
            ch = realize_channels(cfg)
            alloc, rep, trace = run_scheme(args.scheme, cfg, ch, with_trace=True)
            runtime = time.perf_counter() - t0
            payload = {
                "scheme": args.scheme,
                "seed": cfg.seed,
                "K": cfg.K,
                "Nt": cfg.Nt,
                "N": cfg.N,
                "E0_J": cfg.E0,
                "p_max_W": float(max(cfg.p_max)),
                "runtime_s": runtime,
                **trace.to_dict(),
            }
            with open(args.out, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
            rows = sweep(
                cfg, args.param, values, schemes, args.seeds,
                jobs=args.jobs, fix_placement=args.fix_placement,
            )
            emit_report(rows, _fmt_from_path(args.out, args.format), args.out)
        else:  # compare
            schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
            rows = sweep(cfg, None, [None], schemes, args.seeds, jobs=args.jobs)
            emit_report(rows, _fmt_from_path(args.out, args.format), args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
