"""Command-line interface: fit / optimize / sweep / scaling.

Configuration is a JSON document mirroring :class:`SystemConfig` plus a
``tasks`` list (preset names or inline ``{c, d, bits_per_sample}`` objects).
Two unit conventions apply at this boundary only: ``sigma2`` is given in dBm
and ``P`` in watts; both are stored linearly in watts internally. Unknown
fields are rejected.

All outputs are deterministic for a fixed (config, seed): floats are printed
with 12 significant digits, '.' decimal separator, and '\\n' line endings.
Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(results are still written, flagged), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .metrics import clamp_error
from .pipeline import SCHEMES, aggregate_rows, monte_carlo, run_scheme, scaling_experiment
from .scenario import (SystemConfig, TaskModel, fit_error_model, generate_channels,
                       task_preset)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4

_CONFIG_FIELDS = {
    "K", "N", "M", "B", "T", "P", "sigma2", "beta",
    "pathloss_direct_exp", "pathloss_ris_exp",
    "dist_user_bs", "dist_user_ris", "dist_ris_bs", "seed", "tasks",
}


class ConfigError(ValueError):
    pass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def fmt(x) -> str:
    """Fixed 12-significant-digit decimal rendering for CSV/JSON text."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return format(float(x), ".12g")


def load_config(path: str | Path) -> tuple[SystemConfig, list[TaskModel]]:
    """Parse a config file; sigma2 arrives in dBm and is converted to watts."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "tasks" not in raw:
        raise ConfigError("config must list 'tasks'")
    tasks = []
    for item in raw["tasks"]:
        if isinstance(item, str):
            tasks.append(task_preset(item))
        elif isinstance(item, dict) and set(item) == {"c", "d", "bits_per_sample"}:
            tasks.append(TaskModel(item["c"], item["d"], item["bits_per_sample"]))
        else:
            raise ConfigError(f"bad task spec: {item!r}")
    fields = {k: v for k, v in raw.items() if k != "tasks"}
    try:
        fields["sigma2"] = dbm_to_watt(float(fields["sigma2"]))
    except KeyError:
        raise ConfigError("config must set 'sigma2' (in dBm)") from None
    try:
        cfg = SystemConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if len(tasks) != cfg.K:
        raise ConfigError(f"config lists {len(tasks)} tasks but K={cfg.K}")
    return cfg, tasks


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else fmt(cell) for cell in row])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_fit(args) -> int:
    def is_number(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    samples = []
    try:
        with open(args.input, encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if lineno == 1 and not is_number(row[0].strip()):
                    continue  # header row
                try:
                    size, err = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    print(f"{args.input}:{lineno}: malformed row {row!r}", file=sys.stderr)
                    return EXIT_CONFIG
                samples.append((size, err))
    except OSError as exc:
        print(f"cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        fit = fit_error_model(samples)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit.json", {
        "c": float(fmt(fit.c)),
        "d": float(fmt(fit.d)),
        "decay_warning": fit.decay_warning,
        "num_samples": len(samples),
    })
    print(f"fit: c={fmt(fit.c)} d={fmt(fit.d)} -> {out / 'fit.json'}")
    return EXIT_OK


def _state_payload(res) -> dict:
    st = res.state
    return {
        "objective": float(fmt(st.objective)),
        "per_task_error": [float(fmt(clamp_error(e))) for e in st.per_task_error],
        "per_task_rate": [float(fmt(r)) for r in st.per_task_rate],
        "p": [float(fmt(v)) for v in st.p],
        "w_real": [[float(fmt(v.real)) for v in row] for row in st.w],
        "w_imag": [[float(fmt(v.imag)) for v in row] for row in st.w],
        "theta_phase": [float(fmt(v)) for v in np.angle(st.theta)],
        "converged": bool(res.converged),
        "outer_iterations": res.outer_iterations,
    }


def cmd_optimize(args) -> int:
    try:
        cfg, tasks = load_config(args.config)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.scheme not in SCHEMES:
        print(f"config error: unknown scheme {args.scheme!r} (choose from {SCHEMES})", file=sys.stderr)
        return EXIT_CONFIG

    ch = generate_channels(cfg)
    res = run_scheme(args.scheme, cfg, ch, tasks)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "allocation.json", {
        "scheme": args.scheme,
        "seed": cfg.seed,
        "state": _state_payload(res),
    })
    _write_csv(out / "ao_trace.csv", ["iteration", "objective"],
               [[i, v] for i, v in enumerate(res.trace)])
    admm_rows = []
    for level, tr in enumerate(res.theta_residual_traces):
        admm_rows.extend([[level, i + 1, r] for i, r in enumerate(tr)])
    _write_csv(out / "admm_residual.csv", ["admm_run", "iteration", "residual"], admm_rows)
    print(f"{args.scheme}: objective={fmt(res.state.objective)} "
          f"({res.outer_iterations} outer iterations) -> {out}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _parse_sweep(spec: str) -> tuple[str, list[int]]:
    name, _, values = spec.partition("=")
    name = name.strip()
    if name not in ("M", "N") or not values:
        raise ConfigError(f"sweep spec must look like 'M=8,16,32', got {spec!r}")
    return name, [int(v) for v in values.split(",")]


def cmd_sweep(args) -> int:
    try:
        cfg, tasks = load_config(args.config)
        sweep = _parse_sweep(args.sweep) if args.sweep else None
        schemes = args.schemes.split(",") if args.schemes else list(SCHEMES)
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    rows = monte_carlo(cfg, tasks, schemes, args.trials, sweep=sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = list(rows[0].keys())
    _write_csv(out / "sweep.csv", header, [[row[h] for h in header] for row in rows])
    agg = aggregate_rows(rows)
    _write_csv(out / "sweep_summary.csv", list(agg[0].keys()),
               [[row[h] for h in agg[0].keys()] for row in agg])
    print(f"sweep: {len(rows)} rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    try:
        cfg, tasks = load_config(args.config)
        m_list = [int(v) for v in args.m_list.split(",")]
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    result = scaling_experiment(cfg, tasks[0], m_list, args.trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "scaling.csv", ["M", "mean_error"], [[m, e] for m, e in result.rows])
    _write_json(out / "scaling_fit.json", {"slope": float(fmt(result.slope)),
                                           "trials": args.trials})
    print(f"scaling: slope={fmt(result.slope)} -> {out / 'scaling.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rislearn",
        description="Learning-centric resource allocation for surface-assisted edge learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the power-law error model to (size, error) CSV rows")
    p_fit.add_argument("input", help="CSV file of sample_size,error rows")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.set_defaults(func=cmd_fit)

    p_opt = sub.add_parser("optimize", help="solve one scheme on one channel realization")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--scheme", default="proposed", help=f"one of {', '.join(SCHEMES)}")
    p_opt.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_opt.add_argument("--out", required=True)
    p_opt.set_defaults(func=cmd_optimize)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo comparison across schemes")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--sweep", default=None, help="e.g. 'M=8,16,32' or 'N=10,20'")
    p_sweep.add_argument("--schemes", default=None, help="comma list; default all")
    p_sweep.add_argument("--trials", type=int, default=10)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_scale = sub.add_parser("scaling", help="single-user error scaling in the surface size")
    p_scale.add_argument("--config", required=True)
    p_scale.add_argument("--m-list", default="32,64,128,256")
    p_scale.add_argument("--trials", type=int, default=50)
    p_scale.add_argument("--seed", type=int, default=None)
    p_scale.add_argument("--out", required=True)
    p_scale.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
