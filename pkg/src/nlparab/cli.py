"""Command-line entry point: config-driven, deterministic, file-based runs.

Five subcommands share one flag set (--config/--out/--threads/--seed) and
one exit-code contract: 0 success, 2 config error, 3 numerical failure,
4 violated certificate.  Every command writes a resolved config next to
its outputs so any artifact can be reproduced from the directory alone.
CSV column orders are fixed; summaries land in JSON.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import load_config, dump_resolved
from .counterexample import (
    CounterexampleSpec,
    certify_failure,
    certify_lower_bound,
    export_pointwise_csv,
    export_tail_csv,
    run_counterexample,
)
from .errors import (
    CertificateError,
    ConfigError,
    GridError,
    NlparabError,
    SolverError,
)
from .experiments import (
    AXES_BASE_COLUMNS,
    SWEEP_BASE_COLUMNS,
    SweepGeometry,
    axes_family,
    axes_summary,
    harnack_sweep,
    heat_oracle_error,
    rows_to_csv,
    sweep_summary,
)
from .kernels import FracParams
from .solver import (
    export_solution_csv,
    solve,
    write_csv_atomic,
    write_json_atomic,
    write_text_atomic,
)
from .verifier import (
    axes_harnack,
    harnack_quotient,
    harnack_with_tails,
    holder_report,
    locbd_ratio,
    weak_harnack_ratio,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATE = 4

_VERIFY_OPS = {
    "harnack": harnack_quotient,
    "harnack_with_tails": harnack_with_tails,
    "weak_harnack": weak_harnack_ratio,
    "locbd": locbd_ratio,
    "axes_harnack": axes_harnack,
}

REPORT_COLUMNS = ["inequality", "t0", "R", "left", "right", "constant", "flags"]


def _write_resolved(cfg, out_dir, threads, seed):
    text = dump_resolved(cfg, extra={"output": str(out_dir), "threads": threads})
    write_text_atomic(str(out_dir / "resolved_config.yaml"), text)


def cmd_run(cfg, out_dir, threads, seed):
    spec = cfg.build_kernel()
    grid = cfg.build_grid()
    scenario = cfg.build_scenario(spec, grid)
    solution = solve(scenario, cfg.solve_options())
    export_solution_csv(solution.field, str(out_dir / "solution.csv"))
    diagnostics = dict(solution.diagnostics)
    if cfg.resolved.get("diagnostics", {}).get("heat_oracle"):
        diagnostics["heat_oracle_error"] = heat_oracle_error(solution)
    write_json_atomic(str(out_dir / "diagnostics.json"), diagnostics)
    _write_resolved(cfg, out_dir, threads, seed)
    return EXIT_OK


def cmd_verify(cfg, out_dir, threads, seed):
    spec = cfg.build_kernel()
    grid = cfg.build_grid()
    scenario = cfg.build_scenario(spec, grid)
    solution = solve(scenario, cfg.solve_options())
    rows, reports = [], []
    for op in cfg.resolved["measurement"]["ops"]:
        name, t0, x0, R = op["inequality"], op["t0"], op["x0"], op["R"]
        if name == "holder":
            reps = holder_report(solution, t0, x0, R, gammas=tuple(op["gammas"]), eps=op["eps"])
        else:
            reps = [_VERIFY_OPS[name](solution, t0, x0, R)]
        for rep in reps:
            row = {
                "inequality": rep.inequality,
                "t0": t0,
                "R": R,
                "left": rep.left,
                "right": rep.right,
                "constant": rep.constant,
                "flags": ";".join(rep.flags),
            }
            if "gamma" in rep.params:
                row["gamma"] = rep.params["gamma"]
            for k, v in rep.summands.items():
                row[f"summand_{k}"] = v
            rows.append(row)
            reports.append({
                "inequality": rep.inequality,
                "t0": t0,
                "x0": x0,
                "R": R,
                "left": rep.left,
                "right": rep.right,
                "constant": rep.constant,
                "summands": rep.summands,
                "params": rep.params,
                "flags": rep.flags,
            })
    rows_to_csv(rows, str(out_dir / "report.csv"), base_columns=REPORT_COLUMNS)
    write_json_atomic(str(out_dir / "report.json"), reports)
    _write_resolved(cfg, out_dir, threads, seed)
    return EXIT_OK


def cmd_sweep(cfg, out_dir, threads, seed):
    sw = cfg.resolved["sweep"]
    rows = harnack_sweep(
        sw["alphas"],
        sw["radii"],
        sw["coefficients"],
        seed=sw["seed"],
        geometry=SweepGeometry(**sw["geometry"]),
        threads=threads,
        inequalities=tuple(sw["inequalities"]),
    )
    rows_to_csv(rows, str(out_dir / "sweep.csv"), base_columns=SWEEP_BASE_COLUMNS)
    write_json_atomic(str(out_dir / "summary.json"), sweep_summary(rows))
    _write_resolved(cfg, out_dir, threads, seed)
    return EXIT_OK


def cmd_counterexample(cfg, out_dir, threads, seed):
    ce = cfg.resolved["counterexample"]
    cspec = CounterexampleSpec(
        params=FracParams(d=1, alpha=ce["alpha"]),
        h=ce["h"],
        delta=ce["delta"],
        k_max=ce["k_max"],
        per_level=ce["per_level"],
        t_end=ce["t_end"],
        scheme=ce["scheme"],
    )
    solution = run_counterexample(cspec)
    lower = certify_lower_bound(solution, cspec)
    failure = certify_failure(solution, cspec, gamma_grid=tuple(ce["gammas"]))
    export_pointwise_csv(failure, str(out_dir / "pointwise.csv"))
    export_tail_csv(failure, str(out_dir / "tails.csv"))
    header, rows = lower.to_rows()
    write_csv_atomic(str(out_dir / "lower_bound.csv"), header, rows)
    write_json_atomic(str(out_dir / "summary.json"), {
        "delta": cspec.delta,
        "delta_star": cspec.delta_star,
        "certificate_margin": cspec.certificate_margin,
        "lower_bound_holds": lower.holds,
        "monotone_onset": lower.monotone_ok,
        "worst_drop": lower.worst_drop,
        "checks": failure.checks,
        "partial_growth": {str(g): failure.params["partial_growth"][g]
                           for g in failure.gamma_grid},
    })
    _write_resolved(cfg, out_dir, threads, seed)
    if not lower.holds:
        print("certificate violated: pointwise lower bound fails beyond tolerance",
              file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def cmd_axes(cfg, out_dir, threads, seed):
    ax = cfg.resolved["axes"]
    rows = axes_family(
        radii=tuple(ax["radii"]),
        alpha=ax["alpha"],
        h=ax["h"],
        x_omega=ax["x_omega"],
        r_trunc=ax["r_trunc"],
        center=tuple(ax["center"]),
        R=ax["R"],
        scheme=ax["scheme"],
        steps_per_window=ax["steps_per_window"],
        warmup_windows=ax["warmup_windows"],
        threads=threads,
    )
    columns = AXES_BASE_COLUMNS + ["summand_tail_free_constant"]
    rows_to_csv(rows, str(out_dir / "axes.csv"), base_columns=columns)
    write_json_atomic(str(out_dir / "summary.json"), axes_summary(rows))
    _write_resolved(cfg, out_dir, threads, seed)
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "counterexample": cmd_counterexample,
    "axes": cmd_axes,
}

_HELP = {
    "run": "solve one scenario and write solution CSV + diagnostics JSON",
    "verify": "solve a scenario and measure the listed inequality constants",
    "sweep": "fan out over (alpha, R, coefficient) cells and aggregate constants",
    "counterexample": "run the blow-up certificate pipeline and export both CSVs",
    "axes": "run the shrinking-far-ball family on the axes operator",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nlparab",
        description="numerical laboratory for nonlocal parabolic equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", required=True, help="path to the YAML config")
        p.add_argument("--out", default=None,
                       help="output directory (default: config 'output', else ./out)")
        p.add_argument("--threads", type=int, default=None,
                       help="parallel workers for fan-out (default: config, else hardware)")
        p.add_argument("--seed", type=int, default=0,
                       help="global seed; config values take precedence (default 0)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or cfg.resolved["output"] or "./out")
    threads = args.threads or cfg.resolved["threads"] or os.cpu_count() or 1
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, out_dir, threads, args.seed)
    except (ConfigError, GridError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        step = "" if e.step is None else f" at step {e.step}"
        print(f"numerical failure{step}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CertificateError as e:
        print(f"certificate violated: {e}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except NlparabError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
