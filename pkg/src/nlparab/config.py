"""Config schema, validation, and object builders for the CLI workflows.

A config is a YAML mapping with nested blocks.  Validation is strict in
both directions: required keys must be present, unknown keys are rejected
with the full dotted path, and every default the loader fills in lands in
the resolved copy that each command writes next to its outputs.  The
resolved copy re-runs to identical results; nothing is defaulted silently.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .errors import ConfigError
from .grids import (
    AnnulusIndicator,
    BallIndicator,
    ConstantProfile,
    ConstantRule,
    GaussianRule,
    Grid,
    LinearProfile,
    LogInvSqProfile,
    PulseProfile,
    ZeroRule,
)
from .kernels import AXES_SINGULAR, FracParams, KernelSpec
from .solver import Scenario, SolveOptions
from .experiments import SweepGeometry, make_coefficient

SCHEMA_VERSION = 1

WORKFLOWS = ("run", "verify", "sweep", "counterexample", "axes")

_MISSING = object()


def _pop(mapping, key, path, default=_MISSING):
    if key in mapping:
        return mapping.pop(key)
    if default is _MISSING:
        raise ConfigError(f"key '{path}.{key}': required but missing")
    return default


def _finish(mapping, path):
    if mapping:
        stray = sorted(mapping)[0]
        raise ConfigError(f"unknown key '{path}.{stray}'")


def _as_map(value, path):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"key '{path}': expected a mapping, got {type(value).__name__}")
    return dict(value)


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{path}': expected a number, got {value!r}")
    return float(value)


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key '{path}': expected an integer, got {value!r}")
    return int(value)


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(f"key '{path}': expected true/false, got {value!r}")
    return value


def _as_str(value, path, choices=None):
    if not isinstance(value, str):
        raise ConfigError(f"key '{path}': expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"key '{path}': {value!r} not among {sorted(choices)}")
    return value


def _as_float_list(value, path, length=None, min_len=None):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"key '{path}': expected a list, got {value!r}")
    out = [_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        raise ConfigError(f"key '{path}': expected {length} entries, got {len(out)}")
    if min_len is not None and len(out) < min_len:
        raise ConfigError(f"key '{path}': expected at least {min_len} entries")
    return out


def _positive(value, path):
    if value <= 0.0:
        raise ConfigError(f"key '{path}': must be positive, got {value}")
    return value


# --- block validators; each consumes a raw mapping and returns the resolved one


def _coefficient_block(raw, path, lam, Lam, seed):
    m = _as_map(raw, path)
    kind = _as_str(
        _pop(m, "kind", path, "constant"),
        f"{path}.kind",
        choices=("constant", "checkerboard", "time_oscillating", "random_piecewise"),
    )
    out = {"kind": kind}
    if kind == "constant":
        out["value"] = _positive(_as_float(_pop(m, "value", path, lam), f"{path}.value"), f"{path}.value")
    else:
        out["cell_size"] = _positive(
            _as_float(_pop(m, "cell_size", path, 0.25), f"{path}.cell_size"), f"{path}.cell_size"
        )
        out["period"] = _positive(
            _as_float(_pop(m, "period", path, 0.25), f"{path}.period"), f"{path}.period"
        )
        out["seed"] = _as_int(_pop(m, "seed", path, seed), f"{path}.seed")
    _finish(m, path)
    return out


def _kernel_block(raw, path, seed):
    m = _as_map(raw, path)
    d = _as_int(_pop(m, "d", path), f"{path}.d")
    if d not in (1, 2):
        raise ConfigError(f"key '{path}.d': must be 1 or 2, got {d}")
    alpha = _as_float(_pop(m, "alpha", path), f"{path}.alpha")
    alpha0 = _as_float(_pop(m, "alpha0", path, 0.1), f"{path}.alpha0")
    lam = _positive(_as_float(_pop(m, "lam", path, 1.0), f"{path}.lam"), f"{path}.lam")
    Lam = _as_float(_pop(m, "Lam", path, lam), f"{path}.Lam")
    if Lam < lam:
        raise ConfigError(f"key '{path}.Lam': must be >= lam = {lam}, got {Lam}")
    structure = _as_str(
        _pop(m, "structure", path, "absolutely_continuous"),
        f"{path}.structure",
        choices=("absolutely_continuous", AXES_SINGULAR),
    )
    coeff = _coefficient_block(m.pop("coefficient", None), f"{path}.coefficient", lam, Lam, seed)
    _finish(m, path)
    return {
        "d": d,
        "alpha": alpha,
        "alpha0": alpha0,
        "lam": lam,
        "Lam": Lam,
        "structure": structure,
        "coefficient": coeff,
    }


def _grid_block(raw, path):
    m = _as_map(raw, path)
    out = {
        "x_omega": _positive(_as_float(_pop(m, "x_omega", path), f"{path}.x_omega"), f"{path}.x_omega"),
        "r_trunc": _positive(_as_float(_pop(m, "r_trunc", path), f"{path}.r_trunc"), f"{path}.r_trunc"),
        "h": _positive(_as_float(_pop(m, "h", path), f"{path}.h"), f"{path}.h"),
        "domain": _as_str(_pop(m, "domain", path, "ball"), f"{path}.domain", choices=("ball", "box")),
    }
    _finish(m, path)
    return out


_RULE_KEYS = {
    "zero": (),
    "constant": ("value",),
    "gaussian": ("amplitude", "sigma", "center"),
    "ball": ("center", "radius"),
    "annulus": ("r_inner", "r_outer"),
}


def _rule_block(raw, path, d):
    m = _as_map(raw, path)
    kind = _as_str(_pop(m, "kind", path, "zero"), f"{path}.kind", choices=tuple(_RULE_KEYS))
    out = {"kind": kind}
    if kind == "constant":
        out["value"] = _as_float(_pop(m, "value", path), f"{path}.value")
    elif kind == "gaussian":
        out["amplitude"] = _as_float(_pop(m, "amplitude", path, 1.0), f"{path}.amplitude")
        out["sigma"] = _positive(_as_float(_pop(m, "sigma", path), f"{path}.sigma"), f"{path}.sigma")
        center = _pop(m, "center", path, None)
        out["center"] = None if center is None else _as_float_list(center, f"{path}.center", length=d)
    elif kind == "ball":
        out["center"] = _as_float_list(_pop(m, "center", path), f"{path}.center", length=d)
        out["radius"] = _positive(_as_float(_pop(m, "radius", path), f"{path}.radius"), f"{path}.radius")
    elif kind == "annulus":
        out["r_inner"] = _positive(_as_float(_pop(m, "r_inner", path), f"{path}.r_inner"), f"{path}.r_inner")
        out["r_outer"] = _as_float(_pop(m, "r_outer", path), f"{path}.r_outer")
        if out["r_outer"] <= out["r_inner"]:
            raise ConfigError(f"key '{path}.r_outer': must exceed r_inner")
    _finish(m, path)
    return out


def _profile_block(raw, path):
    m = _as_map(raw, path)
    kind = _as_str(
        _pop(m, "kind", path, "constant"),
        f"{path}.kind",
        choices=("constant", "linear", "pulse", "log_inv_sq"),
    )
    out = {"kind": kind}
    if kind == "constant":
        out["level"] = _as_float(_pop(m, "level", path, 1.0), f"{path}.level")
    elif kind == "linear":
        out["rate"] = _as_float(_pop(m, "rate", path, 1.0), f"{path}.rate")
    elif kind == "pulse":
        out["t_on"] = _as_float(_pop(m, "t_on", path), f"{path}.t_on")
        out["t_off"] = _as_float(_pop(m, "t_off", path), f"{path}.t_off")
        out["level"] = _as_float(_pop(m, "level", path, 1.0), f"{path}.level")
        if out["t_off"] <= out["t_on"]:
            raise ConfigError(f"key '{path}.t_off': must exceed t_on")
    _finish(m, path)
    return out


def _term_list(raw, path, d):
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ConfigError(f"key '{path}': expected a list of profile/rule pairs")
    out = []
    for i, item in enumerate(raw):
        m = _as_map(item, f"{path}[{i}]")
        profile = _profile_block(m.pop("profile", None), f"{path}[{i}].profile")
        rule = _rule_block(_pop(m, "rule", f"{path}[{i}]"), f"{path}[{i}].rule", d)
        _finish(m, f"{path}[{i}]")
        out.append({"profile": profile, "rule": rule})
    return out


def _scenario_block(raw, path, d):
    m = _as_map(raw, path)
    t_start = _as_float(_pop(m, "t_start", path, 0.0), f"{path}.t_start")
    t_end = _as_float(_pop(m, "t_end", path), f"{path}.t_end")
    if t_end <= t_start:
        raise ConfigError(f"key '{path}.t_end': must exceed t_start = {t_start}")
    n_steps = _as_int(_pop(m, "n_steps", path), f"{path}.n_steps")
    if n_steps < 1:
        raise ConfigError(f"key '{path}.n_steps': must be >= 1, got {n_steps}")
    out = {
        "t_start": t_start,
        "t_end": t_end,
        "n_steps": n_steps,
        "scheme": _as_str(_pop(m, "scheme", path, "implicit"), f"{path}.scheme",
                          choices=("explicit", "implicit")),
        "cfl_factor": _as_float(_pop(m, "cfl_factor", path, 0.9), f"{path}.cfl_factor"),
        "allow_substepping": _as_bool(_pop(m, "allow_substepping", path, True),
                                      f"{path}.allow_substepping"),
        "stride": _as_int(_pop(m, "stride", path, 1), f"{path}.stride"),
        "initial": _rule_block(m.pop("initial", None), f"{path}.initial", d),
        "exterior": _term_list(m.pop("exterior", None), f"{path}.exterior", d),
        "source": _term_list(m.pop("source", None), f"{path}.source", d),
    }
    _finish(m, path)
    return out


_INEQUALITIES = ("harnack", "harnack_with_tails", "weak_harnack", "locbd", "axes_harnack", "holder")


def _measurement_block(raw, path, d):
    m = _as_map(raw, path)
    ops_raw = _pop(m, "ops", path)
    if not isinstance(ops_raw, list) or not ops_raw:
        raise ConfigError(f"key '{path}.ops': expected a non-empty list")
    ops = []
    for i, item in enumerate(ops_raw):
        om = _as_map(item, f"{path}.ops[{i}]")
        p = f"{path}.ops[{i}]"
        op = {
            "inequality": _as_str(_pop(om, "inequality", p), f"{p}.inequality", choices=_INEQUALITIES),
            "t0": _as_float(_pop(om, "t0", p), f"{p}.t0"),
            "x0": _as_float_list(_pop(om, "x0", p), f"{p}.x0", length=d),
            "R": _positive(_as_float(_pop(om, "R", p), f"{p}.R"), f"{p}.R"),
        }
        if op["inequality"] == "holder":
            op["gammas"] = _as_float_list(_pop(om, "gammas", p, [0.1, 0.2, 0.5]), f"{p}.gammas", min_len=1)
            op["eps"] = _positive(_as_float(_pop(om, "eps", p, 0.5), f"{p}.eps"), f"{p}.eps")
        _finish(om, p)
        ops.append(op)
    _finish(m, path)
    return {"ops": ops}


def _sweep_block(raw, path, seed):
    m = _as_map(raw, path)
    out = {
        "alphas": _as_float_list(_pop(m, "alphas", path), f"{path}.alphas", min_len=1),
        "radii": _as_float_list(_pop(m, "radii", path), f"{path}.radii", min_len=1),
        "seed": _as_int(_pop(m, "seed", path, seed), f"{path}.seed"),
    }
    coeffs = _pop(m, "coefficients", path)
    if not isinstance(coeffs, list) or not coeffs:
        raise ConfigError(f"key '{path}.coefficients': expected a non-empty list")
    out["coefficients"] = [
        _as_str(c, f"{path}.coefficients[{i}]",
                choices=("constant", "checkerboard", "time_oscillating", "random_piecewise"))
        for i, c in enumerate(coeffs)
    ]
    ineqs = _pop(m, "inequalities", path, ["harnack", "harnack_with_tails", "weak_harnack"])
    if not isinstance(ineqs, list) or not ineqs:
        raise ConfigError(f"key '{path}.inequalities': expected a non-empty list")
    out["inequalities"] = [
        _as_str(q, f"{path}.inequalities[{i}]",
                choices=("harnack", "harnack_with_tails", "weak_harnack", "locbd"))
        for i, q in enumerate(ineqs)
    ]
    geo_raw = _as_map(m.pop("geometry", None), f"{path}.geometry")
    defaults = SweepGeometry()
    geo = {}
    for name, caster in (
        ("d", _as_int), ("h", _as_float), ("x_omega", _as_float), ("r_trunc", _as_float),
        ("lam", _as_float), ("Lam", _as_float), ("sigma", _as_float),
        ("t0_factor", _as_float), ("steps_per_window", _as_int),
        ("cell_size", _as_float), ("period", _as_float),
    ):
        geo[name] = caster(_pop(geo_raw, name, f"{path}.geometry", getattr(defaults, name)),
                           f"{path}.geometry.{name}")
    geo["scheme"] = _as_str(_pop(geo_raw, "scheme", f"{path}.geometry", defaults.scheme),
                            f"{path}.geometry.scheme", choices=("explicit", "implicit"))
    _finish(geo_raw, f"{path}.geometry")
    out["geometry"] = geo
    _finish(m, path)
    return out


def _counterexample_block(raw, path):
    m = _as_map(raw, path)
    delta = m.pop("delta", None)
    out = {
        "alpha": _as_float(_pop(m, "alpha", path, 1.0), f"{path}.alpha"),
        "h": _positive(_as_float(_pop(m, "h", path, 1.0 / 16.0), f"{path}.h"), f"{path}.h"),
        "delta": None if delta is None else _positive(_as_float(delta, f"{path}.delta"), f"{path}.delta"),
        "k_max": _as_int(_pop(m, "k_max", path, 31), f"{path}.k_max"),
        "per_level": _as_int(_pop(m, "per_level", path, 4), f"{path}.per_level"),
        "t_end": _as_float(_pop(m, "t_end", path, 0.5), f"{path}.t_end"),
        "scheme": _as_str(_pop(m, "scheme", path, "explicit"), f"{path}.scheme",
                          choices=("explicit", "implicit")),
        "gammas": _as_float_list(_pop(m, "gammas", path, [0.1, 0.25, 0.5, 1.0]),
                                 f"{path}.gammas", min_len=1),
    }
    _finish(m, path)
    return out


def _axes_block(raw, path):
    m = _as_map(raw, path)
    out = {
        "radii": _as_float_list(_pop(m, "radii", path, [0.25, 0.125, 0.0625]),
                                f"{path}.radii", min_len=2),
        "alpha": _as_float(_pop(m, "alpha", path, 1.0), f"{path}.alpha"),
        "h": _positive(_as_float(_pop(m, "h", path, 1.0 / 24.0), f"{path}.h"), f"{path}.h"),
        "x_omega": _positive(_as_float(_pop(m, "x_omega", path, 1.0), f"{path}.x_omega"),
                             f"{path}.x_omega"),
        "r_trunc": _positive(_as_float(_pop(m, "r_trunc", path, 3.0), f"{path}.r_trunc"),
                             f"{path}.r_trunc"),
        "center": _as_float_list(_pop(m, "center", path, [2.2, 0.03]), f"{path}.center", length=2),
        "R": _positive(_as_float(_pop(m, "R", path, 0.25), f"{path}.R"), f"{path}.R"),
        "scheme": _as_str(_pop(m, "scheme", path, "explicit"), f"{path}.scheme",
                          choices=("explicit", "implicit")),
        "steps_per_window": _as_int(_pop(m, "steps_per_window", path, 16),
                                    f"{path}.steps_per_window"),
        "warmup_windows": _as_float(_pop(m, "warmup_windows", path, 3.0),
                                    f"{path}.warmup_windows"),
    }
    _finish(m, path)
    return out


_BLOCKS_BY_WORKFLOW = {
    "run": ("kernel", "grid", "scenario", "diagnostics"),
    "verify": ("kernel", "grid", "scenario", "measurement"),
    "sweep": ("sweep",),
    "counterexample": ("counterexample",),
    "axes": ("axes",),
}


@dataclass
class ExperimentConfig:
    """A validated, fully resolved config plus builders for the lab objects."""

    workflow: str
    resolved: dict

    def build_kernel(self):
        k = self.resolved["kernel"]
        params = FracParams(d=k["d"], alpha=k["alpha"], lam=k["lam"], Lam=k["Lam"],
                            alpha0=k["alpha0"])
        c = k["coefficient"]
        coeff = make_coefficient(
            c["kind"],
            c.get("value", k["lam"]),
            k["Lam"],
            seed=c.get("seed", 0),
            cell_size=c.get("cell_size", 0.25),
            period=c.get("period", 0.25),
        )
        return KernelSpec(params, coeff, structure=k["structure"])

    def build_grid(self):
        g = self.resolved["grid"]
        return Grid(self.resolved["kernel"]["d"], g["x_omega"], g["r_trunc"], g["h"],
                    domain=g["domain"])

    def build_scenario(self, spec, grid):
        s = self.resolved["scenario"]
        return Scenario(
            spec=spec,
            grid=grid,
            t_start=s["t_start"],
            t_end=s["t_end"],
            n_steps=s["n_steps"],
            initial=build_rule(s["initial"]),
            g_terms=tuple((build_profile(t["profile"]), build_rule(t["rule"]))
                          for t in s["exterior"]),
            f_terms=tuple((build_profile(t["profile"]), build_rule(t["rule"]))
                          for t in s["source"]),
        )

    def solve_options(self):
        s = self.resolved["scenario"]
        return SolveOptions(scheme=s["scheme"], cfl_factor=s["cfl_factor"],
                            stride=s["stride"], allow_substepping=s["allow_substepping"])


def build_rule(resolved):
    kind = resolved["kind"]
    if kind == "zero":
        return ZeroRule()
    if kind == "constant":
        return ConstantRule(resolved["value"])
    if kind == "gaussian":
        return GaussianRule(resolved["amplitude"], resolved["sigma"], center=resolved["center"])
    if kind == "ball":
        return BallIndicator(resolved["center"], resolved["radius"])
    return AnnulusIndicator(resolved["r_inner"], resolved["r_outer"])


def build_profile(resolved):
    kind = resolved["kind"]
    if kind == "constant":
        return ConstantProfile(resolved["level"])
    if kind == "linear":
        return LinearProfile(resolved["rate"])
    if kind == "pulse":
        return PulseProfile(resolved["t_on"], resolved["t_off"], resolved["level"])
    return LogInvSqProfile()


def load_config(path, workflow, seed=0):
    """Parse, validate, and resolve the YAML config for one workflow."""
    if workflow not in WORKFLOWS:
        raise ConfigError(f"unknown workflow {workflow!r}")
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}")
    m = _as_map(raw, "<root>")
    version = _as_int(_pop(m, "schema", "<root>"), "schema")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"key 'schema': expected {SCHEMA_VERSION}, got {version}")
    declared = _as_str(_pop(m, "workflow", "<root>"), "workflow", choices=WORKFLOWS)
    if declared != workflow:
        raise ConfigError(
            f"key 'workflow': config declares {declared!r} but the subcommand is {workflow!r}"
        )
    resolved = {"schema": version, "workflow": declared}
    resolved["seed"] = _as_int(_pop(m, "seed", "<root>", seed), "seed")
    output = _pop(m, "output", "<root>", None)
    resolved["output"] = None if output is None else _as_str(output, "output")
    threads = _pop(m, "threads", "<root>", None)
    resolved["threads"] = None if threads is None else _as_int(threads, "threads")

    blocks = _BLOCKS_BY_WORKFLOW[workflow]
    if "kernel" in blocks:
        resolved["kernel"] = _kernel_block(_pop(m, "kernel", "<root>"), "kernel", resolved["seed"])
        d = resolved["kernel"]["d"]
        resolved["grid"] = _grid_block(_pop(m, "grid", "<root>"), "grid")
        resolved["scenario"] = _scenario_block(_pop(m, "scenario", "<root>"), "scenario", d)
    if "measurement" in blocks:
        resolved["measurement"] = _measurement_block(_pop(m, "measurement", "<root>"),
                                                     "measurement", d)
    if "diagnostics" in blocks:
        diag = _as_map(m.pop("diagnostics", None), "diagnostics")
        resolved["diagnostics"] = {
            "heat_oracle": _as_bool(_pop(diag, "heat_oracle", "diagnostics", False),
                                    "diagnostics.heat_oracle"),
        }
        _finish(diag, "diagnostics")
    if "sweep" in blocks:
        resolved["sweep"] = _sweep_block(_pop(m, "sweep", "<root>"), "sweep", resolved["seed"])
    if "counterexample" in blocks:
        resolved["counterexample"] = _counterexample_block(
            m.pop("counterexample", None), "counterexample"
        )
    if "axes" in blocks:
        resolved["axes"] = _axes_block(m.pop("axes", None), "axes")
    _finish(m, "<root>")
    return ExperimentConfig(workflow=workflow, resolved=resolved)


def dump_resolved(cfg, extra=None):
    """YAML text of the resolved config, with run-time context folded in."""
    doc = dict(cfg.resolved)
    if extra:
        doc.update(extra)
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)
