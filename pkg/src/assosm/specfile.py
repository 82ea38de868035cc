"""Flat key = value spec files (INI sections) describing an experiment."""

from __future__ import annotations

import configparser
from dataclasses import replace

import numpy as np

from .data import ExperimentConfig
from .errors import UsageError
from .harness import ControllerParams, ExperimentSpec, benchmark_spec

_EXPR_GLOBALS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": abs,
    "sign": np.sign, "pi": np.pi,
}


def input_expression(expr: str):
    """Compile an input expression of t and x1..x9 into a (t, x) callable."""
    code = compile(expr, "<input>", "eval")
    for name in code.co_names:
        if name not in _EXPR_GLOBALS and name != "t" and not (
            name.startswith("x") and name[1:].isdigit()
        ):
            raise UsageError(f"unknown name {name!r} in input expression {expr!r}")

    def fn(t, x):
        loc = {"t": t}
        for i, v in enumerate(x):
            loc[f"x{i + 1}"] = v
        return float(eval(code, {"__builtins__": {}, **_EXPR_GLOBALS}, loc))

    return fn


def _vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def load_spec(path: str) -> ExperimentSpec:
    """Read an experiment spec file; benchmark defaults apply underneath."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read spec file {path}")

    exp = cp["experiment"] if cp.has_section("experiment") else {}
    bench = exp.get("benchmark")
    seed = int(exp.get("seed", 1))
    if bench:
        spec = benchmark_spec(bench, seed=seed)
    else:
        raise UsageError("spec file must name a benchmark (user plants are "
                         "supplied programmatically)")

    if cp.has_section("collect"):
        sec = cp["collect"]
        cfg = spec.collect_config
        kwargs = {}
        if "t0" in sec:
            kwargs["t0"] = sec.getfloat("t0")
        if "tau" in sec:
            kwargs["tau"] = sec.getfloat("tau")
        if "samples" in sec:
            kwargs["T"] = sec.getint("samples")
        if "noise_halfwidth" in sec:
            kwargs["noise_halfwidth"] = sec.getfloat("noise_halfwidth")
        if "derivative_mode" in sec:
            kwargs["derivative_mode"] = sec.get("derivative_mode")
        if "sim_dt" in sec:
            kwargs["sim_dt"] = sec.getfloat("sim_dt")
        if "input" in sec:
            kwargs["input_source"] = input_expression(sec.get("input"))
        cfg = replace(cfg, **kwargs)
        spec = replace(spec, collect_config=cfg)
        if "x0" in sec:
            spec = replace(spec, collect_x0=_vector(sec.get("x0")))

    if cp.has_section("controller"):
        sec = cp["controller"]
        ctrl = spec.controller
        kwargs = {}
        for key, attr in (("l", "L"), ("eta1", "eta1"), ("eta2", "eta2"),
                          ("upsilon0", "upsilon0"), ("warmup", "warmup"),
                          ("sigma_tol", "sigma_tol")):
            if key in sec:
                kwargs[attr] = sec.getfloat(key)
        spec = replace(spec, controller=replace(ctrl, **kwargs))

    if cp.has_section("simulate"):
        sec = cp["simulate"]
        if "x0" in sec:
            spec = replace(spec, sim_x0=_vector(sec.get("x0")))
        if "horizon" in sec:
            spec = replace(spec, sim_horizon=sec.getfloat("horizon"))
        if "dt" in sec:
            spec = replace(spec, sim_dt=sec.getfloat("dt"))

    return replace(spec, seed=seed)
