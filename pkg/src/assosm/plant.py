"""Strict-feedback plant models, disturbances and a fixed-step RK4 integrator.

The plant splits into upper dynamics xr_dot = A xr + a xn and a scalar
channel xn_dot = f(x) + b u + d(t).  Everything here is simulator-side:
the design stage only ever sees sampled data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError, DivergenceError, UsageError


@dataclass(frozen=True)
class PlantModel:
    """The hidden true system (A, a, b, f)."""

    n: int
    A_upper: np.ndarray        # (n-1, n-1)
    a_col: np.ndarray          # (n-1,)
    b_gain: float
    f_fn: Callable[[np.ndarray], float]
    betas: Optional[tuple] = None   # optional growth metadata (b1..b4)

    def __post_init__(self):
        m = self.n - 1
        if self.n < 2:
            raise ConfigurationError("state dimension must be >= 2")
        A = np.atleast_2d(np.asarray(self.A_upper, dtype=float))
        a = np.asarray(self.a_col, dtype=float).reshape(-1)
        if A.shape != (m, m) or a.shape != (m,):
            raise ConfigurationError(
                f"A_upper must be {m}x{m} and a_col length {m}, "
                f"got {A.shape} and {a.shape}"
            )
        if not np.any(a):
            raise ConfigurationError("a_col must be nonzero")
        if self.b_gain <= 0:
            raise ConfigurationError("b_gain must be positive")
        if abs(self.f_fn(np.zeros(self.n))) > 1e-12:
            raise ConfigurationError("f_fn(0) must vanish")
        object.__setattr__(self, "A_upper", A)
        object.__setattr__(self, "a_col", a)


@dataclass(frozen=True)
class DisturbanceSignal:
    """Matched disturbance d(t) with simulator-only bound metadata."""

    d_fn: Callable[[float], float]
    d1_bar: float
    d2_bar: float
    d_dot_fn: Optional[Callable[[float], float]] = None

    def d_dot(self, t: float, h: float = 1e-6) -> float:
        if self.d_dot_fn is not None:
            return self.d_dot_fn(t)
        return (self.d_fn(t + h) - self.d_fn(max(t - h, 0.0))) / (
            t + h - max(t - h, 0.0)
        )

    def check_bounds(self, horizon: float, samples: int = 2000) -> bool:
        """Sampled check of |d| < d1_bar and |d_dot| < d2_bar on [0, horizon]."""
        ts = np.linspace(0.0, horizon, samples)
        for t in ts:
            if abs(self.d_fn(t)) >= self.d1_bar:
                return False
            if abs(self.d_dot(t)) >= self.d2_bar:
                return False
        return True


ZERO_DISTURBANCE = DisturbanceSignal(lambda t: 0.0, 1e-9, 1e-9, lambda t: 0.0)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray           # (N,)
    x: np.ndarray           # (N, n)
    u: np.ndarray           # (N,)
    d: np.ndarray           # (N,)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ConfigurationError("time grid must be strictly increasing")
        if self.x.shape[0] != self.t.shape[0]:
            raise ConfigurationError("one state row per grid point required")


def plant_derivative(model: PlantModel, x: np.ndarray, u: float, d: float) -> np.ndarray:
    """Right-hand side [A xr + a xn; f(x) + b u + d]."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.n:
        raise ConfigurationError(f"state must have length {model.n}")
    xr, xn = x[:-1], x[-1]
    out = np.empty(model.n)
    out[:-1] = model.A_upper @ xr + model.a_col * xn
    out[-1] = model.f_fn(x) + model.b_gain * u + d
    return out


def _as_input_fn(input_source) -> Callable[[float, np.ndarray], float]:
    if input_source is None:
        return lambda t, x: 0.0
    if callable(input_source):
        return input_source
    return lambda t, x: float(input_source)


def integrate(
    model: PlantModel,
    x0: np.ndarray,
    input_source,
    disturbance: Optional[DisturbanceSignal],
    horizon: float,
    dt: float,
) -> Trajectory:
    """Fixed-step RK4 simulation with the input held over each step.

    ``input_source`` is a callable (t, x) -> u, a constant, or None; it is
    evaluated once per step (zero-order hold).  The disturbance is evaluated
    at the RK4 stage times since it is an exogenous time signal.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if horizon < dt:
        raise ConfigurationError("horizon must be at least one step")
    dist = disturbance if disturbance is not None else ZERO_DISTURBANCE
    u_fn = _as_input_fn(input_source)
    d_fn = dist.d_fn

    n_steps = int(round(horizon / dt))
    A, a, b, f = model.A_upper, model.a_col, model.b_gain, model.f_fn

    def rhs(t, x, u):
        xr, xn = x[:-1], x[-1]
        out = np.empty(model.n)
        out[:-1] = A @ xr + a * xn
        out[-1] = f(x) + b * u + d_fn(t)
        return out

    ts = np.empty(n_steps + 1)
    xs = np.empty((n_steps + 1, model.n))
    us = np.empty(n_steps + 1)
    ds = np.empty(n_steps + 1)

    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.shape[0] != model.n:
        raise ConfigurationError(f"x0 must have length {model.n}")
    t = 0.0
    for k in range(n_steps + 1):
        u = u_fn(t, x)
        ts[k], xs[k], us[k], ds[k] = t, x, u, d_fn(t)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state diverged at t = {t:.6g}", t_bad=t)
        if k == n_steps:
            break
        x = rk4_step(rhs, t, x, u, dt)
        t += dt
    if not np.all(np.isfinite(xs[-1])):
        raise DivergenceError(f"state diverged at t = {ts[-1]:.6g}", t_bad=ts[-1])
    return Trajectory(ts, xs, us, ds)


def rk4_step(rhs, t, x, u, dt):
    k1 = rhs(t, x, u)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1, u)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2, u)
    k4 = rhs(t + dt, x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def benchmark_plant(bench_id: str):
    """Built-in benchmark plants: pendulum (b1), unstable linear (b2),
    four-state highly nonlinear chain (b3).  Returns (model, disturbance)."""
    if bench_id == "b1":
        model = PlantModel(
            n=2,
            A_upper=np.zeros((1, 1)),
            a_col=np.ones(1),
            b_gain=10.0,
            f_fn=lambda x: -10.0 * np.sin(x[0]) - x[1],
        )
        dist = DisturbanceSignal(
            lambda t: 0.8 * np.sin(2.0 * t) + 0.4,
            d1_bar=1.3,
            d2_bar=1.7,
            d_dot_fn=lambda t: 1.6 * np.cos(2.0 * t),
        )
        return model, dist
    if bench_id == "b2":
        model = PlantModel(
            n=2,
            A_upper=np.zeros((1, 1)),
            a_col=np.ones(1),
            b_gain=1.0,
            f_fn=lambda x: x[0] + x[1],
        )
        dist = DisturbanceSignal(
            np.cos, d1_bar=1.1, d2_bar=1.1, d_dot_fn=lambda t: -np.sin(t)
        )
        return model, dist
    if bench_id == "b3":
        A = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
        model = PlantModel(
            n=4,
            A_upper=A,
            a_col=np.array([0.0, 0.0, 1.0]),
            b_gain=1.0,
            f_fn=lambda x: np.log1p(np.sin(x[0] * x[1]) ** 2)
            + x[2] / (1.0 + x[2] ** 2),
        )
        dist = DisturbanceSignal(
            np.tanh, d1_bar=1.1, d2_bar=1.1, d_dot_fn=lambda t: 1.0 / np.cosh(t) ** 2
        )
        return model, dist
    raise UsageError(f"unknown benchmark id {bench_id!r} (expected b1, b2 or b3)")


def f_jacobian(model: PlantModel, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of f at x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    g = np.empty(model.n)
    for i in range(model.n):
        e = np.zeros(model.n)
        e[i] = h
        g[i] = (model.f_fn(x + e) - model.f_fn(x - e)) / (2.0 * h)
    return g


def _envelope_fit(radii: np.ndarray, values: np.ndarray):
    """Smallest-area linear upper envelope b0 + b1*r >= v over the samples."""
    n = radii.shape[0]
    # minimize b0 + median(r)*b1 subject to b0 + b1 r_i >= v_i, b0, b1 >= 0
    c = np.array([1.0, max(np.median(radii), 1e-12)])
    A_ub = np.column_stack([-np.ones(n), -radii])
    res = linprog(c, A_ub=A_ub, b_ub=-values, bounds=[(0, None), (0, None)])
    if not res.success:
        raise DivergenceError("envelope fit failed: " + res.message)
    return float(res.x[0]), float(res.x[1])


def growth_diagnostic(model: PlantModel, box, samples: int, seed: int = 0) -> dict:
    """Fit linear-growth envelopes for |f| and ||df/dx|| over a state box.

    ``box`` is a sequence of (lo, hi) pairs, one per state component.  The
    report carries fitted (beta1..beta4) plus a degradation flag obtained by
    refitting on the half-radius box: a markedly larger beta2 there signals
    super-linear growth.  Informational only; the true constants are unknown.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != model.n or any(hi < lo for lo, hi in box):
        raise ConfigurationError("box must give a nonempty range per component")
    if samples < 100:
        raise UsageError("at least 100 samples required")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    pts = lo + (hi - lo) * rng.random((samples, model.n))

    radii = np.linalg.norm(pts, axis=1)
    fvals = np.array([model.f_fn(p) for p in pts])
    if not np.all(np.isfinite(fvals)):
        raise DivergenceError("f is not finite on the sampling box")
    gvals = np.array([np.linalg.norm(f_jacobian(model, p)) for p in pts])

    b1, b2 = _envelope_fit(radii, np.abs(fvals))
    b3, b4 = _envelope_fit(radii, gvals)

    # refit on the inner half of the box to spot super-linear growth
    inner = radii <= 0.5 * radii.max()
    flag = None
    if inner.sum() >= 20:
        _, b2_in = _envelope_fit(radii[inner], np.abs(fvals[inner]))
        if b2 > 1.25 * b2_in + 1e-9:
            flag = "linear-growth fit degrades with box radius"
    return {
        "beta1": b1,
        "beta2": b2,
        "beta3": b3,
        "beta4": b4,
        "samples": samples,
        "flag": flag,
    }
