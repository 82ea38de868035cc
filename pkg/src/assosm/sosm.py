"""ASSOSM runtime: robust differentiator, extremum detection, adaptive
amplitude and the integrated continuous control input.

All controller states advance by explicit Euler at the loop step; the
discontinuous sign terms rule out higher-order schemes here.  sign(0) = 0
throughout, so no direction is preferred on the switching surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .plant import DisturbanceSignal, PlantModel, f_jacobian


def _sign(v: float) -> float:
    return (v > 0.0) - (v < 0.0)


@dataclass(frozen=True)
class DifferentiatorState:
    """First-order robust exact differentiator state."""

    s1_hat: float
    s2_hat: float
    L_param: float

    def __post_init__(self):
        if self.L_param <= 0:
            raise ConfigurationError("differentiator gain L must be positive")

    @property
    def mu0(self) -> float:
        return 1.5 * math.sqrt(self.L_param)

    @property
    def mu1(self) -> float:
        return 1.1 * self.L_param


def differentiator_step(
    state: DifferentiatorState, s1_measured: float, dt: float
) -> DifferentiatorState:
    """Euler-advance the differentiator against the measured signal."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    e = state.s1_hat - s1_measured
    s1_dot = -state.mu0 * math.sqrt(abs(e)) * _sign(e) + state.s2_hat
    # Discontinuous channel: inside the one-step boundary layer |e| < mu1*dt^2
    # the discrete sign would flip every step and leave a limit cycle of
    # amplitude ~mu1*dt in s2_hat; the linear selection below is the implicit-
    # Euler resolution of the set-valued sign (it shrinks with dt, so the
    # continuous-time law is unchanged) and removes that numerical chatter.
    layer = state.mu1 * dt * dt
    sel = e / layer if abs(e) < layer else _sign(e)
    s2_dot = -state.mu1 * sel
    return replace(
        state, s1_hat=state.s1_hat + dt * s1_dot, s2_hat=state.s2_hat + dt * s2_dot
    )


def extremum_detect(
    prev_s2_sign: float, s2_hat: float, s1_current: float
) -> Optional[float]:
    """Return s1_current as the new stored extremum on a strict sign flip
    of the estimated derivative, otherwise None."""
    new_sign = _sign(s2_hat)
    if prev_s2_sign > 0 and new_sign < 0:
        return s1_current
    if prev_s2_sign < 0 and new_sign > 0:
        return s1_current
    return None


@dataclass(frozen=True)
class AdaptiveGainState:
    upsilon: float
    eta1: float
    eta2: float
    theta: float        # reference magnitude: the stored extremum
    s1_max: float       # most recent extremal value of the sliding variable

    def __post_init__(self):
        if self.upsilon < 0 or self.eta1 <= 0 or self.eta2 <= 0:
            raise ConfigurationError("upsilon >= 0 and eta1, eta2 > 0 required")


def adaptive_gain_step(
    state: AdaptiveGainState, s1: float, s2_hat: float, dt: float
) -> AdaptiveGainState:
    """Grow the amplitude while |s1| exceeds |theta|; otherwise hold it."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if abs(s1) > abs(state.theta):
        up = state.upsilon + dt * (state.eta1 * abs(s1) + state.eta2 * abs(s2_hat))
        return replace(state, upsilon=up)
    return state


@dataclass(frozen=True)
class SosmState:
    diff: DifferentiatorState
    gain: AdaptiveGainState
    u_integrated: float
    nu_last: float
    prev_s2_sign: float

    @classmethod
    def initial(
        cls,
        s1_0: float,
        L_param: float,
        eta1: float,
        eta2: float,
        upsilon0: float,
        u0: float = 0.0,
    ) -> "SosmState":
        """Start with the extremum reference seeded from the initial sliding
        value; adaptation is live as soon as |s1| moves away from it."""
        return cls(
            diff=DifferentiatorState(s1_hat=s1_0, s2_hat=0.0, L_param=L_param),
            gain=AdaptiveGainState(
                upsilon=upsilon0, eta1=eta1, eta2=eta2, theta=abs(s1_0), s1_max=s1_0
            ),
            u_integrated=u0,
            nu_last=0.0,
            prev_s2_sign=0.0,
        )


def control_step(state: SosmState, s1: float, dt: float):
    """One full controller update: differentiate, detect extrema, adapt the
    amplitude, switch, and integrate the continuous input.

    Returns (nu, u, new_state).
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    diff = differentiator_step(state.diff, s1, dt)

    gain = state.gain
    new_max = extremum_detect(state.prev_s2_sign, diff.s2_hat, s1)
    if new_max is not None:
        gain = replace(gain, s1_max=new_max, theta=new_max)
    gain = adaptive_gain_step(gain, s1, diff.s2_hat, dt)

    nu = -gain.upsilon * _sign(s1 - 0.5 * gain.s1_max)
    u = state.u_integrated + nu * dt
    sign_now = _sign(diff.s2_hat)
    new_state = SosmState(
        diff=diff,
        gain=gain,
        u_integrated=u,
        nu_last=nu,
        prev_s2_sign=sign_now if sign_now != 0.0 else state.prev_s2_sign,
    )
    return nu, u, new_state


def aux_oracle_eval(
    plant: PlantModel,
    design,
    x: np.ndarray,
    u: float,
    d: float,
    d_dot: float,
):
    """Evaluate the hidden drift and gain of the auxiliary dynamics.

    Diagnostics only: the controller never reads these.  Returns
    (Delta, Lambda) with Lambda = b and Delta the full drift of the second
    auxiliary state, using a central-difference gradient of f.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    xr, xn = x[:-1], x[-1]
    A, a, b = plant.A_upper, plant.a_col, plant.b_gain
    KP = np.asarray(design.KP).reshape(-1)
    f_val = plant.f_fn(x)
    xdot = np.concatenate([A @ xr + a * xn, [f_val + b * u + d]])
    grad = f_jacobian(plant, x)
    delta = (
        float(grad @ xdot)
        + d_dot
        - float(KP @ (A @ (A @ xr + a * xn)))
        - float(KP @ a) * (f_val + b * u + d)
    )
    return delta, b


def nonadaptive_threshold(delta_bar: float, lam_lo: float, lam_hi: float) -> float:
    """Classical fixed-amplitude requirement max{D/L_lo, 4D/(3L_lo - L_hi)}."""
    denom = 3.0 * lam_lo - lam_hi
    terms = [delta_bar / lam_lo]
    if denom > 0:
        terms.append(4.0 * delta_bar / denom)
    else:
        terms.append(math.inf)
    return max(terms)
