"""Finite-time data collection and the six sampled data matrices.

A single experiment yields input samples I_mat, state samples O1 / O2,
measured upper-state derivatives O1plus (noisy), and the simulator-only
disturbance samples D_mat and realized noise Psi.  The design stage must
only ever touch the design-visible view.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CollectionError, ConfigurationError, UsageError
from .plant import DisturbanceSignal, PlantModel, integrate, plant_derivative

FORWARD_DIFFERENCE = "forward-difference"
EXACT_PLUS_NOISE = "exact-plus-noise"


@dataclass(frozen=True)
class ExperimentConfig:
    t0: float
    tau: float
    T: int
    input_source: Optional[Callable] = None
    noise_halfwidth: Optional[float] = None   # uniform per-component range, None = no noise
    derivative_mode: str = FORWARD_DIFFERENCE
    seed: int = 0
    sim_dt: float = 1e-4

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigurationError("sampling time tau must be positive")
        if self.T < 1:
            raise ConfigurationError("sample count T must be >= 1")
        if self.derivative_mode not in (FORWARD_DIFFERENCE, EXACT_PLUS_NOISE):
            raise ConfigurationError(
                f"unknown derivative mode {self.derivative_mode!r}"
            )
        if self.noise_halfwidth is not None and self.noise_halfwidth < 0:
            raise ConfigurationError("noise halfwidth must be nonnegative")

    def min_samples(self, n: int) -> int:
        """Minimum sample count for the state-data rank condition."""
        return 2 * n - 1


@dataclass(frozen=True)
class NoiseBound:
    gamma_gram: np.ndarray    # (n-1, n-1) PSD, value of gamma gamma^T
    psi_bar: float            # per-sample squared-norm bound

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.gamma_gram, dtype=float))
        if not np.allclose(G, G.T):
            raise ConfigurationError("gamma_gram must be symmetric")
        if np.linalg.eigvalsh(G).min() < -1e-10:
            raise ConfigurationError("gamma_gram must be PSD")
        object.__setattr__(self, "gamma_gram", G)


@dataclass(frozen=True)
class DesignView:
    """The slice of an experiment the designer is allowed to see."""

    O1: np.ndarray
    O2: np.ndarray
    O1plus: np.ndarray


@dataclass(frozen=True)
class DataSet:
    I_mat: np.ndarray      # (1, T)
    O1: np.ndarray         # (n-1, T)
    O2: np.ndarray         # (1, T)
    O1plus: np.ndarray     # (n-1, T) measured noisy derivatives
    D_mat: np.ndarray      # (1, T) simulator-only
    Psi: np.ndarray        # (n-1, T) simulator-only realized noise
    O2plus: Optional[np.ndarray] = None   # (1, T), only the classical comparison uses it
    meta: Optional[dict] = None

    def __post_init__(self):
        T = self.O1.shape[1]
        for name in ("I_mat", "O2", "O1plus", "D_mat", "Psi"):
            if getattr(self, name).shape[1] != T:
                raise ConfigurationError(f"{name} must have {T} columns")
        if self.O2plus is not None and self.O2plus.shape[1] != T:
            raise ConfigurationError(f"O2plus must have {T} columns")

    @property
    def T(self) -> int:
        return self.O1.shape[1]

    @property
    def n(self) -> int:
        return self.O1.shape[0] + 1

    def design_view(self) -> DesignView:
        return DesignView(self.O1.copy(), self.O2.copy(), self.O1plus.copy())


def forward_difference(states: np.ndarray, tau: float) -> np.ndarray:
    """Column-wise forward differences: (x[:, k+1] - x[:, k]) / tau."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if tau <= 0:
        raise UsageError("tau must be positive")
    if states.shape[1] < 2:
        raise UsageError("at least two state columns required")
    return np.diff(states, axis=1) / tau


def collect(
    model: PlantModel,
    disturbance: Optional[DisturbanceSignal],
    x0: np.ndarray,
    config: ExperimentConfig,
) -> DataSet:
    """Run the data-collection experiment and assemble the data matrices.

    Samples are taken at t0 + k*tau, k = 0..T-1.  Forward differences need
    the state one sample past the end, so the simulation runs one extra tau.
    In forward-difference mode the realized noise Psi is the difference from
    the true derivative; in exact-plus-noise mode it is a uniform draw.
    """
    rng = np.random.default_rng(config.seed)
    tau, T, m = config.tau, config.T, model.n - 1
    horizon = config.t0 + T * tau   # one extra sample for forward differences
    # run the experiment on a grid that hits every sampling instant exactly
    sub = max(int(round(tau / config.sim_dt)), 1)
    dt = tau / sub
    try:
        traj = integrate(model, x0, config.input_source, disturbance, horizon, dt)
    except Exception as exc:
        if hasattr(exc, "stage_code") and exc.stage_code == 40:
            raise
        raise CollectionError(f"collection experiment failed: {exc}") from exc

    k0 = int(round(config.t0 / dt))
    idx = k0 + sub * np.arange(T + 1)
    xs = traj.x[idx]                     # (T+1, n)
    ts = traj.t[idx]
    us = traj.u[idx]
    ds = traj.d[idx]

    O1 = xs[:T, :-1].T.copy()
    O2 = xs[:T, -1:].T.copy()
    I_mat = us[:T].reshape(1, T).copy()
    D_mat = ds[:T].reshape(1, T).copy()

    deriv_true = np.array(
        [plant_derivative(model, xs[k], us[k], ds[k]) for k in range(T)]
    )                                    # (T, n)
    O1plus_true = deriv_true[:, :-1].T
    O2plus = deriv_true[:, -1:].T.copy()

    if config.derivative_mode == FORWARD_DIFFERENCE:
        O1plus = forward_difference(xs[:, :-1].T, tau)
        Psi = O1plus - O1plus_true
    else:
        h = config.noise_halfwidth or 0.0
        Psi = rng.uniform(-h, h, size=(m, T))
        O1plus = O1plus_true + Psi

    meta = {
        "t0": config.t0,
        "tau": tau,
        "T": T,
        "seed": config.seed,
        "derivative_mode": config.derivative_mode,
        "noise_halfwidth": config.noise_halfwidth,
        "sample_times": ts[:T],
    }
    ds_out = DataSet(I_mat, O1, O2, O1plus, D_mat, Psi, O2plus=O2plus, meta=meta)

    if config.noise_halfwidth is not None:
        bound = noise_bound_uniform(config.noise_halfwidth, m, T)
        if not verify_noise_energy(Psi, bound):
            raise CollectionError(
                "realized noise violates the declared energy bound "
                "(Psi Psi^T is not dominated by gamma gamma^T)"
            )
    return ds_out


def numerical_rank(M: np.ndarray, rel_tol: float = 1e-10) -> int:
    """Rank via singular values above max(dim) * sigma_max * rel_tol."""
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > max(M.shape) * s[0] * rel_tol))


def rank_check(ds) -> dict:
    """Check the state-data rank condition and the classical one.

    ``ours``: rank([O1; O2]) == n (the weak condition the design needs).
    ``classical``: rank([O1; O2; I]) == n + 1 (persistency-of-excitation
    style requirement that feedback-collected data typically violates).
    """
    O1, O2 = np.atleast_2d(ds.O1), np.atleast_2d(ds.O2)
    n = O1.shape[0] + 1
    state_stack = np.vstack([O1, O2])
    r_state = numerical_rank(state_stack)
    out = {
        "ours": r_state == n,
        "rank_state": r_state,
        "n": n,
    }
    I_mat = getattr(ds, "I_mat", None)
    if I_mat is not None:
        full = np.vstack([state_stack, np.atleast_2d(I_mat)])
        r_full = numerical_rank(full)
        out["classical"] = r_full == n + 1
        out["rank_full"] = r_full
    else:
        out["classical"] = None
        out["rank_full"] = None
    return out


def noise_bound_uniform(range_halfwidth: float, n_r: int, T: int) -> NoiseBound:
    """Declared bound for per-component uniform noise in [-h, h].

    Per-sample energy obeys ||psi||^2 <= n_r h^2 =: psi_bar, which gives
    Psi Psi^T <= psi_bar * T * I.
    """
    if range_halfwidth < 0:
        raise UsageError("halfwidth must be nonnegative")
    if n_r < 1 or T < 1:
        raise UsageError("n_r and T must be >= 1")
    psi_bar = n_r * range_halfwidth**2
    return NoiseBound(psi_bar * T * np.eye(n_r), psi_bar)


def verify_noise_energy(Psi: np.ndarray, bound: NoiseBound, tol: float = -1e-10) -> bool:
    """True iff gamma_gram - Psi Psi^T is PSD within eigenvalue tolerance."""
    Psi = np.atleast_2d(Psi)
    if Psi.shape[0] != bound.gamma_gram.shape[0]:
        raise ConfigurationError("noise row count does not match the bound")
    gap = bound.gamma_gram - Psi @ Psi.T
    return bool(np.linalg.eigvalsh(gap).min() >= tol)


# ---------------------------------------------------------------------------
# CSV export / import

_FMT = "%.17g"

_MATRIX_FILES = {
    "I_mat": "I.csv",
    "O1": "O1.csv",
    "O2": "O2.csv",
    "O1plus": "O1plus.csv",
    "D_mat": "D.csv",
    "Psi": "Psi.csv",
    "O2plus": "O2plus.csv",
}


def _write_matrix(path: str, M: np.ndarray):
    with open(path, "w") as fh:
        fh.write(",".join(f"c{j}" for j in range(M.shape[1])) + "\n")
        for row in M:
            fh.write(",".join(_FMT % v for v in row) + "\n")


def _read_matrix(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def save_dataset(ds: DataSet, out_dir: str):
    """One CSV per matrix plus a key = value manifest."""
    os.makedirs(out_dir, exist_ok=True)
    for attr, fname in _MATRIX_FILES.items():
        M = getattr(ds, attr)
        if M is None:
            continue
        _write_matrix(os.path.join(out_dir, fname), M)
    meta = ds.meta or {}
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key in ("t0", "tau", "T", "seed", "derivative_mode", "noise_halfwidth"):
            fh.write(f"{key} = {meta.get(key)}\n")


def load_dataset(in_dir: str) -> DataSet:
    mats = {}
    for attr, fname in _MATRIX_FILES.items():
        path = os.path.join(in_dir, fname)
        mats[attr] = _read_matrix(path) if os.path.exists(path) else None
    meta = {}
    manifest = os.path.join(in_dir, "manifest.txt")
    if os.path.exists(manifest):
        with open(manifest) as fh:
            for line in fh:
                if "=" not in line:
                    continue
                key, val = (s.strip() for s in line.split("=", 1))
                meta[key] = None if val == "None" else val
    for req in ("O1", "O2", "O1plus"):
        if mats[req] is None:
            raise UsageError(f"dataset directory {in_dir} is missing {req}")
    T = mats["O1"].shape[1]
    m = mats["O1"].shape[0]
    if mats["I_mat"] is None:
        mats["I_mat"] = np.zeros((1, T))
    if mats["D_mat"] is None:
        mats["D_mat"] = np.zeros((1, T))
    if mats["Psi"] is None:
        mats["Psi"] = np.zeros((m, T))
    return DataSet(meta=meta, **mats)
