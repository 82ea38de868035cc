"""Virtual-controller synthesis from data via an LMI feasibility SDP.

The decision variables are a feedback row K, a symmetric Q > 0, a decay
margin kappa1 > 0 and an S-procedure multiplier kappa2 >= 0.  Feasibility
yields the virtual law phi(xr) = K P xr with P = Q^{-1} and the sliding
variable sigma = xn - K P xr.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np

from .data import NoiseBound, numerical_rank, verify_noise_energy
from .errors import ConfigurationError, DesignInfeasibleError, RankError
from .plant import PlantModel

EPS_PD_DEFAULT = 1e-6
LMI_MARGIN = 1e-6       # enforced slack so the returned point is strictly interior
KAPPA2_CAP = 1e6


@dataclass(frozen=True)
class DesignProblem:
    O1: np.ndarray
    O2: np.ndarray
    O1plus: np.ndarray
    noise_bound: NoiseBound
    eps_pd: float = EPS_PD_DEFAULT

    def __post_init__(self):
        O1 = np.atleast_2d(np.asarray(self.O1, dtype=float))
        O2 = np.atleast_2d(np.asarray(self.O2, dtype=float))
        O1p = np.atleast_2d(np.asarray(self.O1plus, dtype=float))
        if not (O1.shape[1] == O2.shape[1] == O1p.shape[1]):
            raise ConfigurationError("data matrices must share a column count")
        if O1p.shape[0] != O1.shape[0] or O2.shape[0] != 1:
            raise ConfigurationError("inconsistent data matrix row counts")
        if self.eps_pd <= 0:
            raise ConfigurationError("eps_pd must be positive")
        object.__setattr__(self, "O1", O1)
        object.__setattr__(self, "O2", O2)
        object.__setattr__(self, "O1plus", O1p)

    @property
    def n(self) -> int:
        return self.O1.shape[0] + 1

    @classmethod
    def from_dataset(cls, ds, noise_bound: NoiseBound, eps_pd: float = EPS_PD_DEFAULT):
        view = ds.design_view() if hasattr(ds, "design_view") else ds
        return cls(view.O1, view.O2, view.O1plus, noise_bound, eps_pd)


@dataclass(frozen=True)
class DesignSolution:
    K_row: np.ndarray       # (1, n-1)
    Q_mat: np.ndarray       # (n-1, n-1) > 0
    P_mat: np.ndarray       # Q^{-1}
    kappa1: float
    kappa2: float
    eps_pd: float = EPS_PD_DEFAULT
    solver_status: str = "optimal"

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K_row, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q_mat, dtype=float))
        P = np.atleast_2d(np.asarray(self.P_mat, dtype=float))
        if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() <= 0:
            raise ConfigurationError("Q must be positive definite")
        if np.abs(P @ Q - np.eye(Q.shape[0])).max() > 1e-8:
            raise ConfigurationError("P must be the inverse of Q")
        if self.kappa1 < self.eps_pd or self.kappa2 < 0:
            raise ConfigurationError("kappa1 >= eps_pd and kappa2 >= 0 required")
        object.__setattr__(self, "K_row", K)
        object.__setattr__(self, "Q_mat", Q)
        object.__setattr__(self, "P_mat", P)

    @property
    def KP(self) -> np.ndarray:
        return self.K_row @ self.P_mat


@dataclass(frozen=True)
class SlidingVariableSpec:
    coeff_r: np.ndarray     # (n-1,), sigma = xn + coeff_r . xr

    def evaluate(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(x[-1] + self.coeff_r @ x[:-1])


def build_G(O1: np.ndarray, O2: np.ndarray) -> np.ndarray:
    """Stack the virtual-input row O2 above the upper-state rows O1."""
    O1 = np.atleast_2d(np.asarray(O1, dtype=float))
    O2 = np.atleast_2d(np.asarray(O2, dtype=float))
    if O1.shape[1] != O2.shape[1]:
        raise ConfigurationError("O1 and O2 must share a column count")
    return np.vstack([O2, O1])


def assemble_lmi(problem: DesignProblem, K, Q, kappa1: float, kappa2: float):
    """Numeric value of the (2n-1) x (2n-1) design LMI block matrix."""
    if kappa1 <= 0 or kappa2 < 0:
        raise ConfigurationError("kappa1 > 0 and kappa2 >= 0 required")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m = problem.n - 1
    if K.shape != (1, m) or Q.shape != (m, m):
        raise ConfigurationError("K must be 1 x (n-1) and Q (n-1) x (n-1)")
    O1p = problem.O1plus
    gg = problem.noise_bound.gamma_gram
    G = build_G(problem.O1, problem.O2)
    KQ = np.vstack([K, Q])
    TL = kappa1 * np.eye(m) - kappa2 * (O1p @ O1p.T - gg)
    TR = KQ.T + kappa2 * O1p @ G.T
    return np.block([[TL, TR], [TR.T, -kappa2 * (G @ G.T)]])


def _pick_solver():
    installed = cp.installed_solvers()
    for name in ("CLARABEL", "MOSEK", "SCS", "CVXOPT"):
        if name in installed:
            return name
    return None


def solve_design(problem: DesignProblem) -> DesignSolution:
    """Solve the design SDP, maximizing the decay margin kappa1.

    Raises RankError when the Gram matrix G G^T is singular (the rank
    condition fails) and DesignInfeasibleError when the SDP has no solution.
    """
    m = problem.n - 1
    G = build_G(problem.O1, problem.O2)
    if numerical_rank(G) < problem.n:
        raise RankError(
            f"[O1; O2] has numerical rank {numerical_rank(G)} < {problem.n}; "
            "the data does not satisfy the rank condition"
        )

    O1p = problem.O1plus
    gg = problem.noise_bound.gamma_gram
    GGt = G @ G.T
    eps = problem.eps_pd

    K = cp.Variable((1, m))
    Q = cp.Variable((m, m), symmetric=True)
    k1 = cp.Variable(nonneg=True)
    k2 = cp.Variable(nonneg=True)

    TL = k1 * np.eye(m) - k2 * (O1p @ O1p.T - gg)
    TR = cp.vstack([K, Q]).T + k2 * (O1p @ G.T)
    M = cp.bmat([[TL, TR], [TR.T, -k2 * GGt]])
    dim = 2 * problem.n - 1

    constraints = [
        M + LMI_MARGIN * np.eye(dim) << 0,
        Q - eps * np.eye(m) >> 0,
        # the feasible set is a cone (scaling K, Q, kappa1, kappa2 jointly
        # preserves the LMI); pin the scale so kappa1 is a real decay margin
        cp.trace(Q) == float(m),
        k1 >= eps,
        k1 <= 1.0,
        k2 <= KAPPA2_CAP,
    ]
    # tiny penalty breaking the remaining flat directions
    reg = 1e-4 * (k2 + cp.norm(K, "fro"))
    prob = cp.Problem(cp.Maximize(k1 - reg), constraints)
    solver = _pick_solver()
    try:
        prob.solve(solver=solver)
    except cp.error.SolverError as exc:
        raise DesignInfeasibleError(f"solver failure: {exc}", solver_status="error")
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise DesignInfeasibleError(
            f"design SDP is {prob.status}", solver_status=prob.status
        )

    Qv = 0.5 * (Q.value + Q.value.T)
    sol = DesignSolution(
        K_row=K.value,
        Q_mat=Qv,
        P_mat=np.linalg.inv(Qv),
        kappa1=max(float(k1.value), eps),
        kappa2=max(float(k2.value), 0.0),
        eps_pd=eps,
        solver_status=prob.status,
    )
    if sol.kappa2 > 0.99 * KAPPA2_CAP:
        import warnings

        warnings.warn("kappa2 is at its conditioning cap; solution may be fragile")
    return sol


def sliding_variable(solution: DesignSolution) -> SlidingVariableSpec:
    """sigma = xn - K P xr, i.e. coeff_r = -(K P)."""
    return SlidingVariableSpec(coeff_r=(-solution.KP).reshape(-1))


def certificate_blocks(problem: DesignProblem, solution: DesignSolution):
    """Proof-side quadratic forms: Xi1 (Lyapunov block) and Xi2 (data block)."""
    m = problem.n - 1
    KQ = np.vstack([solution.K_row, solution.Q_mat])   # Q = P^{-1}
    Xi1 = np.block(
        [[solution.kappa1 * np.eye(m), KQ.T], [KQ, np.zeros((m + 1, m + 1))]]
    )
    O1p = problem.O1plus
    gg = problem.noise_bound.gamma_gram
    G = build_G(problem.O1, problem.O2)
    Xi2 = np.block(
        [[O1p @ O1p.T - gg, -O1p @ G.T], [-G @ O1p.T, G @ G.T]]
    )
    return Xi1, Xi2


def verify_certificate(
    problem: DesignProblem,
    solution: DesignSolution,
    oracle_plant: Optional[PlantModel] = None,
    realized_noise: Optional[np.ndarray] = None,
    n_states: int = 1000,
    tol: float = 1e-8,
    seed: int = 0,
) -> dict:
    """Re-derive and check the S-procedure certificate.

    Always checks Xi1 - kappa2 Xi2 <= 0.  With an oracle plant, also checks
    the Lyapunov decrease against the true upper dynamics at random states,
    and (if given) that the realized noise satisfies its quadratic bound.
    Returns a report dict; ``ok`` is the conjunction of all checks.
    """
    report = {"checks": {}, "ok": True}

    Xi1, Xi2 = certificate_blocks(problem, solution)
    cert = Xi1 - solution.kappa2 * Xi2
    lam = float(np.linalg.eigvalsh(cert).max())
    report["checks"]["certificate"] = {"max_eig": lam, "ok": lam <= tol}

    if realized_noise is not None:
        ok_psi = verify_noise_energy(realized_noise, problem.noise_bound)
        report["checks"]["noise_energy"] = {"ok": ok_psi}

    if oracle_plant is not None:
        rng = np.random.default_rng(seed)
        m = problem.n - 1
        P = solution.P_mat
        KP = solution.KP

        # the oracle knows S = [a A], so the noise hidden in the derivative
        # data is recoverable; informational only, since externally supplied
        # data may carry a noise realization outside the declared bound while
        # the certificate itself still holds
        S = np.hstack([oracle_plant.a_col.reshape(-1, 1), oracle_plant.A_upper])
        G = build_G(problem.O1, problem.O2)
        psi_implied = problem.O1plus - S @ G
        ok_implied = verify_noise_energy(psi_implied, problem.noise_bound)
        report["info"] = {
            "noise_energy_oracle": {
                "ok": ok_implied,
                "energy_max_eig": float(
                    np.linalg.eigvalsh(psi_implied @ psi_implied.T).max()
                ),
            }
        }
        Acl = oracle_plant.A_upper + np.outer(oracle_plant.a_col, KP.reshape(-1))
        W = P @ Acl + Acl.T @ P + solution.kappa1 * (P @ P)
        worst = -np.inf
        worst_x = None
        for _ in range(n_states):
            x = rng.standard_normal(m)
            val = float(x @ W @ x) / max(float(x @ x), 1e-300)
            if val > worst:
                worst, worst_x = val, x
        report["checks"]["lyapunov_decrease"] = {
            "worst_normalized": worst,
            "worst_state": worst_x,
            "ok": worst <= tol,
        }
        report["closed_loop_eigs"] = np.linalg.eigvals(Acl)

    report["ok"] = all(c["ok"] for c in report["checks"].values())
    return report


@dataclass(frozen=True)
class ClassicalResult:
    feasible: bool
    K_full: Optional[np.ndarray]       # (1, n)
    rank_condition_holds: bool
    rank_full: int
    warning: Optional[str] = None


def classical_design(ds, eps: float = 1e-6) -> ClassicalResult:
    """The comparison design needing full-state derivative and input data.

    Solves X1 Qc + Qc^T X1^T < 0, X0 Qc > 0 for Qc, then returns the
    feedback K = I Qc (X0 Qc)^{-1}.  When the input was itself a feedback of
    the state data, the returned K degenerates to that collection feedback,
    which is detected and flagged.
    """
    if ds.O2plus is None:
        raise ConfigurationError("classical design requires full-state derivatives")
    X1 = np.vstack([ds.O1plus, ds.O2plus])
    X0 = np.vstack([ds.O1, ds.O2])
    U0 = np.atleast_2d(ds.I_mat)
    n, T = X0.shape

    from .data import rank_check

    rc = rank_check(ds)
    rank_ok = bool(rc["classical"])
    warning = None
    if T < n + 1:
        warning = f"only {T} samples; rank {n + 1} condition cannot hold"
    elif not rank_ok:
        warning = (
            f"rank([O1; O2; I]) = {rc['rank_full']} < {n + 1}; "
            "result may be degenerate"
        )

    Qc = cp.Variable((T, n))
    constraints = [
        X1 @ Qc + Qc.T @ X1.T << -eps * np.eye(n),
        X0 @ Qc == (X0 @ Qc).T,
        X0 @ Qc >> eps * np.eye(n),
    ]
    prob = cp.Problem(cp.Minimize(0), constraints)
    try:
        prob.solve(solver=_pick_solver())
    except cp.error.SolverError:
        return ClassicalResult(False, None, rank_ok, rc["rank_full"] or 0, warning)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return ClassicalResult(False, None, rank_ok, rc["rank_full"] or 0, warning)

    X0Q = X0 @ Qc.value
    K_full = U0 @ Qc.value @ np.linalg.inv(X0Q)

    # the feedback-dependent-input degeneracy: K collapses to F with U0 = F X0
    F, *_ = np.linalg.lstsq(X0.T, U0.T, rcond=None)
    if np.linalg.norm(U0 - F.T @ X0) < 1e-8 * max(np.linalg.norm(U0), 1.0):
        if np.linalg.norm(K_full - F.T) < 1e-6 * max(np.linalg.norm(F), 1.0):
            warning = (
                (warning + "; " if warning else "")
                + "input was a feedback of the state data: the returned gain "
                "is the collection feedback itself"
            )
    return ClassicalResult(True, K_full, rank_ok, rc["rank_full"] or 0, warning)


# ---------------------------------------------------------------------------
# key = value serialization

def save_solution(sol: DesignSolution, path: str):
    m = sol.K_row.shape[1]
    with open(path, "w") as fh:
        fh.write(f"n_r = {m}\n")
        fh.write("K = " + " ".join("%.17g" % v for v in sol.K_row.ravel()) + "\n")
        fh.write("Q = " + " ".join("%.17g" % v for v in sol.Q_mat.ravel()) + "\n")
        fh.write("P = " + " ".join("%.17g" % v for v in sol.P_mat.ravel()) + "\n")
        fh.write(f"kappa1 = %.17g\n" % sol.kappa1)
        fh.write(f"kappa2 = %.17g\n" % sol.kappa2)
        fh.write(f"eps_pd = %.17g\n" % sol.eps_pd)
        fh.write(f"status = {sol.solver_status}\n")


def load_solution(path: str) -> DesignSolution:
    vals = {}
    with open(path) as fh:
        for line in fh:
            if "=" not in line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            vals[key] = val
    m = int(vals["n_r"])
    K = np.fromstring(vals["K"], sep=" ").reshape(1, m)
    Q = np.fromstring(vals["Q"], sep=" ").reshape(m, m)
    P = np.fromstring(vals["P"], sep=" ").reshape(m, m)
    return DesignSolution(
        K_row=K,
        Q_mat=Q,
        P_mat=P,
        kappa1=float(vals["kappa1"]),
        kappa2=float(vals["kappa2"]),
        eps_pd=float(vals["eps_pd"]),
        solver_status=vals.get("status", "optimal"),
    )
