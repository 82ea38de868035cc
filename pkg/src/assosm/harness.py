"""End-to-end orchestration: collect -> design -> verify -> simulate.

Reproduces the three built-in benchmarks, computes run metrics and emits
CSV / figure artifacts.  Each pipeline stage failure carries a stage code
(10 collection, 20 rank, 30 design, 40 divergence) used as the CLI exit
code.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import data as data_mod
from . import design as design_mod
from .data import DataSet, ExperimentConfig, collect, noise_bound_uniform, rank_check
from .design import (
    DesignProblem,
    DesignSolution,
    SlidingVariableSpec,
    sliding_variable,
    solve_design,
    verify_certificate,
)
from .errors import DivergenceError, RankError, UsageError
from .plant import DisturbanceSignal, PlantModel, benchmark_plant, rk4_step
from .sosm import SosmState, aux_oracle_eval, control_step, nonadaptive_threshold


@dataclass(frozen=True)
class ControllerParams:
    L: float = 300.0
    eta1: float = 30.0
    eta2: float = 15.0
    upsilon0: float = 1.0
    warmup: float = 0.0
    sigma_tol: float = 1e-2


@dataclass(frozen=True)
class ExperimentSpec:
    benchmark: Optional[str]
    collect_config: ExperimentConfig
    collect_x0: np.ndarray
    controller: ControllerParams
    sim_x0: np.ndarray
    sim_horizon: float
    sim_dt: float
    seed: int = 0
    model: Optional[PlantModel] = None
    disturbance: Optional[DisturbanceSignal] = None

    def resolve_plant(self):
        if self.model is not None:
            return self.model, self.disturbance
        if self.benchmark is None:
            raise UsageError("spec needs either a benchmark id or a plant")
        return benchmark_plant(self.benchmark)


@dataclass
class RunResult:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    d: np.ndarray
    sigma: np.ndarray
    s2_hat: np.ndarray
    upsilon: np.ndarray
    nu: np.ndarray
    metrics: dict
    dataset: Optional[DataSet] = None
    solution: Optional[DesignSolution] = None
    sliding: Optional[SlidingVariableSpec] = None
    certificate: Optional[dict] = None
    files: list = field(default_factory=list)


def simulate_closed_loop(
    model: PlantModel,
    disturbance: Optional[DisturbanceSignal],
    sliding: SlidingVariableSpec,
    x0: np.ndarray,
    horizon: float,
    dt: float,
    params: ControllerParams,
) -> RunResult:
    """Run the ASSOSM loop against the plant.

    Controller states advance by Euler once per step; the plant advances by
    one RK4 step with the freshly integrated input held constant.
    """
    n = model.n
    coeff = sliding.coeff_r
    A, a, b, f = model.A_upper, model.a_col, model.b_gain, model.f_fn
    d_fn = disturbance.d_fn if disturbance is not None else (lambda t: 0.0)

    def rhs(t, x, u):
        out = np.empty(n)
        out[:-1] = A @ x[:-1] + a * x[-1]
        out[-1] = f(x) + b * u + d_fn(t)
        return out

    steps = int(round(horizon / dt))
    t_hist = np.empty(steps + 1)
    x_hist = np.empty((steps + 1, n))
    u_hist = np.empty(steps + 1)
    d_hist = np.empty(steps + 1)
    sig_hist = np.empty(steps + 1)
    s2_hist = np.empty(steps + 1)
    ups_hist = np.empty(steps + 1)
    nu_hist = np.empty(steps + 1)

    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    sigma0 = sliding.evaluate(x)
    state = SosmState.initial(
        sigma0, params.L, params.eta1, params.eta2, params.upsilon0
    )
    t = 0.0
    for k in range(steps + 1):
        sigma = float(x[-1] + coeff @ x[:-1])
        if not np.isfinite(sigma) or not np.all(np.isfinite(x)):
            raise DivergenceError(f"closed loop diverged at t = {t:.6g}", t_bad=t)
        nu, u, state = control_step(state, sigma, dt)
        if t < params.warmup:
            nu = 0.0
            u = state.u_integrated - state.nu_last * dt
            state = replace(state, u_integrated=u, nu_last=0.0)
        t_hist[k] = t
        x_hist[k] = x
        u_hist[k] = u
        d_hist[k] = d_fn(t)
        sig_hist[k] = sigma
        s2_hist[k] = state.diff.s2_hat
        ups_hist[k] = state.gain.upsilon
        nu_hist[k] = nu
        if k == steps:
            break
        x = rk4_step(rhs, t, x, u, dt)
        t += dt

    m = metrics(t_hist, sig_hist, x_hist, ups_hist, params.sigma_tol)
    return RunResult(
        t_hist, x_hist, u_hist, d_hist, sig_hist, s2_hist, ups_hist, nu_hist, m
    )


def metrics(t: np.ndarray, sigma: np.ndarray, x: np.ndarray, upsilon: np.ndarray,
            sigma_tol: float) -> dict:
    """Reaching time, residual sliding magnitude and final norms.

    reaching_time is the first instant after which |sigma| stays below the
    tolerance until the end of the run (None if it never settles).
    """
    if t.size == 0:
        raise UsageError("empty histories")
    below = np.abs(sigma) < sigma_tol
    # longest all-below suffix
    if below[-1]:
        idx = np.where(~below)[0]
        start = 0 if idx.size == 0 else idx[-1] + 1
        reaching_time = float(t[start])
        max_sigma_after = float(np.abs(sigma[start:]).max()) if start < t.size else 0.0
    else:
        reaching_time = None
        max_sigma_after = None
    return {
        "reaching_time": reaching_time,
        "max_abs_sigma_after_reaching": max_sigma_after,
        "final_state_norm": float(np.linalg.norm(x[-1])),
        "final_gain": float(upsilon[-1]),
        "sigma_tol": sigma_tol,
    }


def run_pipeline(spec: ExperimentSpec, verify: bool = True) -> RunResult:
    """Execute the full data-driven design pipeline for one experiment."""
    model, dist = spec.resolve_plant()
    cfg = replace(spec.collect_config, seed=spec.seed)

    ds = collect(model, dist, spec.collect_x0, cfg)

    rc = rank_check(ds)
    if not rc["ours"]:
        raise RankError(
            f"state-data rank {rc['rank_state']} < {rc['n']}: collected data "
            "cannot support the design"
        )

    if cfg.noise_halfwidth is None:
        raise UsageError("pipeline needs a declared noise halfwidth for the bound")
    bound = noise_bound_uniform(cfg.noise_halfwidth, model.n - 1, cfg.T)
    problem = DesignProblem.from_dataset(ds, bound)
    solution = solve_design(problem)
    sv = sliding_variable(solution)

    cert = None
    if verify:
        cert = verify_certificate(
            problem, solution, oracle_plant=model, realized_noise=ds.Psi,
            seed=spec.seed,
        )

    result = simulate_closed_loop(
        model, dist, sv, spec.sim_x0, spec.sim_horizon, spec.sim_dt, spec.controller
    )
    result.dataset = ds
    result.solution = solution
    result.sliding = sv
    result.certificate = cert
    return result


# ---------------------------------------------------------------------------
# benchmark configurations (published experiment settings)

def benchmark_spec(bench_id: str, seed: int = 1) -> ExperimentSpec:
    """Published data-collection and controller settings per benchmark.

    Benchmarks declare exact derivatives plus uniform noise so the realized
    noise provably satisfies the declared energy bound; forward differences
    stay the default for user experiments.
    """
    if bench_id == "b1":
        return ExperimentSpec(
            benchmark="b1",
            collect_config=ExperimentConfig(
                t0=0.0, tau=0.1, T=3,
                input_source=lambda t, x: 0.1 * np.cos(t),
                noise_halfwidth=0.5,
                derivative_mode=data_mod.EXACT_PLUS_NOISE,
            ),
            collect_x0=np.array([1.0, 1.0]),
            controller=ControllerParams(L=300.0, eta1=30.0, eta2=15.0, upsilon0=1.0),
            sim_x0=np.array([5.0, -5.0]),
            sim_horizon=20.0,
            sim_dt=1e-4,
            seed=seed,
        )
    if bench_id == "b2":
        return ExperimentSpec(
            benchmark="b2",
            collect_config=ExperimentConfig(
                t0=0.0, tau=0.5, T=3,
                input_source=lambda t, x: -2.0 * x[0] - x[1],
                noise_halfwidth=1.0,
                derivative_mode=data_mod.EXACT_PLUS_NOISE,
            ),
            collect_x0=np.array([2.0, 3.0]),
            controller=ControllerParams(L=300.0, eta1=30.0, eta2=15.0, upsilon0=1.0),
            sim_x0=np.array([8.0, -4.0]),
            sim_horizon=20.0,
            sim_dt=1e-4,
            seed=seed,
        )
    if bench_id == "b3":
        return ExperimentSpec(
            benchmark="b3",
            collect_config=ExperimentConfig(
                t0=0.0, tau=0.5, T=15,
                input_source=lambda t, x: -np.sin(t),
                noise_halfwidth=0.1,
                derivative_mode=data_mod.EXACT_PLUS_NOISE,
            ),
            collect_x0=np.array([7.0, -7.0, 3.5, -3.5]),
            controller=ControllerParams(
                L=3e5, eta1=30.0, eta2=15.0, upsilon0=1.0, sigma_tol=1.0
            ),
            sim_x0=np.array([1e5, -1e5, 5e4, -5e4]),
            sim_horizon=10.0,
            sim_dt=1e-5,
            seed=seed,
        )
    raise UsageError(f"unknown benchmark id {bench_id!r}")


def reproduce(bench_id: str, out_dir: str, seed: int = 1) -> RunResult:
    """Run the published benchmark configuration and emit artifacts."""
    from . import plots

    spec = benchmark_spec(bench_id, seed=seed)
    result = run_pipeline(spec)
    os.makedirs(out_dir, exist_ok=True)

    data_dir = os.path.join(out_dir, "dataset")
    data_mod.save_dataset(result.dataset, data_dir)
    result.files.append(data_dir)

    sol_path = os.path.join(out_dir, "solution.txt")
    design_mod.save_solution(result.solution, sol_path)
    result.files.append(sol_path)

    result.files += write_run_csvs(result, out_dir)
    result.files += plots.render_run(result, out_dir)

    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w") as fh:
        fh.write(f"benchmark = {bench_id}\n")
        rc = rank_check(result.dataset)
        fh.write(f"rank_state = {rc['rank_state']} (need {rc['n']})\n")
        fh.write(f"rank_full = {rc['rank_full']} (classical needs {rc['n'] + 1})\n")
        fh.write(f"rank_ours_ok = {rc['ours']}\n")
        fh.write(f"rank_classical_ok = {rc['classical']}\n")
        coeff = result.sliding.coeff_r
        fh.write("sigma_coeff_r = " + " ".join("%.6g" % c for c in coeff) + "\n")
        fh.write(f"kappa1 = {result.solution.kappa1:.6g}\n")
        fh.write(f"kappa2 = {result.solution.kappa2:.6g}\n")
        for key, val in result.metrics.items():
            fh.write(f"{key} = {val}\n")
        if result.certificate is not None:
            fh.write(f"certificate_ok = {result.certificate['ok']}\n")
        if bench_id == "b2":
            cls = design_mod.classical_design(result.dataset)
            fh.write(f"classical_feasible = {cls.feasible}\n")
            fh.write(f"classical_rank_condition = {cls.rank_condition_holds}\n")
            if cls.warning:
                fh.write(f"classical_warning = {cls.warning}\n")
    result.files.append(report_path)
    return result


def write_run_csvs(result: RunResult, out_dir: str, max_rows: int = 20001) -> list:
    """Emit state and sliding-variable histories, decimated to max_rows."""
    os.makedirs(out_dir, exist_ok=True)
    stride = max(1, (result.t.size + max_rows - 1) // max_rows)
    idx = np.arange(0, result.t.size, stride)
    if idx[-1] != result.t.size - 1:
        idx = np.append(idx, result.t.size - 1)
    n = result.x.shape[1]
    fmt = "%.17g"

    states_path = os.path.join(out_dir, "states.csv")
    with open(states_path, "w") as fh:
        fh.write("t," + ",".join(f"x{i + 1}" for i in range(n)) + ",u,d\n")
        for k in idx:
            row = [result.t[k], *result.x[k], result.u[k], result.d[k]]
            fh.write(",".join(fmt % v for v in row) + "\n")

    sliding_path = os.path.join(out_dir, "sliding.csv")
    with open(sliding_path, "w") as fh:
        fh.write("t,sigma,s2_hat,upsilon,nu\n")
        for k in idx:
            row = [result.t[k], result.sigma[k], result.s2_hat[k],
                   result.upsilon[k], result.nu[k]]
            fh.write(",".join(fmt % v for v in row) + "\n")
    return [states_path, sliding_path]


def bound_report(
    plant: PlantModel,
    design: DesignSolution,
    disturbance: DisturbanceSignal,
    box_halfwidth: float,
    u_max: float,
    samples: int = 2000,
    final_gain: Optional[float] = None,
    seed: int = 0,
) -> dict:
    """Monte-Carlo estimate of the drift bound and the non-adaptive
    amplitude threshold it implies; the adaptive final gain (when given) is
    reported side by side with no ordering claim."""
    rng = np.random.default_rng(seed)
    delta_bar = 0.0
    for _ in range(samples):
        x = rng.uniform(-box_halfwidth, box_halfwidth, size=plant.n)
        u = rng.uniform(-u_max, u_max)
        d = rng.uniform(-disturbance.d1_bar, disturbance.d1_bar)
        d_dot = rng.uniform(-disturbance.d2_bar, disturbance.d2_bar)
        delta, _ = aux_oracle_eval(plant, design, x, u, d, d_dot)
        delta_bar = max(delta_bar, abs(delta))
    lam = plant.b_gain
    return {
        "delta_bar": delta_bar,
        "lambda_lo": lam,
        "lambda_hi": lam,
        "threshold": nonadaptive_threshold(delta_bar, lam, lam),
        "final_gain": final_gain,
        "box_halfwidth": box_halfwidth,
        "u_max": u_max,
        "samples": samples,
    }
