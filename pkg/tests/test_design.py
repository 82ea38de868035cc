"""LMI assembly, the design SDP, certificates and the classical comparison."""

import numpy as np
import pytest

from assosm import (
    ConfigurationError,
    DesignInfeasibleError,
    RankError,
    benchmark_plant,
    classical_design,
    collect,
    noise_bound_uniform,
    sliding_variable,
    solve_design,
)
from assosm import fixtures as fx
from assosm.data import EXACT_PLUS_NOISE, ExperimentConfig, NoiseBound
from assosm.design import (
    DesignProblem,
    DesignSolution,
    assemble_lmi,
    build_G,
    certificate_blocks,
    load_solution,
    save_solution,
    verify_certificate,
)


def _b1_published_solution():
    return DesignSolution(
        K_row=fx.B1_K,
        Q_mat=fx.B1_Q,
        P_mat=np.linalg.inv(fx.B1_Q),
        kappa1=fx.B1_KAPPA1,
        kappa2=fx.B1_KAPPA2,
    )


@pytest.fixture(scope="module")
def b3_dataset():
    model, dist = benchmark_plant("b3")
    cfg = ExperimentConfig(
        t0=0.0, tau=0.5, T=15, input_source=lambda t, x: -np.sin(t),
        noise_halfwidth=0.1, derivative_mode=EXACT_PLUS_NOISE, seed=1,
    )
    return collect(model, dist, np.array([7.0, -7.0, 3.5, -3.5]), cfg)


class TestBuildG:
    def test_published_b1_stack(self):
        G = build_G(fx.B1_O1, fx.B1_O2)
        assert np.array_equal(
            G, [[1.0, 0.1857, -0.5515], [1.0, 1.0588, 1.0397]]
        )

    def test_gram_positive_definite(self):
        G = build_G(fx.B1_O1, fx.B1_O2)
        assert np.linalg.eigvalsh(G @ G.T).min() > 0

    def test_column_mismatch(self):
        with pytest.raises(ConfigurationError):
            build_G(np.ones((1, 3)), np.ones((1, 4)))


class TestAssembleLmi:
    def test_zero_kappa2_cannot_be_negative_semidefinite(self, b1_fixture_problem):
        M = assemble_lmi(b1_fixture_problem, fx.B1_K, fx.B1_Q, 0.5, 0.0)
        assert np.linalg.eigvalsh(M).max() > 0

    def test_kappa_validation(self, b1_fixture_problem):
        with pytest.raises(ConfigurationError):
            assemble_lmi(b1_fixture_problem, fx.B1_K, fx.B1_Q, 0.0, 0.1)
        with pytest.raises(ConfigurationError):
            assemble_lmi(b1_fixture_problem, fx.B1_K, fx.B1_Q, 0.1, -0.1)

    def test_shape_validation(self, b1_fixture_problem):
        with pytest.raises(ConfigurationError):
            assemble_lmi(b1_fixture_problem, np.ones((1, 2)), fx.B1_Q, 0.1, 0.1)

    def test_symmetry(self, b2_fixture_problem):
        M = assemble_lmi(b2_fixture_problem, fx.B2_K, fx.B2_Q, 0.2278, 0.0655)
        assert np.allclose(M, M.T)
        assert M.shape == (3, 3)


class TestSolveDesign:
    def test_b1_fixture_data_feasible_and_stabilizing(self, b1_fixture_problem):
        sol = solve_design(b1_fixture_problem)
        # scalar closed loop A + a K P with A = 0, a = 1: needs K P < 0
        assert float(sol.KP[0, 0]) < 0.0
        M = assemble_lmi(b1_fixture_problem, sol.K_row, sol.Q_mat, sol.kappa1, sol.kappa2)
        assert np.linalg.eigvalsh(M).max() <= 1e-8

    def test_b3_published_design_soft_check(self, b3_dataset):
        # published values were fit to the original data; regenerated data
        # should still satisfy the LMI loosely
        problem = DesignProblem.from_dataset(b3_dataset, noise_bound_uniform(0.1, 3, 15))
        Q = np.linalg.inv(fx.B3_P)
        M = assemble_lmi(problem, fx.B3_K, Q, fx.B3_KAPPA1, fx.B3_KAPPA2)
        assert np.linalg.eigvalsh(M).max() <= 5e-2

    def test_unexcited_virtual_input_rejected(self):
        problem_data = dict(
            O1=np.array([[1.0, 2.0, 3.0]]),
            O2=np.zeros((1, 3)),
            O1plus=np.array([[0.5, 0.5, 0.5]]),
            noise_bound=noise_bound_uniform(0.5, 1, 3),
        )
        with pytest.raises((RankError, DesignInfeasibleError)):
            solve_design(DesignProblem(**problem_data))

    def test_solution_invariants(self, b2_fixture_problem):
        sol = solve_design(b2_fixture_problem)
        Q, P = sol.Q_mat, sol.P_mat
        assert np.linalg.eigvalsh(Q).min() > 0
        assert np.linalg.eigvalsh(P).min() > 0
        assert np.abs(P @ Q - np.eye(Q.shape[0])).max() <= 1e-8
        assert sol.kappa1 >= sol.eps_pd and sol.kappa2 >= 0


class TestDesignSolutionValidation:
    def test_q_must_be_positive_definite(self):
        with pytest.raises(ConfigurationError):
            DesignSolution(np.ones((1, 1)), -np.eye(1), -np.eye(1), 0.1, 0.1)

    def test_p_must_invert_q(self):
        with pytest.raises(ConfigurationError):
            DesignSolution(np.ones((1, 1)), 2.0 * np.eye(1), np.eye(1), 0.1, 0.1)

    def test_kappa1_floor(self):
        with pytest.raises(ConfigurationError):
            DesignSolution(np.ones((1, 1)), np.eye(1), np.eye(1), 1e-9, 0.1)


class TestVerifyCertificate:
    def test_published_b1_solution_passes(self, b1_fixture_problem):
        model, _ = benchmark_plant("b1")
        report = verify_certificate(
            b1_fixture_problem, _b1_published_solution(), oracle_plant=model,
            tol=1e-2,   # published values carry 4-decimal rounding
        )
        assert report["checks"]["certificate"]["ok"]
        assert report["checks"]["lyapunov_decrease"]["ok"]
        assert report["ok"]

    def test_zero_kappa2_fails(self, b1_fixture_problem):
        sol = DesignSolution(fx.B1_K, fx.B1_Q, np.linalg.inv(fx.B1_Q), 0.5134, 0.0)
        report = verify_certificate(b1_fixture_problem, sol)
        assert not report["checks"]["certificate"]["ok"]

    def test_perturbed_gain_fails_lyapunov(self, b1_fixture_problem):
        model, _ = benchmark_plant("b1")
        sol = DesignSolution(
            fx.B1_K + 10.0, fx.B1_Q, np.linalg.inv(fx.B1_Q), 0.5134, 0.4990
        )
        report = verify_certificate(b1_fixture_problem, sol, oracle_plant=model)
        assert not report["checks"]["lyapunov_decrease"]["ok"]

    def test_s_procedure_random_directions(self, b1_fixture_problem):
        # z' Xi2 z <= 0 must imply z' Xi1 z <= 0 for the certified multiplier
        sol = solve_design(b1_fixture_problem)
        Xi1, Xi2 = certificate_blocks(b1_fixture_problem, sol)
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 10_000:
            Z = rng.standard_normal((100_000, Xi1.shape[0]))
            inside = Z[np.einsum("ij,jk,ik->i", Z, Xi2, Z) <= 0]
            assert np.all(np.einsum("ij,jk,ik->i", inside, Xi1, inside) <= 1e-8)
            checked += inside.shape[0]


class TestSlidingVariable:
    def test_published_b1_coefficient(self):
        sv = sliding_variable(_b1_published_solution())
        assert sv.coeff_r[0] == pytest.approx(1.0946, abs=5e-4)
        assert sv.evaluate(np.array([1.0, 2.0])) == pytest.approx(2.0 + 1.0946, abs=5e-4)

    def test_zero_gain(self):
        sol = DesignSolution(np.zeros((1, 1)), np.eye(1), np.eye(1), 0.1, 0.1)
        sv = sliding_variable(sol)
        assert sv.coeff_r[0] == 0.0
        assert sv.evaluate(np.array([5.0, -3.0])) == -3.0

    def test_origin_maps_to_zero(self):
        sv = sliding_variable(_b1_published_solution())
        assert sv.evaluate(np.zeros(2)) == 0.0

    def test_scale_equivariance(self):
        base = sliding_variable(_b1_published_solution())
        for c in (0.5, 2.0, 7.0):
            scaled = DesignSolution(
                c * fx.B1_K, c * fx.B1_Q, np.linalg.inv(fx.B1_Q) / c, 0.5134, 0.4990
            )
            assert np.allclose(sliding_variable(scaled).coeff_r, base.coeff_r)


class TestClassicalDesign:
    @staticmethod
    def _feedback_dataset(T, noise=1.0, seed=1):
        model, dist = benchmark_plant("b2")
        cfg = ExperimentConfig(
            t0=0.0, tau=0.5, T=T, input_source=lambda t, x: -2.0 * x[0] - x[1],
            noise_halfwidth=noise, derivative_mode=EXACT_PLUS_NOISE, seed=seed,
        )
        return collect(model, dist, np.array([2.0, 3.0]), cfg)

    def test_feedback_data_degenerates_to_collection_feedback(self):
        res = classical_design(self._feedback_dataset(3))
        assert res.feasible
        assert np.allclose(res.K_full, [[-2.0, -1.0]], atol=1e-6)
        assert not res.rank_condition_holds
        assert "collection feedback" in res.warning
        # ... and that gain does not stabilize the open-loop-unstable plant
        A = np.array([[0.0, 1.0], [1.0, 1.0]])
        eigs = np.linalg.eigvals(A + np.outer([0.0, 1.0], res.K_full.ravel()))
        assert eigs.real.max() > -1e-9

    def test_exciting_input_yields_stabilizing_gain(self):
        model, _ = benchmark_plant("b2")
        rng = np.random.default_rng(7)
        dither = rng.uniform(-1.0, 1.0, 64)

        def u_fn(t, x):
            k = min(int(t / 0.1), dither.size - 1)
            return -3.0 * x[0] - 3.0 * x[1] + dither[k]

        cfg = ExperimentConfig(
            t0=0.0, tau=0.1, T=10, input_source=u_fn,
            derivative_mode=EXACT_PLUS_NOISE, seed=7,
        )
        ds = collect(model, None, np.array([1.0, -0.5]), cfg)
        res = classical_design(ds)
        assert res.feasible and res.rank_condition_holds
        A = np.array([[0.0, 1.0], [1.0, 1.0]])
        eigs = np.linalg.eigvals(A + np.outer([0.0, 1.0], res.K_full.ravel()))
        assert eigs.real.max() < 0.0

    def test_too_few_samples_warns(self):
        res = classical_design(self._feedback_dataset(2))
        assert not res.rank_condition_holds
        assert "samples" in res.warning

    def test_requires_full_state_derivatives(self):
        ds = self._feedback_dataset(3)
        stripped = type(ds)(
            ds.I_mat, ds.O1, ds.O2, ds.O1plus, ds.D_mat, ds.Psi, O2plus=None
        )
        with pytest.raises(ConfigurationError):
            classical_design(stripped)


class TestSolutionIO:
    def test_roundtrip(self, tmp_path, b1_fixture_problem):
        sol = solve_design(b1_fixture_problem)
        path = tmp_path / "solution.txt"
        save_solution(sol, str(path))
        back = load_solution(str(path))
        assert np.array_equal(back.K_row, sol.K_row)
        assert np.array_equal(back.Q_mat, sol.Q_mat)
        assert back.kappa1 == sol.kappa1
        assert back.kappa2 == sol.kappa2
