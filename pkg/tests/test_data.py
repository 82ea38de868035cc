"""Data collection, the sampled matrices, noise accounting and rank checks."""

import numpy as np
import pytest

from assosm import (
    ConfigurationError,
    UsageError,
    benchmark_plant,
    collect,
    forward_difference,
    noise_bound_uniform,
    rank_check,
    verify_noise_energy,
)
from assosm import fixtures as fx
from assosm.data import (
    EXACT_PLUS_NOISE,
    FORWARD_DIFFERENCE,
    DataSet,
    ExperimentConfig,
    NoiseBound,
    load_dataset,
    save_dataset,
)
from assosm.plant import integrate


def _ds_from_rows(O1, O2, I_mat):
    O1 = np.atleast_2d(np.asarray(O1, float))
    O2 = np.atleast_2d(np.asarray(O2, float))
    I_mat = np.atleast_2d(np.asarray(I_mat, float))
    T = O1.shape[1]
    z = np.zeros_like(O1)
    return DataSet(I_mat, O1, O2, z, np.zeros((1, T)), z)


class TestExperimentConfig:
    def test_bad_tau(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(t0=0.0, tau=0.0, T=3)

    def test_bad_sample_count(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(t0=0.0, tau=0.1, T=0)

    def test_bad_mode(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(t0=0.0, tau=0.1, T=3, derivative_mode="spline")

    def test_min_samples(self):
        cfg = ExperimentConfig(t0=0.0, tau=0.1, T=3)
        assert cfg.min_samples(2) == 3
        assert cfg.min_samples(4) == 7


class TestCollect:
    def test_b1_shapes(self):
        model, dist = benchmark_plant("b1")
        cfg = ExperimentConfig(
            t0=0.0, tau=0.1, T=3, input_source=lambda t, x: 0.1 * np.cos(t)
        )
        ds = collect(model, dist, np.array([1.0, 1.0]), cfg)
        assert ds.O1.shape == (1, 3)
        assert ds.O2.shape == (1, 3)
        assert ds.O1plus.shape == (1, 3)
        assert ds.I_mat.shape == (1, 3)
        assert ds.T == 3 and ds.n == 2

    def test_noise_free_exact_mode_matches_linear_dynamics(self):
        # xr_dot = A xr + a xn, so with zero noise O1plus = A O1 + a O2
        model, _ = benchmark_plant("b2")
        cfg = ExperimentConfig(
            t0=0.0, tau=0.5, T=5, input_source=lambda t, x: np.sin(3.0 * t),
            derivative_mode=EXACT_PLUS_NOISE,
        )
        ds = collect(model, None, np.array([1.0, -0.5]), cfg)
        expect = model.A_upper @ ds.O1 + np.outer(model.a_col, ds.O2.ravel())
        assert np.allclose(ds.O1plus, expect, atol=1e-12)
        assert np.allclose(ds.Psi, 0.0)

    def test_feedback_identity(self):
        model, dist = benchmark_plant("b2")
        cfg = ExperimentConfig(
            t0=0.0, tau=0.5, T=3, input_source=lambda t, x: -2.0 * x[0] - x[1]
        )
        ds = collect(model, dist, np.array([2.0, 3.0]), cfg)
        assert np.allclose(
            ds.I_mat, np.array([[-2.0, -1.0]]) @ np.vstack([ds.O1, ds.O2]),
            atol=1e-12,
        )

    def test_forward_difference_noise_taylor_bound(self):
        # |Psi_ik| <= M tau / 2 with M bounding the second state derivative
        model, dist = benchmark_plant("b1")
        tau, T = 0.1, 3
        cfg = ExperimentConfig(
            t0=0.0, tau=tau, T=T, input_source=lambda t, x: 0.1 * np.cos(t),
            derivative_mode=FORWARD_DIFFERENCE,
        )
        ds = collect(model, dist, np.array([1.0, 1.0]), cfg)
        traj = integrate(
            model, np.array([1.0, 1.0]), lambda t, x: 0.1 * np.cos(t), dist,
            (T + 1) * tau, 1e-4,
        )
        # for n = 2, the second derivative of x_r is the x_n channel derivative
        xddot = np.array(
            [
                model.f_fn(traj.x[k]) + model.b_gain * traj.u[k] + traj.d[k]
                for k in range(traj.t.size)
            ]
        )
        M = np.abs(xddot).max()
        assert np.abs(ds.Psi).max() <= 0.5 * M * tau * (1.0 + 1e-3)

    def test_design_view_hides_simulator_fields(self):
        model, dist = benchmark_plant("b1")
        cfg = ExperimentConfig(t0=0.0, tau=0.1, T=3)
        ds = collect(model, dist, np.array([1.0, 1.0]), cfg)
        view = ds.design_view()
        assert not hasattr(view, "D_mat")
        assert not hasattr(view, "Psi")
        assert not hasattr(view, "I_mat")
        assert set(vars(view)) == {"O1", "O2", "O1plus"}


class TestForwardDifference:
    def test_ramp_exact(self):
        states = np.array([[0.0, 0.3, 0.6, 0.9]])
        assert np.allclose(forward_difference(states, 0.3), 1.0)

    def test_quadratic_bias_proportional_to_tau(self):
        tau = 0.1
        ts = np.array([0.0, tau])
        states = (ts**2).reshape(1, -1)
        est = forward_difference(states, tau)
        assert est[0, 0] == pytest.approx(0.1)   # true derivative at t=0 is 0

    def test_constant(self):
        assert np.allclose(forward_difference(np.full((2, 4), 3.0), 0.5), 0.0)

    def test_single_column(self):
        with pytest.raises(UsageError):
            forward_difference(np.ones((1, 1)), 0.1)


class TestRankCheck:
    def test_published_b1_data(self):
        ds = _ds_from_rows(fx.B1_O1, fx.B1_O2, np.ones((1, 3)))
        rc = rank_check(ds)
        assert rc["ours"] and rc["rank_state"] == 2

    def test_feedback_data_fails_classical(self):
        stack = np.vstack([fx.B2_O1, fx.B2_O2])
        I_mat = np.array([[-2.0, -1.0]]) @ stack
        rc = rank_check(_ds_from_rows(fx.B2_O1, fx.B2_O2, I_mat))
        assert rc["ours"] and not rc["classical"]
        assert rc["rank_full"] == 2

    def test_identical_columns(self):
        rc = rank_check(_ds_from_rows(np.ones((1, 3)), np.ones((1, 3)), np.ones((1, 3))))
        assert not rc["ours"]

    def test_invariant_under_input_recombination(self):
        ds = _ds_from_rows(fx.B1_O1, fx.B1_O2, np.array([[1.0, 2.0, 3.0]]))
        base = rank_check(ds)
        mixed = _ds_from_rows(fx.B1_O1, fx.B1_O2, -7.0 * ds.I_mat)
        assert rank_check(mixed)["ours"] == base["ours"]
        assert rank_check(mixed)["rank_state"] == base["rank_state"]


class TestNoiseBound:
    def test_published_values(self):
        assert np.array_equal(noise_bound_uniform(0.5, 1, 3).gamma_gram, [[0.75]])
        assert np.array_equal(noise_bound_uniform(1.0, 1, 3).gamma_gram, [[3.0]])
        assert np.allclose(
            noise_bound_uniform(0.1, 3, 15).gamma_gram, 0.45 * np.eye(3), atol=1e-15
        )

    def test_formula(self):
        b = noise_bound_uniform(0.2, 2, 7)
        assert b.psi_bar == pytest.approx(2 * 0.2**2)
        assert np.array_equal(b.gamma_gram, b.psi_bar * 7 * np.eye(2))

    def test_negative_halfwidth(self):
        with pytest.raises(UsageError):
            noise_bound_uniform(-0.1, 1, 3)

    def test_asymmetric_gram_rejected(self):
        with pytest.raises(ConfigurationError):
            NoiseBound(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)


class TestVerifyNoiseEnergy:
    def test_zero_noise(self):
        assert verify_noise_energy(np.zeros((2, 5)), noise_bound_uniform(0.1, 2, 5))

    def test_boundary_equality(self):
        gamma = 0.7
        bound = NoiseBound(np.array([[gamma**2]]), gamma**2)
        assert verify_noise_energy(np.array([[gamma]]), bound)

    def test_violation(self):
        bound = NoiseBound(np.array([[0.1]]), 0.1)
        assert not verify_noise_energy(np.array([[1.0]]), bound)

    def test_uniform_draws_always_within_declared_bound(self):
        rng = np.random.default_rng(42)
        bound = noise_bound_uniform(0.5, 1, 3)
        for _ in range(1000):
            psi = rng.uniform(-0.5, 0.5, size=(1, 3))
            assert verify_noise_energy(psi, bound)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            verify_noise_energy(np.zeros((2, 3)), noise_bound_uniform(0.1, 1, 3))


class TestDatasetIO:
    def test_roundtrip(self, tmp_path):
        model, dist = benchmark_plant("b1")
        cfg = ExperimentConfig(
            t0=0.0, tau=0.1, T=3, input_source=lambda t, x: 0.1 * np.cos(t),
            noise_halfwidth=0.5, derivative_mode=EXACT_PLUS_NOISE, seed=1,
        )
        ds = collect(model, dist, np.array([1.0, 1.0]), cfg)
        out = tmp_path / "ds"
        save_dataset(ds, str(out))
        back = load_dataset(str(out))
        for attr in ("I_mat", "O1", "O2", "O1plus", "D_mat", "Psi", "O2plus"):
            assert np.array_equal(getattr(ds, attr), getattr(back, attr)), attr
        assert back.meta["derivative_mode"] == EXACT_PLUS_NOISE
        assert float(back.meta["noise_halfwidth"]) == 0.5

    def test_missing_directory_contents(self, tmp_path):
        with pytest.raises(UsageError):
            load_dataset(str(tmp_path))
