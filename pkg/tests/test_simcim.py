import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcim_rl import (
    CouplingMatrix,
    DivergenceError,
    LrTestParams,
    SimCimBatchState,
    SimCimConfig,
    brute_force_max_cut,
    cut_value,
    eigendecompose,
    find_learning_rate,
    init_state,
    linear_pbar,
    run_batch,
    spins_from_amplitudes,
    step,
    to_eigenbasis,
)
from simcim_rl.simcim import _raw_step

NO_NOISE = np.random.default_rng(0)  # never drawn from when sigma == 0


def scalar_problem():
    return CouplingMatrix(np.zeros((1, 1)))


class TestConfig:
    def test_defaults(self):
        cfg = SimCimConfig(mu=0.05)
        assert (cfg.eta, cfg.sigma, cfg.iterations, cfg.batch_size) == (0.9, 0.03, 1000, 256)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu": 0.0},
            {"mu": -1.0},
            {"mu": 0.1, "eta": 1.0},
            {"mu": 0.1, "eta": -0.1},
            {"mu": 0.1, "sigma": -0.01},
            {"mu": 0.1, "iterations": -1},
            {"mu": 0.1, "batch_size": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SimCimConfig(**kwargs)


class TestStep:
    def test_scalar_update(self):
        # n=1, J=0, p=-1: gradient mu*(0 - p*c) = 0.1*0.5 = 0.05, no momentum
        state = SimCimBatchState(c=np.array([[0.5]]), m=np.array([[0.0]]))
        cfg = SimCimConfig(mu=0.1, eta=0.0, sigma=0.0)
        out = step(state, scalar_problem(), -1.0, cfg, NO_NOISE)
        assert out.c[0, 0] == pytest.approx(0.55, abs=1e-15)
        assert out.m[0, 0] == pytest.approx(0.05, abs=1e-15)
        assert out.t == 1

    def test_momentum_mixing(self):
        state = SimCimBatchState(c=np.array([[0.5]]), m=np.array([[0.2]]))
        cfg = SimCimConfig(mu=0.1, eta=0.5, sigma=0.0)
        out = step(state, scalar_problem(), -1.0, cfg, NO_NOISE)
        # m' = 0.5*0.2 + 0.5*0.05 = 0.125
        assert out.m[0, 0] == pytest.approx(0.125, abs=1e-15)
        assert out.c[0, 0] == pytest.approx(0.625, abs=1e-15)

    def test_saturation_blocks_amplitude_but_not_momentum(self):
        state = SimCimBatchState(c=np.array([[0.99]]), m=np.array([[0.0]]))
        cfg = SimCimConfig(mu=0.1, eta=0.0, sigma=0.0)
        out = step(state, scalar_problem(), -1.0, cfg, NO_NOISE)
        assert out.c[0, 0] == 0.99  # 0.99 + 0.099 would leave [-1, 1]
        assert out.m[0, 0] == pytest.approx(0.099, abs=1e-15)

    def test_vector_regularization_matches_per_column_scalars(self):
        rng = np.random.default_rng(5)
        j = rng.standard_normal((4, 4))
        j = (j + j.T) / 2
        np.fill_diagonal(j, 0.0)
        matrix = CouplingMatrix(j)
        c0 = 0.1 * rng.standard_normal((4, 3))
        m0 = 0.05 * rng.standard_normal((4, 3))
        cfg = SimCimConfig(mu=0.1, eta=0.5, sigma=0.0)
        p = np.array([-1.0, 0.0, 2.0])
        vec = step(SimCimBatchState(c0.copy(), m0.copy()), matrix, p, cfg, NO_NOISE)
        for col, p_col in enumerate(p):
            one = step(
                SimCimBatchState(c0[:, [col]].copy(), m0[:, [col]].copy()),
                matrix,
                float(p_col),
                cfg,
                NO_NOISE,
            )
            np.testing.assert_array_equal(vec.c[:, [col]], one.c)

    def test_linearized_dynamics_in_eigenbasis(self):
        # while far from saturation one noiseless step scales eigen-mode i by
        # 1 + (1-eta)*mu*(lam_i - p)
        rng = np.random.default_rng(6)
        j = rng.standard_normal((8, 8))
        j = (j + j.T) / 2
        np.fill_diagonal(j, 0.0)
        matrix = CouplingMatrix(j)
        decomp = eigendecompose(matrix)
        c0 = 1e-3 * rng.standard_normal((8, 2))
        cfg = SimCimConfig(mu=0.05, eta=0.9, sigma=0.0)
        p = 0.7
        out = step(SimCimBatchState(c0.copy(), np.zeros_like(c0)), matrix, p, cfg, NO_NOISE)
        e0 = to_eigenbasis(decomp, c0)
        gain = 1.0 + (1.0 - cfg.eta) * cfg.mu * (decomp.lam[:, None] - p)
        np.testing.assert_allclose(to_eigenbasis(decomp, out.c), gain * e0, atol=1e-10)

    def test_amplitude_norm_decays_above_top_eigenvalue(self):
        rng = np.random.default_rng(7)
        j = rng.standard_normal((8, 8))
        j = (j + j.T) / 2
        np.fill_diagonal(j, 0.0)
        matrix = CouplingMatrix(j)
        decomp = eigendecompose(matrix)
        cfg = SimCimConfig(mu=0.01, eta=0.0, sigma=0.0)
        state = SimCimBatchState(c=0.01 * rng.standard_normal((8, 4)), m=np.zeros((8, 4)))
        norms = [np.linalg.norm(state.c)]
        for _ in range(50):
            state = step(state, matrix, decomp.lam_max, cfg, NO_NOISE)
            norms.append(np.linalg.norm(state.c))
        assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_divergence_error_names_iteration_and_column(self):
        state = init_state(3, 4)
        state.c[1, 2] = np.nan
        state.t = 5
        cfg = SimCimConfig(mu=0.1, eta=0.0, sigma=0.0)
        with pytest.raises(DivergenceError, match="iteration 5.*column 2"):
            step(state, CouplingMatrix(np.zeros((3, 3))), 0.0, cfg, NO_NOISE)


class TestSpins:
    def test_sign_of_zero_is_plus_one(self):
        spins = spins_from_amplitudes(np.array([-0.5, 0.0, 0.5]))
        np.testing.assert_array_equal(spins, [-1.0, 1.0, 1.0])

    @given(st.integers(0, 2**31 - 1))
    def test_always_unit_magnitude(self, seed):
        c = np.random.default_rng(seed).uniform(-1, 1, size=12)
        assert set(np.unique(spins_from_amplitudes(c))) <= {-1.0, 1.0}


class TestRunBatch:
    def test_zero_iterations_reads_out_initial_state(self, single_edge):
        cfg = SimCimConfig(mu=0.1, iterations=0, batch_size=4)
        decomp = eigendecompose(single_edge)
        state, spins, cuts = run_batch(single_edge, decomp, lambda t: 1.0, cfg, seed=0)
        np.testing.assert_array_equal(state.c, 0.0)
        np.testing.assert_array_equal(spins, 1.0)
        assert np.all(cuts == cut_value(single_edge, np.ones(2)))
        assert np.all(cuts == 0.0)

    def test_single_edge_batch_finds_the_cut(self, single_edge):
        decomp = eigendecompose(single_edge)
        cfg = SimCimConfig(mu=0.1, iterations=200, batch_size=16)
        _, spins, cuts = run_batch(
            single_edge, decomp, lambda t: linear_pbar(t, 200), cfg, seed=3
        )
        assert cuts.max() == 1.0
        assert set(np.unique(spins)) <= {-1.0, 1.0}

    def test_deterministic_for_fixed_seed(self, triangle):
        decomp = eigendecompose(triangle)
        cfg = SimCimConfig(mu=0.1, iterations=50, batch_size=8)
        sched = lambda t: linear_pbar(t, 50)
        a = run_batch(triangle, decomp, sched, cfg, seed=11)
        b = run_batch(triangle, decomp, sched, cfg, seed=11)
        np.testing.assert_array_equal(a[0].c, b[0].c)
        np.testing.assert_array_equal(a[2], b[2])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_amplitudes_stay_in_box(self, seed):
        j = -np.ones((3, 3))
        np.fill_diagonal(j, 0.0)
        matrix = CouplingMatrix(j)
        decomp = eigendecompose(matrix)
        cfg = SimCimConfig(mu=0.5, eta=0.9, sigma=0.1, iterations=40, batch_size=6)
        state, _, _ = run_batch(matrix, decomp, lambda t: linear_pbar(t, 40), cfg, seed=seed)
        assert np.abs(state.c).max() <= 1.0

    def test_matches_brute_force_on_small_instance(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=64)
        mu = find_learning_rate(er16, decomp, cfg, seed=0)
        cfg = SimCimConfig(mu=mu, iterations=1000, batch_size=64)
        _, _, cuts = run_batch(er16, decomp, lambda t: linear_pbar(t, 1000), cfg, seed=7)
        _, best = brute_force_max_cut(er16)
        assert cuts.max() == best

    def test_trace_rows(self, triangle):
        decomp = eigendecompose(triangle)
        cfg = SimCimConfig(mu=0.1, iterations=10, batch_size=4)
        trace = []
        run_batch(
            triangle, decomp, lambda t: linear_pbar(t, 10), cfg, seed=1,
            trace=trace, trace_every=4,
        )
        assert [row[0] for row in trace] == [0, 4, 8]
        best = [row[3] for row in trace]
        assert best == sorted(best)
        assert all(isinstance(row[1], float) and isinstance(row[2], float) for row in trace)


class TestLearningRateSearch:
    def test_quiet_dynamics_select_the_starting_rate(self):
        # J = 0 with no noise never moves, so the gradient norm is settled
        # from the first iteration and the sweep reads off mu_start
        matrix = CouplingMatrix(np.zeros((2, 2)))
        decomp = eigendecompose(matrix)
        cfg = SimCimConfig(mu=1.0, sigma=0.0, iterations=100, batch_size=4)
        mu = find_learning_rate(matrix, decomp, cfg, seed=0, use_cache=False)
        assert mu == 1.0

    def test_rejects_short_sweeps(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=50, batch_size=4)
        with pytest.raises(ValueError):
            find_learning_rate(er16, decomp, cfg, seed=0)

    def test_chosen_rate_lies_in_sweep_range(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=32)
        params = LrTestParams()
        mu = find_learning_rate(er16, decomp, cfg, seed=1, params=params, use_cache=False)
        assert params.mu_end <= mu <= params.mu_start

    def test_stable_across_seeds(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=64)
        mus = [
            find_learning_rate(er16, decomp, cfg, seed=s, use_cache=False) for s in (0, 1, 2)
        ]
        assert max(mus) / min(mus) <= 2.0

    def test_fallback_with_warning_when_norm_never_settles(self, er16, caplog):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=8)
        params = LrTestParams(rel_tol=1e-9, patience=80)
        with caplog.at_level(logging.WARNING, logger="simcim_rl.simcim"):
            mu = find_learning_rate(er16, decomp, cfg, seed=5, params=params, use_cache=False)
        assert mu == params.fallback_mu
        assert "falling back" in caplog.text

    def test_cache_and_no_cache_agree(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=16)
        first = find_learning_rate(er16, decomp, cfg, seed=9)
        second = find_learning_rate(er16, decomp, cfg, seed=9)
        uncached = find_learning_rate(er16, decomp, cfg, seed=9, use_cache=False)
        assert first == second == uncached

    def test_trace_contains_full_sweep(self, er16):
        decomp = eigendecompose(er16)
        cfg = SimCimConfig(mu=1.0, iterations=1000, batch_size=8)
        trace = []
        find_learning_rate(er16, decomp, cfg, seed=2, trace=trace, use_cache=False)
        assert len(trace) == 1000
        mus = np.array([row[1] for row in trace])
        assert mus[0] == 1.0
        assert np.all(np.diff(mus) < 0)


class TestGradientHelper:
    def test_reports_pre_momentum_gradient(self):
        c = np.array([[0.5]])
        m = np.array([[0.3]])
        c2, m2, grad = _raw_step(
            c, m, np.zeros((1, 1)), -1.0, 0.1, 0.5, 0.0, NO_NOISE
        )
        assert grad[0, 0] == pytest.approx(0.05, abs=1e-15)
        assert m2[0, 0] == pytest.approx(0.175, abs=1e-15)
        assert c2[0, 0] == pytest.approx(0.675, abs=1e-15)
