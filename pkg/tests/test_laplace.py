import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foldylax.cluster import BubbleCluster, derive_coupling
from foldylax.kernel import compute_V, neumann_solve
from foldylax.laplace import (FrequencyGrid, PoleProximityError, eval_T, forward,
                              h_norm_freq, inverse, max_row_norm, neumann_freq,
                              oracle_sigma, rational, rational_factor_sup,
                              solve_freq, sup_norm_T)
from foldylax.signal import (CausalSignal, GaussianModulated, SineBurst, TimeGrid,
                             forcing_vector, sample_pulse)

from conftest import OMEGA_M, rel_l2

OMEGAS5 = np.array([-2e4, -5e3, 0.0, 7e3, 1.5e4])


def test_forward_of_zero():
    g = TimeGrid.from_n(1e-3, 64)
    fg = FrequencyGrid.for_time_grid(g, 1e3)
    assert not np.any(forward(CausalSignal.zeros(g), fg))


def test_forward_exponential_closed_form():
    a, sigma = 1e4, 3e4
    g = TimeGrid.from_n(1e-3, 40001)
    f = CausalSignal(g, np.exp(-a * g.times))
    fg = FrequencyGrid(sigma, OMEGAS5)
    assert np.allclose(forward(f, fg), 1.0 / (fg.s + a), rtol=1e-6, atol=0)


def test_forward_step_closed_form():
    g = TimeGrid.from_n(1e-3, 40001)
    fg = FrequencyGrid(3e4, OMEGAS5)
    F = forward(CausalSignal(g, np.ones(g.n)), fg)
    assert np.allclose(F, 1.0 / fg.s, rtol=1e-6, atol=0)


def test_fft_and_direct_paths_agree():
    g = TimeGrid.from_n(1e-3, 1024)
    f = sample_pulse(GaussianModulated(1.0, 2e4, 5e-5), g)
    fg = FrequencyGrid.for_time_grid(g, 5e3)
    direct = FrequencyGrid(5e3, fg.omegas[:40])
    assert np.allclose(forward(f, fg)[:40], forward(f, direct), rtol=1e-9, atol=1e-18)


@settings(max_examples=30, deadline=None)
@given(w0=st.floats(5e3, 5e4), cycles=st.floats(0.5, 6.0),
       sigma_t=st.floats(0.5, 10.0))
def test_round_trip_sine_burst(w0, cycles, sigma_t):
    g = TimeGrid.from_n(1e-3, 2048)
    f = sample_pulse(SineBurst(1.0, w0, cycles), g)
    fg = FrequencyGrid.for_time_grid(g, sigma_t / g.t_end)
    back = inverse(forward(f, fg), fg, g)
    assert rel_l2(back.samples, f.samples) < 1e-4


def test_inverse_of_zero():
    g = TimeGrid.from_n(1e-3, 64)
    fg = FrequencyGrid.for_time_grid(g, 1e3)
    assert not np.any(inverse(np.zeros(fg.n_freq), fg, g).samples)


def test_inverse_needs_symmetric_samples():
    g = TimeGrid.from_n(1e-3, 64)
    fg = FrequencyGrid.for_time_grid(g, 1e3)
    with pytest.raises(ValueError, match="symmetric"):
        inverse(1j * np.ones(fg.n_freq), fg, g)


def test_inverse_of_resonant_factor():
    # inverse transform of 1/(w^2 s^2 + 1) is sin(t/w)/w
    g = TimeGrid.from_n(1e-3, 8192)
    fg = FrequencyGrid.for_time_grid(g, oracle_sigma(g, 3e4))
    Y = inverse(1.0 / (OMEGA_M ** 2 * fg.s ** 2 + 1.0), fg, g)
    ref = np.sin(g.times / OMEGA_M) / OMEGA_M
    assert rel_l2(Y.samples, ref) < 1e-3


def test_eval_T_single_bubble(mat):
    cd = derive_coupling(BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5), mat)
    ts = eval_T(cd, FrequencyGrid(3e4, OMEGAS5))
    assert not np.any(ts.T)


def test_eval_T_real_axis_scalar(water):
    _, _, cd = water
    sigma = 3e4
    ts = eval_T(cd, FrequencyGrid(sigma, [0.0]))
    hand = sigma ** 2 * cd.q[0, 1] * np.exp(-sigma * cd.tau[0, 1]) / (
        cd.omega_M ** 2 * sigma ** 2 + 1)
    assert ts.T[0, 0, 1].real == pytest.approx(hand, rel=1e-12)
    assert ts.T[0, 0, 1].imag == 0.0


def test_eval_T_envelope(water):
    _, _, cd = water
    sigma = 3e4
    fg = FrequencyGrid(sigma, np.linspace(-5e5, 5e5, 4001))
    ts = eval_T(cd, fg)
    env = cd.rational_factor(sigma) * cd.q
    assert np.all(np.abs(ts.T) <= env[None] * (1 + 1e-12))


def test_pole_proximity_detected(water):
    _, _, cd = water
    with pytest.raises(PoleProximityError):
        eval_T(cd, FrequencyGrid(1e-300, [1.0 / cd.omega_M]), pole_tol=1e-6)


def test_solve_without_coupling(mat):
    cd = derive_coupling(BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5), mat)
    V = np.random.default_rng(0).normal(size=(5, 1)) + 0j
    assert np.array_equal(solve_freq(eval_T(cd, FrequencyGrid(3e4, OMEGAS5)), V), V)


def test_solve_matches_geometric_tail(water):
    _, _, cd = water
    fg = FrequencyGrid(3e4, np.linspace(-1e5, 1e5, 301))
    ts = eval_T(cd, fg)
    rng = np.random.default_rng(1)
    V = rng.normal(size=(fg.n_freq, cd.M)) + 1j * rng.normal(size=(fg.n_freq, cd.M))
    Y = solve_freq(ts, V)
    S = neumann_freq(ts, 20, V)
    a = max_row_norm(ts.T)
    assert np.all(a < 1)
    err = np.max(np.abs(Y - S), axis=1)
    bound = a ** 21 / (1 - a) * np.max(np.abs(V), axis=1)
    vmax = np.max(np.abs(V), axis=1)
    assert np.all(err <= bound + 1e-14 * vmax)


def test_frequency_route_matches_series_on_water(water):
    mat, cl, cd = water
    g = TimeGrid.from_n(1.5e-3, 4096)
    pulse = GaussianModulated(1.0, cd.omega_res, cd.omega_M)
    F = forcing_vector(cl, [0.0, -0.1, 0.0], pulse, mat, g)
    sol = neumann_solve(cd, compute_V(F, cd.omega_M), "auto", 0, 3e4, tol=1e-10)
    fg = FrequencyGrid.for_time_grid(g, oracle_sigma(g, 3e4))
    Yf = inverse(solve_freq(eval_T(cd, fg, F)), fg, g)
    assert rel_l2(Yf.values, sol.partial().values) < 1e-3


def test_sup_norm(water, mat):
    _, _, cd = water
    est = sup_norm_T(cd, 3e4)
    assert est.alpha <= est.envelope * (1 + 1e-12)
    assert est.alpha < 1
    one = derive_coupling(BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5), mat)
    assert sup_norm_T(one, 3e4).alpha == 0.0


@pytest.mark.parametrize("sigma0", [2.1e4, 3e4, 1e5])
def test_rational_factor_bounds_sampled_sup(sigma0):
    sup = rational_factor_sup(OMEGA_M, sigma0)
    bound = sigma0 ** 2 / (OMEGA_M ** 2 * sigma0 ** 2 - 1)
    assert abs(rational(OMEGA_M, sigma0)) <= sup <= bound


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), M=st.integers(2, 5),
       eps=st.floats(1e-4, 5e-3), sig_mult=st.floats(1.05, 20.0))
def test_multiplier_bound(mat, seed, M, eps, sig_mult):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.05, 0.05, size=(M, 3))
    cd = derive_coupling(BubbleCluster(z, eps, 0.0), mat, OMEGA_M)
    fg = FrequencyGrid(sig_mult / OMEGA_M, np.linspace(-2e5, 2e5, 257))
    T = eval_T(cd, fg).T
    V = rng.normal(size=(fg.n_freq, M)) + 1j * rng.normal(size=(fg.n_freq, M))
    TV = np.einsum("kij,kj->ki", T, V)
    op = np.max(np.linalg.norm(T, ord=2, axis=(1, 2)))
    assert h_norm_freq(TV, fg) <= op * h_norm_freq(V, fg) * (1 + 1e-12)
