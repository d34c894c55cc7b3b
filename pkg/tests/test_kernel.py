import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from foldylax.cluster import BubbleCluster, derive_coupling
from foldylax.kernel import (BoundInapplicable, TailWarning, apply_K, compute_V, delay,
                             empirical_remainder, neumann_solve, remainder_bound,
                             sine_convolution)
from foldylax.laplace import FrequencyGrid, inverse, oracle_sigma
from foldylax.signal import (CausalSignal, GaussianModulated, SineBurst, TimeGrid,
                             VectorSignal, forcing_vector, hrs_norm)

from conftest import OMEGA_M, rel_l2


def _water_solution(water, N=12, n=4096):
    mat, cl, cd = water
    g = TimeGrid.from_n(1.0e-3, n)
    F = forcing_vector(cl, [0.0, -0.1, 0.0], SineBurst(1.0, cd.omega_res, 3), mat, g)
    return F, neumann_solve(cd, compute_V(F, cd.omega_M), N, 0, 3e4)


@pytest.fixture(scope="module")
def water_sol(water):
    return _water_solution(water)


def test_compute_V_of_zero():
    g = TimeGrid.from_n(1e-3, 100)
    assert not np.any(compute_V(VectorSignal(g, np.zeros((2, g.n))), OMEGA_M).values)


def test_compute_V_of_step():
    g = TimeGrid.from_n(1e-3, 20001)
    V = compute_V(CausalSignal(g, np.ones(g.n)), OMEGA_M)
    ref = np.cos(g.times / OMEGA_M) / OMEGA_M ** 2
    assert rel_l2(V.values[0], ref) < 1e-6


def test_compute_V_of_sine_against_laplace():
    w0 = 1.3e4
    g = TimeGrid.from_n(1e-3, 8192)
    V = compute_V(CausalSignal(g, np.sin(w0 * g.times)), OMEGA_M)
    fg = FrequencyGrid.for_time_grid(g, oracle_sigma(g, 3e4))
    s = fg.s
    V_hat = s ** 2 / (OMEGA_M ** 2 * s ** 2 + 1) * w0 / (s ** 2 + w0 ** 2)
    assert rel_l2(V.values[0], inverse(V_hat, fg, g).samples) < 1e-4


@pytest.mark.parametrize("n", [300, 5000])
def test_convolution_methods_agree(n):
    x = np.random.default_rng(n).normal(size=(3, n))
    a = sine_convolution(x, 1e-7, OMEGA_M, "direct")
    b = sine_convolution(x, 1e-7, OMEGA_M, "fft")
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(a).max())


def test_delay_is_exact_on_grid_multiples():
    x = np.arange(10.0)
    assert np.array_equal(delay(x, 3.0, 1.0), np.r_[np.zeros(3), x[:7]])
    assert np.allclose(delay(x, 2.5, 1.0)[3:], x[:7] + 0.5)


def test_apply_K_trivial_cases(mat, triangle):
    _, cd = triangle
    g = TimeGrid.from_n(1e-3, 256)
    assert not np.any(apply_K(cd, VectorSignal(g, np.zeros((3, g.n)))).values)
    one = derive_coupling(BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5), mat, OMEGA_M)
    W = VectorSignal(g, np.sin(1e4 * g.times)[None])
    assert not np.any(apply_K(one, W).values)


def test_apply_K_two_bubbles_against_quadrature(mat):
    cl = BubbleCluster(np.array([[0, 0, 0], [0.03, 0, 0]], float), 1e-3, 0.0)
    cd = derive_coupling(cl, mat, OMEGA_M)
    pulse = GaussianModulated(1.0, 1.5e4, 8e-5)
    g = TimeGrid.from_n(1e-3, 4000)
    W = VectorSignal(g, np.vstack([pulse.value(g.times), np.zeros(g.n)]))
    out = apply_K(cd, W).values[1]
    tau, q = cd.tau[1, 0], cd.q[1, 0]

    def oracle(t):
        u = t - tau
        if u <= 0:
            return 0.0
        conv, _ = quad(lambda r: np.sin((u - r) / OMEGA_M) * pulse.value(r), 0.0, u,
                       limit=400, epsabs=0, epsrel=1e-10)
        return q * (pulse.value(u) / OMEGA_M ** 2 - conv / OMEGA_M ** 3)

    idx = np.arange(0, g.n, 40)
    ref = np.array([oracle(t) for t in g.times[idx]])
    assert rel_l2(out[idx], ref) < 1e-3
    assert not np.any(apply_K(cd, W).values[0])


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_apply_K_is_linear(triangle, a, b, seed):
    _, cd = triangle
    rng = np.random.default_rng(seed)
    g = TimeGrid.from_n(5e-4, 512)
    X, Y = (VectorSignal(g, rng.normal(size=(3, g.n))) for _ in range(2))
    lhs = apply_K(cd, a * X + b * Y).values
    rhs = a * apply_K(cd, X).values + b * apply_K(cd, Y).values
    assert np.allclose(lhs, rhs, atol=1e-9 * (np.abs(rhs).max() + 1e-300))


def test_apply_K_is_causal(triangle):
    _, cd = triangle
    g = TimeGrid.from_n(1e-3, 4096)
    vals = np.zeros((3, g.n))
    start = 1000
    vals[:, start:] = 1.0
    out = apply_K(cd, VectorSignal(g, vals)).values
    first = start + int(np.floor(cd.tau_min / g.dt))
    assert not np.any(out[:, :first])


def test_order_zero_is_V(triangle, triangle_forcing):
    _, cd = triangle
    _, F = triangle_forcing
    V = compute_V(F, OMEGA_M)
    sol = neumann_solve(cd, V, 0)
    assert sol.N == 0 and np.array_equal(sol.partial().values, V.values)


def test_single_bubble_series_is_V(mat):
    cl = BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5)
    cd = derive_coupling(cl, mat, OMEGA_M)
    g = TimeGrid.from_n(1e-3, 512)
    F = forcing_vector(cl, [0.1, 0, 0], SineBurst(1, 1e4, 2), mat, g)
    V = compute_V(F, OMEGA_M)
    sol = neumann_solve(cd, V, 4)
    assert np.array_equal(sol.partial().values, V.values)
    assert empirical_remainder(sol, 1) == 0.0


def test_auto_stop_and_decay_on_water(water, water_sol):
    _, _, cd = water
    from foldylax.cluster import check_neumann_condition
    alpha = check_neumann_condition(cd, 3e4).details["alpha_envelope"]
    _, sol = water_sol
    assert np.all(sol.ratios <= alpha)
    assert not sol.non_decaying


def test_remainder_bound_trivial_and_monotone(water):
    _, _, cd = water
    assert remainder_bound(cd, 3e4, 3, 0.0) == 0.0
    b = [remainder_bound(cd, 3e4, N, 1.0) for N in range(10)]
    assert np.all(np.diff(b) < 0)


def test_remainder_bound_inapplicable(water):
    _, _, cd = water
    with pytest.raises(BoundInapplicable):
        remainder_bound(cd, 0.5 / cd.omega_M, 2, 1.0)
    with pytest.raises(BoundInapplicable):
        remainder_bound(cd, 3e4, 2, 1.0, alpha=1e3)


def test_remainder_water_within_bound(water, water_sol):
    _, _, cd = water
    F, sol = water_sol
    fnorm = hrs_norm(F, 0, 3e4)
    e = empirical_remainder(sol, 5)
    assert 0 < e <= remainder_bound(cd, 3e4, 5, fnorm)
    assert empirical_remainder(sol, sol.N) == 0.0


def test_tail_warning(water):
    _, sol = _water_solution(water, N=2, n=512)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        empirical_remainder(sol, 0)
    assert any(issubclass(w.category, TailWarning) for w in rec)


def test_dump_writes_terms(tmp_path, water_sol):
    _, sol = water_sol
    sol.dump(tmp_path)
    assert (tmp_path / "term_0_bubble_1.csv").exists()
    lines = (tmp_path / "norms.csv").read_text().splitlines()
    assert lines[0] == "n,term_norm" and len(lines) == sol.N + 2
