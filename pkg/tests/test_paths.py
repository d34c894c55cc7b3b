import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foldylax.cluster import BubbleCluster, derive_coupling
from foldylax.paths import (DeltaTrain, Path, PathBudgetExceeded, atomic_power,
                            background_bound, count_walks, enumerate_all,
                            enumerate_paths, m_max, make_path, maximize_path,
                            path_amplitude)
from foldylax.water import ALPHA_POWER

from conftest import OMEGA_M

W_PARAMS = dict(sigma=3e4, m=10.0, h=1e3, r=0, d_max=0.1, drop_path_delay=True)


def _brute_force(q, N, i, j):
    M = len(q)
    out = []
    for mid in itertools.product(range(M), repeat=N - 1):
        idx = (i - 1,) + mid + (j - 1,)
        w = np.prod([q[a, b] for a, b in zip(idx[:-1], idx[1:])])
        if w != 0:
            out.append(tuple(k + 1 for k in idx))
    return out


def test_two_bubbles_length_two():
    q = np.array([[0.0, 2.0], [3.0, 0.0]])
    paths = enumerate_paths(2, 2, 1, 1, q)
    assert [p.indices for p in paths] == [(1, 2, 1)]
    assert paths[0].Q == 6.0


def test_single_bubble_has_no_paths():
    assert enumerate_paths(1, 3, 1, 1, np.zeros((1, 1))) == []


def test_water_path_present(water):
    _, _, cd = water
    paths = enumerate_paths(5, 5, 1, 2, cd.q, tau=cd.tau, q0=cd.q0)
    hit = [p for p in paths if p.indices == (1, 2, 3, 4, 5, 2)]
    assert len(hit) == 1
    assert hit[0].tau_total == pytest.approx(1.2941211988e-4, rel=1e-9)
    assert hit[0].Q0 == pytest.approx(4.53419407817e-50, rel=0.005)


@settings(max_examples=40, deadline=None)
@given(M=st.integers(2, 4), N=st.integers(1, 4), data=st.data())
def test_enumeration_against_brute_force(M, N, data):
    i = data.draw(st.integers(1, M))
    j = data.draw(st.integers(1, M))
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    q = rng.uniform(0.1, 1.0, (M, M)) * (rng.uniform(size=(M, M)) > 0.2)
    np.fill_diagonal(q, 0.0)
    paths = enumerate_paths(M, N, i, j, q)
    assert [p.indices for p in paths] == _brute_force(q, N, i, j)
    assert len(paths) == count_walks(q, N)[i - 1, j - 1]
    total = sum(p.Q for p in paths)
    assert total == pytest.approx(np.linalg.matrix_power(q, N)[i - 1, j - 1], rel=1e-12)


def test_budget_guard(water):
    _, _, cd = water
    with pytest.raises(PathBudgetExceeded):
        enumerate_all(cd, 8, budget=1000)


def test_atomic_power_base_case(triangle):
    _, cd = triangle
    A = atomic_power(cd, 1)
    for i in range(3):
        for j in range(3):
            if i == j:
                assert A[i][j].atoms == ()
            else:
                assert A[i][j].atoms == ((cd.q[i, j] / OMEGA_M ** 2, cd.tau[i, j]),)


def test_atomic_power_two_bubbles(mat):
    cl = BubbleCluster(np.array([[0, 0, 0], [0.03, 0, 0]], float), 1e-3, 0.0)
    cd = derive_coupling(cl, mat, OMEGA_M)
    A = atomic_power(cd, 2)
    (w, d), = A[0][0].atoms
    assert w == pytest.approx(cd.q[0, 1] * cd.q[1, 0] / OMEGA_M ** 4, rel=1e-14)
    assert d == 2 * cd.tau[0, 1]


def test_delta_train_merge():
    dt = DeltaTrain.from_atoms([(1.0, 2.0), (2.0, 1.0), (0.5, 2.0 + 1e-18)], 1e-12)
    assert dt.atoms == ((2.0, 1.0), (1.5, 2.0))
    with pytest.raises(ValueError):
        DeltaTrain.from_atoms([(1.0, -1.0)])


def test_path_amplitude_basic(water):
    _, _, cd = water
    g = make_path((1, 2, 3, 4, 5, 2), cd)
    assert path_amplitude(g, cd, **{**W_PARAMS, "m": 0.0}) == 0.0
    L = path_amplitude(g, cd, **W_PARAMS)
    assert L == pytest.approx(8.28e-13, rel=0.03)
    assert path_amplitude(g, cd, **{**W_PARAMS, "d_max": 0.2}) < L


def test_background_bound(water):
    _, _, cd = water
    alpha = ALPHA_POWER ** (1 / 6)
    assert background_bound(cd, 3e4, 3e4, 5, 0.1, 0.0, alpha) == 0.0
    assert background_bound(cd, 3e4, 3e4, 5, 0.1, 1.0, alpha) == pytest.approx(0.32, rel=0.05)
    b = [background_bound(cd, 3e4, 3e4, N, 0.1, 1.0, alpha) for N in range(1, 8)]
    assert np.all(np.diff(b) < 0)


def test_maximize_trivial_cases(water):
    _, _, cd = water
    p = make_path((1, 2), cd)
    assert maximize_path([p], cd, **{**W_PARAMS, "drop_path_delay": False})[0] is p
    slow = Path((1, 2, 1), 1.0, 1.0, 2e-4)
    fast = Path((1, 3, 1), 1.0, 1.0, 1e-4)
    best, _ = maximize_path([slow, fast], cd, **{**W_PARAMS, "drop_path_delay": False})
    assert best is fast


def test_exhaustive_maximum_dominates_published_path(water):
    _, _, cd = water
    star, L_star = maximize_path(enumerate_all(cd, 5), cd, **W_PARAMS)
    assert L_star >= path_amplitude(make_path((1, 2, 3, 4, 5, 2), cd), cd, **W_PARAMS)


def test_m_max():
    assert m_max(4.6, 1.0, 1.0, 0.9) == 5
    assert m_max(4.6, 1.0, 1.0, 1e-12) == 1
    assert m_max(2.0, 2.0, 1.0, 0.5) == 1
    with pytest.raises(ValueError):
        m_max(1.0, 1.0, 1.0, 1.0)
