import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foldylax.cluster import BubbleCluster, derive_coupling
from foldylax.field import (Observation, epsilon_scaling_study, field_difference,
                            fit_slope, scattered_field)
from foldylax.kernel import compute_V, delay, neumann_solve
from foldylax.signal import (GaussianModulated, SineBurst, TimeGrid, VectorSignal,
                             forcing_vector)

from conftest import OMEGA_M

X0 = np.array([0.0, -0.1, 0.0])
OBS = np.array([0.1, 0.02, 0.0])


@pytest.fixture(scope="module")
def water_run(water):
    mat, cl, cd = water
    g = TimeGrid.from_n(1e-3, 4096)
    F = forcing_vector(cl, X0, SineBurst(1.0, cd.omega_res, 3), mat, g)
    sol = neumann_solve(cd, compute_V(F, cd.omega_M), 6, 0, 3e4)
    return cl, cd, g, sol, Observation.at(OBS, cl)


def test_observation_exclusion(water):
    _, cl, _ = water
    with pytest.raises(ValueError, match="within"):
        Observation.at(cl.centers[2] + [5e-4, 0, 0], cl)
    obs = Observation.at(OBS, cl)
    assert obs.d_min <= obs.d_max


def test_zero_amplitudes_give_zero_field(triangle):
    cl, cd = triangle
    g = TimeGrid.from_n(1e-3, 256)
    sol = neumann_solve(cd, VectorSignal(g, np.zeros((3, g.n))), 2)
    assert not np.any(scattered_field(sol, cd, Observation.at(OBS, cl)).samples)


def test_single_bubble_order_zero(mat):
    cl = BubbleCluster(np.zeros((1, 3)), 1e-3, 0.5)
    cd = derive_coupling(cl, mat, OMEGA_M)
    g = TimeGrid.from_n(1e-3, 2048)
    F = forcing_vector(cl, X0, SineBurst(1.0, 1.2e4, 2), mat, g)
    sol = neumann_solve(cd, compute_V(F, OMEGA_M), 3)
    obs = Observation.at(OBS, cl)
    r = np.linalg.norm(OBS)
    u = scattered_field(sol, cd, obs, 0).samples
    ref = -cd.C[0] / (4 * np.pi * r) * delay(sol.terms[0].values[0], r / cd.c0, g.dt)
    assert np.allclose(u, ref, rtol=1e-14, atol=0)
    sig, norm = field_difference(sol, cd, obs, 2)
    assert norm == 0.0 and not np.any(sig.samples)


def test_field_is_causal(water_run):
    cl, cd, g, sol, obs = water_run
    u = scattered_field(sol, cd, obs).samples
    travel = (np.linalg.norm(cl.centers - X0, axis=1) + obs.distances) / cd.c0
    early = g.times < travel.min() - g.dt
    assert np.any(early) and not np.any(u[early])
    assert np.any(u[~early])


def test_difference_identity(water_run):
    _, cd, _, sol, obs = water_run
    for N in range(1, sol.N + 1):
        sig, norm = field_difference(sol, cd, obs, N)
        direct = (scattered_field(sol, cd, obs, N).samples
                  - scattered_field(sol, cd, obs, N - 1).samples)
        assert np.linalg.norm(sig.samples - direct) <= 1e-10 * np.linalg.norm(direct)
        assert norm > 0


def test_difference_order_validation(water_run):
    _, cd, _, sol, obs = water_run
    with pytest.raises(ValueError):
        field_difference(sol, cd, obs, 0)
    with pytest.raises(ValueError):
        field_difference(sol, cd, obs, sol.N + 1)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(-3, 3), c=st.floats(1e-3, 1e3))
def test_fit_slope_exact_power_law(k, c):
    x = np.logspace(-5, -4, 5)
    slope, res = fit_slope(x, c * x ** k)
    assert slope == pytest.approx(k, abs=1e-9)
    assert res < 1e-9


def test_fit_slope_degenerate():
    with pytest.raises(ValueError):
        fit_slope([1.0, 1.0], [1.0, 2.0])


def test_study_needs_a_decade(mat):
    kw = dict(template=np.eye(3), p=0.5, N=1, obs_x=[1, 1, 1], x0=[2, 0, 0],
              pulse=GaussianModulated(1, 1 / OMEGA_M, 4 * OMEGA_M), mat=mat,
              grid=TimeGrid.from_n(6e-4, 512), sigma=3e4, omega_M=OMEGA_M)
    with pytest.raises(ValueError, match="four"):
        epsilon_scaling_study(eps_list=[1e-5, 1e-4, 2e-4], **kw)
    with pytest.raises(ValueError, match="decade"):
        epsilon_scaling_study(eps_list=[1e-5, 2e-5, 3e-5, 5e-5], **kw)
