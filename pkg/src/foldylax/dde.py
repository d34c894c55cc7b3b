"""Method-of-steps integrator for the neutral delayed system

    omega_M^2 Y_m'' + Y_m + sum_{j != m} q_mj Y_j''(t - tau_mj) = F_m(t),
    Y(0) = Y'(0) = 0,  Y'' = 0 for t < 0.

Each step advances ``(Y, Y')`` with classical RK4.  The delayed second
derivatives come from the recorded history by linear interpolation and
are moved to the right-hand side.  The forcing is linearly interpolated
at half steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import CouplingData
from .signal import SignalLike, TimeGrid, VectorSignal, as_vector


class DdeDivergence(RuntimeError):
    """The integrated amplitudes grew beyond the divergence threshold."""

    def __init__(self, msg, t, peak):
        super().__init__(msg)
        self.t = t
        self.peak = peak


@dataclass
class DdeState:
    """History buffers on the grid, filled up to ``step``."""

    Y: np.ndarray = field(repr=False)
    dY: np.ndarray = field(repr=False)
    ddY: np.ndarray = field(repr=False)
    step: int = 0


def _stencils(cd: CouplingData, dt: float):
    """Integer offsets and weights of delayed reads at stage fractions 0, 1/2, 1."""
    M = cd.M
    off = np.zeros((3, M, M), dtype=np.int64)
    frac = np.zeros((3, M, M))
    for s, c in enumerate((0.0, 0.5, 1.0)):
        base = c - cd.tau / dt
        o = np.floor(base)
        off[s] = o.astype(np.int64)
        frac[s] = base - o
    # diagonal couplings vanish; point them at the zero history
    idx = np.arange(M)
    off[:, idx, idx] = -2
    frac[:, idx, idx] = 0.0
    return off, frac


def integrate_dde(cd: CouplingData, F: SignalLike, grid: TimeGrid = None,
                  growth_limit: float = 1e6, check_every: int = 16,
                  derivative: int = 0, return_state: bool = False):
    """Integrate the delayed amplitude system on the grid of ``F``.

    Parameters
    ----------
    derivative : {0, 2}
        Return ``Y`` or its second derivative.  ``Y''`` is recorded from
        the algebraic relation, not by differencing.  Since
        ``s^2 F^ / (omega_M^2 s^2 + 1)`` is the transform of ``V``, the
        Neumann-series amplitudes built from ``V`` equal ``Y''`` of this
        system.

    Raises
    ------
    ValueError
        If ``dt`` is not below the smallest coupling delay.
    DdeDivergence
        If ``max |Y|`` exceeds ``growth_limit`` times the forcing scale
        ``max|F| (1 + T/omega_M)``.
    """
    if derivative not in (0, 2):
        raise ValueError("derivative must be 0 or 2")
    Fv = as_vector(F)
    if grid is not None and not grid.same_as(Fv.grid):
        raise ValueError("forcing is sampled on a different grid")
    grid = Fv.grid
    M, n, dt = cd.M, grid.n, grid.dt
    if Fv.M != M:
        raise ValueError(f"{Fv.M} forcing signals for {M} bubbles")
    if M > 1 and not cd.tau_min > dt:
        raise ValueError(f"dt = {dt:.3g} must be below the smallest delay "
                         f"{cd.tau_min:.3g}")
    w2 = cd.omega_M ** 2
    Fa = Fv.values
    Y = np.zeros((M, n))
    dY = np.zeros((M, n))
    ddY = np.zeros((M, n))
    q = np.array(cd.q)
    coupled = M > 1 and np.any(q != 0.0)
    off, frac = _stencils(cd, dt) if coupled else (None, None)
    cols = np.arange(M)[None, :].repeat(M, axis=0)
    scale = float(np.max(np.abs(Fa))) * (1.0 + grid.t_end / cd.omega_M)
    limit = growth_limit * scale if scale > 0 else np.inf

    def delayed(k, s):
        if not coupled:
            return 0.0
        i0 = k + off[s]
        a = np.where(i0 >= 0, ddY[cols, np.maximum(i0, 0)], 0.0)
        b = np.where(i0 + 1 >= 0, ddY[cols, np.maximum(i0 + 1, 0)], 0.0)
        vals = (1.0 - frac[s]) * a + frac[s] * b
        return np.sum(q * vals, axis=1)

    ddY[:, 0] = (Fa[:, 0] - Y[:, 0] - delayed(0, 0)) / w2
    for k in range(n - 1):
        f0 = Fa[:, k]
        f1 = Fa[:, k + 1]
        fh = 0.5 * (f0 + f1)
        d0 = delayed(k, 0)
        dh = delayed(k, 1)
        d1 = delayed(k, 2)
        y, v = Y[:, k], dY[:, k]
        a1 = (f0 - y - d0) / w2
        y2 = y + 0.5 * dt * v
        v2 = v + 0.5 * dt * a1
        a2 = (fh - y2 - dh) / w2
        y3 = y + 0.5 * dt * v2
        v3 = v + 0.5 * dt * a2
        a3 = (fh - y3 - dh) / w2
        y4 = y + dt * v3
        v4 = v + dt * a3
        a4 = (f1 - y4 - d1) / w2
        Y[:, k + 1] = y + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        dY[:, k + 1] = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        ddY[:, k + 1] = (f1 - Y[:, k + 1] - d1) / w2
        if k % check_every == 0 or k == n - 2:
            peak = float(np.max(np.abs(Y[:, k + 1])))
            if not np.isfinite(peak) or peak > limit:
                raise DdeDivergence(
                    f"amplitudes diverged at t = {(k + 1) * dt:.6g} s "
                    f"(max |Y| = {peak:.3g}, threshold {limit:.3g})",
                    (k + 1) * dt, peak)
    out = VectorSignal(grid, Y if derivative == 0 else ddY)
    if return_state:
        return out, DdeState(Y, dY, ddY, n - 1)
    return out
