"""Scattered fields at observation points and epsilon-scaling studies.

The truncated field is the retarded superposition

    u^{sc,N}(x, t) = - sum_m C_m / (4 pi |x - z_m|) Y^N_m(t - |x - z_m| / c0).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cluster import BubbleCluster, CouplingData, MaterialParams, derive_coupling
from .kernel import compute_V, delay, neumann_solve, tail_sum
from .signal import (CausalSignal, PulseSpec, TimeGrid, VectorSignal,
                     forcing_vector, hrs_norm)


@dataclass(frozen=True)
class Observation:
    """Observation point with its distances to the bubble centers."""

    x: np.ndarray
    distances: np.ndarray = field(repr=False)

    @classmethod
    def at(cls, x, cluster: BubbleCluster, min_distance: Optional[float] = None
           ) -> "Observation":
        """Build an observation at ``x``.

        ``min_distance`` (default ``epsilon``) is the exclusion radius
        around every center.
        """
        x = np.asarray(x, float)
        d = np.linalg.norm(cluster.centers - x[None, :], axis=1)
        lim = cluster.epsilon if min_distance is None else min_distance
        if np.any(d <= lim):
            raise ValueError(
                f"observation point within {lim:.3g} m of bubble {int(np.argmin(d)) + 1}")
        return cls(x, d)

    @property
    def d_min(self) -> float:
        return float(np.min(self.distances))

    @property
    def d_max(self) -> float:
        return float(np.max(self.distances))


def _retarded_sum(values: np.ndarray, cd: CouplingData, obs: Observation,
                  grid: TimeGrid) -> np.ndarray:
    if len(obs.distances) != cd.M:
        raise ValueError("observation built for a different cluster")
    acc = np.zeros(grid.n)
    for m in range(cd.M):
        r = obs.distances[m]
        acc -= cd.C[m] / (4.0 * np.pi * r) * delay(values[m], r / cd.c0, grid.dt)
    return acc


def field_from_amplitudes(Y: VectorSignal, cd: CouplingData, obs: Observation) -> CausalSignal:
    """Scattered field generated by given amplitudes ``Y``."""
    return CausalSignal(Y.grid, _retarded_sum(Y.values, cd, obs, Y.grid))


def scattered_field(sol, cd: CouplingData, obs: Observation, N: Optional[int] = None
                    ) -> CausalSignal:
    """Field of the partial sum ``Y^N`` (default: all stored terms)."""
    return field_from_amplitudes(sol.partial(N), cd, obs)


def field_difference(sol, cd: CouplingData, obs: Observation, N: int,
                     r: Optional[int] = None, sigma: Optional[float] = None
                     ) -> Tuple[CausalSignal, float]:
    """``u^{sc,N} - u^{sc,N-1}`` built from the single term ``W_N``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if N > sol.N:
        raise ValueError(f"term {N} not available (solution has {sol.N})")
    r = sol.r if r is None else r
    sigma = sol.sigma if sigma is None else sigma
    sig = CausalSignal(sol.grid, (-1) ** N * _retarded_sum(
        sol.terms[N].values, cd, obs, sol.grid))
    return sig, hrs_norm(sig, r, sigma)


def remainder_field(sol, cd: CouplingData, obs: Observation, N: int,
                    r: Optional[int] = None, sigma: Optional[float] = None
                    ) -> Tuple[CausalSignal, float]:
    """``u^{sc} - u^{sc,N}`` with the longest stored sum as ``u^{sc}``."""
    r = sol.r if r is None else r
    sigma = sol.sigma if sigma is None else sigma
    sig = field_from_amplitudes(tail_sum(sol, N), cd, obs)
    return sig, hrs_norm(sig, r, sigma)


# --------------------------------------------------------------------------
# scaling study

@dataclass
class ScalingStudy:
    """Norms versus epsilon and their fitted log-log slopes."""

    N: int
    p: float
    epsilons: List[float]
    diff_norms: List[float]
    remainder_norms: List[float]
    Meps2_reference: List[float]
    slope_diff: float
    residual_diff: float
    slope_remainder: float
    residual_remainder: float

    @property
    def expected_diff(self) -> float:
        return self.N * (1.0 - self.p) + 1.0

    @property
    def expected_remainder(self) -> float:
        return (self.N + 1) * (1.0 - self.p) + 1.0

    def passes(self, rel_tol: float = 0.1) -> Tuple[bool, bool]:
        return (abs(self.slope_diff - self.expected_diff) <= rel_tol * self.expected_diff,
                abs(self.slope_remainder - self.expected_remainder)
                <= rel_tol * self.expected_remainder)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "diff_norm", "remainder_norm", "Meps2_reference"])
            for row in zip(self.epsilons, self.diff_norms, self.remainder_norms,
                           self.Meps2_reference):
                w.writerow(["%.17g" % v for v in row])

    def summary(self, rel_tol: float = 0.1) -> dict:
        ok_d, ok_r = self.passes(rel_tol)
        return {
            "N": self.N, "p": self.p,
            "slope_diff": self.slope_diff, "residual_diff": self.residual_diff,
            "expected_diff": self.expected_diff, "pass_diff": ok_d,
            "slope_remainder": self.slope_remainder,
            "residual_remainder": self.residual_remainder,
            "expected_remainder": self.expected_remainder, "pass_remainder": ok_r,
            "rel_tol": rel_tol,
        }

    def to_json(self, path, rel_tol: float = 0.1) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(rel_tol), fh, indent=2, sort_keys=True)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and the RMS residual."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0) or np.ptp(np.log(x)) == 0:
        raise ValueError("degenerate fit: need positive values at distinct abscissae")
    A = np.vstack([np.log(x), np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    res = np.log(y) - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def epsilon_scaling_study(template: np.ndarray, eps_list: Sequence[float], p: float,
                          N: int, obs_x, x0, pulse: PulseSpec, mat: MaterialParams,
                          grid: TimeGrid, sigma: float, omega_M: float, r: int = 0,
                          n_ref: Optional[int] = None, vol_B: float = 4.0 * np.pi / 3.0,
                          ) -> ScalingStudy:
    """Fit the epsilon exponents of the order-``N`` difference and remainder.

    Centers are ``template * eps**p``.  ``omega_M`` is held fixed (explicit)
    across the sweep; ``n_ref`` is the order of the reference sum used for
    the remainder (default ``N + 6``).
    """
    eps = np.asarray(sorted(eps_list), float)
    if eps.size < 4:
        raise ValueError("a scaling study needs at least four epsilon values")
    if eps[-1] / eps[0] < 10.0 * (1 - 1e-9):
        raise ValueError("epsilon values must span at least one decade")
    n_ref = N + 6 if n_ref is None else n_ref
    template = np.asarray(template, float)
    diffs, rems, ref = [], [], []
    for e in eps:
        cl = BubbleCluster(template * e ** p, float(e), p, vol_B=vol_B)
        cd = derive_coupling(cl, mat, omega_M)
        F = forcing_vector(cl, x0, pulse, mat, grid)
        V = compute_V(F, omega_M)
        sol = neumann_solve(cd, V, n_ref, r, sigma)
        obs = Observation.at(obs_x, cl)
        diffs.append(field_difference(sol, cd, obs, N)[1])
        rems.append(remainder_field(sol, cd, obs, N)[1])
        ref.append(cl.M * e ** 2)
    sd, rd = fit_slope(eps, diffs)
    sr, rr = fit_slope(eps, rems)
    return ScalingStudy(N, p, eps.tolist(), diffs, rems, ref, sd, rd, sr, rr)
