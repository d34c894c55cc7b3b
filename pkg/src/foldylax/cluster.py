"""Physical scene and the coefficients of the delayed amplitude system.

A cluster of ``M`` small bubbles of radius scale ``epsilon`` sits in a
homogeneous background.  Each bubble amplitude ``Y_i`` obeys

    omega_M**2 Y_i'' + Y_i + sum_{j != i} q_ij Y_j''(t - tau_ij) = F_i(t)

with ``q_ij = C_j / (4 pi |z_i - z_j|)`` and ``tau_ij = |z_i - z_j| / c0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class GeometryError(ValueError):
    """Invalid bubble geometry (coincident centers, bad scales)."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _uniform(value, name):
    """Collapse a scalar-or-per-bubble parameter to one scalar."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if not np.allclose(arr, arr[0], rtol=1e-12, atol=0.0):
        raise ValueError(
            f"{name} differs between bubbles; coupling derivation assumes "
            "identical bubbles")
    return float(arr[0])


@dataclass(frozen=True)
class MaterialParams:
    """Background and (rescaled) bubble material constants, SI units.

    ``kappa_b_bar`` may be a scalar or one value per bubble.  The data
    model keeps heterogeneity but :func:`derive_coupling` requires the
    values to coincide.
    """

    rho_c: float
    kappa_c: float
    kappa_b_bar: Union[float, Sequence[float]]
    rho_b_bar: Union[float, Sequence[float]] = 1.2
    gamma_poly: float = 1.4
    P0: float = 1.0e5

    def __post_init__(self):
        for name in ("rho_c", "kappa_c", "kappa_b_bar", "rho_b_bar",
                     "gamma_poly", "P0"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def c0(self) -> float:
        """Background wave speed sqrt(kappa_c / rho_c)."""
        return float(np.sqrt(self.kappa_c / self.rho_c))


@dataclass(frozen=True)
class BubbleCluster:
    """Bubble centers and scale parameters.

    Parameters
    ----------
    centers : array_like, shape (M, 3)
        Bubble centers in metres.
    epsilon : float
        Radius scale.
    p_exponent : float
        Distance scaling exponent, ``d = d_tilde * epsilon**p``.
    d_tilde : float, optional
        Distance prefactor.  Defaults to ``d_min / epsilon**p``.
    vol_B : float or sequence
        Volume of the unit reference shape (``4 pi / 3`` for a sphere).
    Lambda_dB, lambda1_3 : float, optional
        Geometric constants of the reference shape, user supplied.
    d0_scale : float, optional
        Divisor used to form the epsilon-free distances ``d0_ij``.
        Defaults to ``epsilon**p``.
    """

    centers: np.ndarray
    epsilon: float
    p_exponent: float = 0.0
    d_tilde: Optional[float] = None
    vol_B: Union[float, Sequence[float]] = 4.0 * np.pi / 3.0
    Lambda_dB: Optional[float] = None
    lambda1_3: Optional[float] = None
    d0_scale: Optional[float] = None

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if z.ndim != 2 or z.shape[1] != 3 or z.shape[0] < 1:
            raise GeometryError("centers must have shape (M, 3) with M >= 1")
        if not np.all(np.isfinite(z)):
            raise GeometryError("centers must be finite")
        object.__setattr__(self, "centers", _readonly(z))
        if not self.epsilon > 0:
            raise GeometryError("epsilon must be positive")
        if not 0.0 <= self.p_exponent < 1.0:
            raise GeometryError("p_exponent must lie in [0, 1)")
        d = self.distances
        off = d[~np.eye(self.M, dtype=bool)]
        if off.size and np.min(off) <= 0.0:
            i, j = np.argwhere((d <= 0) & ~np.eye(self.M, dtype=bool))[0]
            raise GeometryError(
                f"bubbles {i + 1} and {j + 1} have coincident centers")
        if self.d_tilde is not None and not self.d_tilde > 0:
            raise GeometryError("d_tilde must be positive")
        if self.d0_scale is not None and not self.d0_scale > 0:
            raise GeometryError("d0_scale must be positive")

    @property
    def M(self) -> int:
        return self.centers.shape[0]

    @property
    def distances(self) -> np.ndarray:
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    @property
    def d_min(self) -> float:
        """Smallest center separation (inf for a single bubble)."""
        if self.M < 2:
            return float("inf")
        d = self.distances
        return float(np.min(d[~np.eye(self.M, dtype=bool)]))

    @property
    def resolved_d_tilde(self) -> float:
        if self.d_tilde is not None:
            return float(self.d_tilde)
        return self.d_min / self.epsilon ** self.p_exponent

    @property
    def resolved_d0_scale(self) -> float:
        if self.d0_scale is not None:
            return float(self.d0_scale)
        return self.epsilon ** self.p_exponent

    def translated(self, shift) -> "BubbleCluster":
        from dataclasses import replace
        return replace(self, centers=self.centers + np.asarray(shift, float))


@dataclass(frozen=True)
class CouplingData:
    """Coefficients of the amplitude system.

    ``omega_M`` is a time constant in seconds so that ``omega_M**2 d^2/dt^2``
    is dimensionless; the resonance angular frequency is ``1 / omega_M``.
    """

    omega_M: float
    c0: float
    C: np.ndarray
    C0: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    q0: np.ndarray
    epsilon: float
    p_exponent: float
    d_tilde: float
    distances: np.ndarray = field(repr=False)
    d0: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.q.shape[0]

    @property
    def omega_res(self) -> float:
        return 1.0 / self.omega_M

    @property
    def tau_min(self) -> float:
        if self.M < 2:
            return float("inf")
        return float(np.min(self.tau[~np.eye(self.M, dtype=bool)]))

    def rational_factor(self, sigma0: float) -> float:
        """sigma0**2 / (omega_M**2 sigma0**2 - 1), the sup of |s^2/(w^2 s^2+1)|."""
        den = self.omega_M ** 2 * sigma0 ** 2 - 1.0
        if den <= 0:
            raise ValueError("sigma0 must exceed 1/omega_M")
        return sigma0 ** 2 / den

    def to_dict(self) -> dict:
        return {
            "omega_M": self.omega_M,
            "omega_res": self.omega_res,
            "c0": self.c0,
            "epsilon": self.epsilon,
            "p_exponent": self.p_exponent,
            "d_tilde": self.d_tilde,
            "C": self.C.tolist(),
            "C0": self.C0.tolist(),
            "q": self.q.tolist(),
            "q0": self.q0.tolist(),
            "tau": self.tau.tolist(),
            "distances": self.distances.tolist(),
            "d0": self.d0.tolist(),
        }


def minnaert_frequency(epsilon: float, mat: MaterialParams) -> float:
    """Minnaert resonance frequency in Hz for a bubble of radius ``epsilon``."""
    return np.sqrt(3.0 * mat.gamma_poly * mat.P0 / mat.rho_c) / (
        2.0 * np.pi * epsilon)


def derive_coupling(cluster: BubbleCluster, mat: MaterialParams,
                    omega_mode: Union[str, float] = "minnaert") -> CouplingData:
    """Derive ``q``, ``tau``, ``C`` and ``omega_M`` for a cluster.

    Parameters
    ----------
    omega_mode : {"minnaert", "lambda"} or float
        ``"minnaert"`` uses ``omega_M = 1/(2 pi f)`` with the Minnaert
        frequency ``f``; ``"lambda"`` uses
        ``omega_M = sqrt(rho_c Lambda_dB / (2 kappa_b_bar))``; a number is
        taken as ``omega_M`` directly.
    """
    kb = _uniform(mat.kappa_b_bar, "kappa_b_bar")
    vol = _uniform(cluster.vol_B, "vol_B")
    if isinstance(omega_mode, str):
        mode = omega_mode.lower()
        if mode == "minnaert":
            omega_M = 1.0 / (2.0 * np.pi * minnaert_frequency(cluster.epsilon, mat))
        elif mode == "lambda":
            if cluster.Lambda_dB is None:
                raise ValueError("omega_mode 'lambda' needs cluster.Lambda_dB")
            omega_M = float(np.sqrt(mat.rho_c * cluster.Lambda_dB / (2.0 * kb)))
        else:
            raise ValueError(f"unknown omega_mode {omega_mode!r}")
    else:
        omega_M = float(omega_mode)
        if not omega_M > 0:
            raise ValueError("explicit omega_M must be positive")

    M = cluster.M
    c0 = mat.c0
    C0 = np.full(M, mat.rho_c / kb * vol)
    C = C0 * cluster.epsilon
    d = cluster.distances
    off = ~np.eye(M, dtype=bool)
    q = np.zeros((M, M))
    q[off] = (C[None, :] / (4.0 * np.pi * np.where(off, d, 1.0)))[off]
    d0 = d / cluster.resolved_d0_scale
    q0 = np.zeros((M, M))
    q0[off] = (C0[None, :] / (4.0 * np.pi * np.where(off, d0, 1.0)))[off]
    tau = d / c0
    return CouplingData(
        omega_M=omega_M, c0=c0, C=_readonly(C), C0=_readonly(C0),
        q=_readonly(q), tau=_readonly(tau), q0=_readonly(q0),
        epsilon=float(cluster.epsilon), p_exponent=float(cluster.p_exponent),
        d_tilde=cluster.resolved_d_tilde if M > 1 else float("inf"),
        distances=_readonly(d), d0=_readonly(d0))


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a sufficient-condition check: ``satisfied = lhs < rhs``."""

    lhs: float
    rhs: float
    satisfied: bool
    reason: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied,
                "reason": self.reason, **self.details}


def alpha_inf(cd: CouplingData, sigma0: float, *, verbatim: bool = False) -> float:
    """Epsilon-free contraction constant of the coupling operator.

    The default carries the ``1/(4 pi)`` of ``q_ij`` so that
    ``alpha_inf * epsilon**(1-p)`` bounds the max-row-sum norm of ``T`` on
    ``Re s = sigma0``.  ``verbatim=True`` drops that factor.
    """
    if cd.M < 2:
        return 0.0
    val = sigma0 ** 2 * (cd.M - 1) * float(np.max(cd.C0)) / (
        cd.d_tilde * (cd.omega_M ** 2 * sigma0 ** 2 - 1.0))
    return val if verbatim else val / (4.0 * np.pi)


def check_neumann_condition(cd: CouplingData, sigma0: float,
                            epsilon: Optional[float] = None,
                            p: Optional[float] = None) -> ConditionReport:
    """Sufficient condition for the Neumann series on ``Re s = sigma0``.

    ``lhs`` is the max row sum of ``q`` and
    ``rhs = omega_M**2 (1 - 1/(omega_M**2 sigma0**2))``.
    """
    eps = cd.epsilon if epsilon is None else float(epsilon)
    pp = cd.p_exponent if p is None else float(p)
    lhs = float(np.max(np.sum(cd.q, axis=1))) if cd.M > 1 else 0.0
    wm2s2 = cd.omega_M ** 2 * sigma0 ** 2
    rhs = cd.omega_M ** 2 * (1.0 - 1.0 / wm2s2)
    if wm2s2 <= 1.0:
        return ConditionReport(lhs, rhs, False, "sigma below resonance threshold",
                               {"sigma0": sigma0})
    factor = sigma0 ** 2 / (wm2s2 - 1.0)
    a_inf = alpha_inf(cd, sigma0)
    details = {
        "sigma0": sigma0,
        "rational_factor": factor,
        "alpha_envelope": factor * lhs,
        "alpha_inf": a_inf,
        "alpha_inf_verbatim": alpha_inf(cd, sigma0, verbatim=True),
        "alpha_eps": a_inf * eps ** (1.0 - pp),
    }
    ok = lhs < rhs
    return ConditionReport(lhs, rhs, ok, "" if ok else "coupling too strong",
                           details)


def check_inversion_condition(cluster: BubbleCluster, mat: MaterialParams,
                              cd: Optional[CouplingData] = None
                              ) -> Optional[ConditionReport]:
    """Conditions under which the amplitude system is a valid reduction.

    Returns ``None`` when ``lambda1_3`` is not supplied.  ``lhs``/``rhs``
    report the first condition; the second is in ``details``.  The
    separation ``d`` is the minimal center distance.
    """
    if cluster.lambda1_3 is None:
        return None
    if cd is None:
        cd = derive_coupling(cluster, mat)
    vol = _uniform(cluster.vol_B, "vol_B")
    d = cluster.d_min
    lhs1 = mat.rho_c / (4.0 * np.pi) * vol * (cluster.epsilon / d) ** 6 \
        / cluster.lambda1_3 ** 2 if np.isfinite(d) else 0.0
    row = float(np.max(np.sum(cd.q, axis=1))) if cd.M > 1 else 0.0
    ok1 = lhs1 < 1.0
    ok2 = row < cd.omega_M ** 2
    reason = "" if ok1 and ok2 else (
        "first condition fails" if not ok1 else "second condition fails")
    return ConditionReport(lhs1, 1.0, ok1 and ok2, reason, {
        "first_satisfied": ok1,
        "second_lhs": row,
        "second_rhs": cd.omega_M ** 2,
        "second_satisfied": ok2,
    })


def sphere_lambda_db(radius: float = 1.0, rtol: float = 1e-4,
                     n_theta: int = 8, max_level: int = 12) -> float:
    """Midpoint-rule value of Lambda for a sphere.

    Evaluates ``|dB|^-1 int int (x - y).n_x / |x - y| ds_x ds_y`` on a
    lat-long mesh, refining until the relative change drops below
    ``rtol``.  Rotational symmetry makes the inner integral independent of
    ``x``, so ``x`` is pinned to the north pole.
    """
    prev = None
    for _ in range(max_level):
        n_phi = 2 * n_theta
        th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
        ph = (np.arange(n_phi) + 0.5) * 2.0 * np.pi / n_phi
        T, P = np.meshgrid(th, ph, indexing="ij")
        y = radius * np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P),
                               np.cos(T)], axis=-1)
        x = np.array([0.0, 0.0, radius])
        nx = x / radius
        diff = x - y
        dist = np.linalg.norm(diff, axis=-1)
        integrand = (diff @ nx) / dist
        dA = radius ** 2 * np.sin(T) * (np.pi / n_theta) * (2 * np.pi / n_phi)
        val = float(np.sum(integrand * dA))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        n_theta *= 2
    raise RuntimeError("sphere quadrature did not converge")
