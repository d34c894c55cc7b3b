"""Time-domain Neumann series for the delayed amplitude system.

The coupling kernel is

    K_ij(t) = q_ij [ delta(t - tau_ij) / omega_M^2
                     - sin((t - tau_ij) / omega_M) 1_{t >= tau_ij} / omega_M^3 ]

so ``(K * W)_i = sum_j q_ij (R W_j)(t - tau_ij)`` where ``R`` is the same
operator that maps the forcing ``F`` to ``V``:

    (R f)(t) = f(t) / omega_M^2 - (1/omega_M^3) int_0^t sin((t - r)/omega_M) f(r) dr
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .cluster import CouplingData, alpha_inf
from .parallel import pmap
from .signal import (GridMismatchError, SignalLike, TimeGrid, VectorSignal,
                     as_vector, hrs_norm)

FFT_THRESHOLD = 4096


class BoundInapplicable(ValueError):
    """The hypotheses of the remainder estimate do not hold."""


class TailWarning(RuntimeWarning):
    """The reference partial sum still has a non-negligible tail."""


def sine_convolution(x: np.ndarray, dt: float, omega_M: float,
                     method: str = "auto") -> np.ndarray:
    """Trapezoid values of ``int_0^{t_k} sin((t_k - r)/omega_M) x(r) dr``.

    ``x`` may be 1-D or ``(M, n)``; convolution runs along the last axis.
    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (FFT above
    ``FFT_THRESHOLD`` samples).
    """
    x = np.asarray(x, float)
    one = x.ndim == 1
    X = x[None, :] if one else x
    n = X.shape[1]
    s = np.sin(np.arange(n) * dt / omega_M)
    if method == "auto":
        method = "fft" if n > FFT_THRESHOLD else "direct"
    if method == "direct":
        conv = np.stack([np.convolve(row, s)[:n] for row in X])
    elif method == "fft":
        L = 1 << int(2 * n - 2).bit_length()
        conv = np.fft.irfft(np.fft.rfft(X, L, axis=1) * np.fft.rfft(s, L)[None, :], L,
                            axis=1)[:, :n]
    else:
        raise ValueError(f"unknown method {method!r}")
    # trapezoid end corrections: the r = t_k end carries sin(0) = 0
    out = dt * (conv - 0.5 * s[None, :] * X[:, :1])
    return out[0] if one else out


def r_operator(values: np.ndarray, dt: float, omega_M: float,
               method: str = "auto") -> np.ndarray:
    return values / omega_M ** 2 - sine_convolution(values, dt, omega_M, method) / omega_M ** 3


def compute_V(F: SignalLike, omega_M: float, method: str = "auto") -> VectorSignal:
    """Right-hand side ``V`` of the Neumann series from the forcing ``F``."""
    Fv = as_vector(F)
    return VectorSignal(Fv.grid, r_operator(Fv.values, Fv.grid.dt, omega_M, method))


def delay(x: np.ndarray, tau: float, dt: float) -> np.ndarray:
    """``x(t - tau)`` by linear interpolation, zero for ``t < tau``."""
    n = x.shape[-1]
    shift = tau / dt
    m = int(np.floor(shift))
    f = shift - m
    out = np.zeros_like(x)
    if m < n:
        out[..., m:] += (1.0 - f) * x[..., : n - m]
    if m + 1 < n and f > 0.0:
        out[..., m + 1:] += f * x[..., : n - m - 1]
    return out


@dataclass(frozen=True)
class KernelSpec:
    """Atomic and continuous parts of the coupling kernel."""

    cd: CouplingData
    conv_method: str = "auto"

    @property
    def atom_weights(self) -> np.ndarray:
        return self.cd.q / self.cd.omega_M ** 2

    @property
    def atom_delays(self) -> np.ndarray:
        return self.cd.tau

    def continuous(self, t) -> np.ndarray:
        """``k_ij(t)`` with shape ``t.shape + (M, M)``."""
        t = np.asarray(t, float)[..., None, None]
        w = self.cd.omega_M
        u = t - self.cd.tau
        return np.where(u >= 0, -(self.cd.q / w ** 3) * np.sin(u / w), 0.0)


def _as_spec(spec: Union[KernelSpec, CouplingData]) -> KernelSpec:
    return spec if isinstance(spec, KernelSpec) else KernelSpec(spec)


def apply_K(spec: Union[KernelSpec, CouplingData], W: SignalLike) -> VectorSignal:
    """One application of the coupling convolution ``K * W``."""
    spec = _as_spec(spec)
    cd = spec.cd
    Wv = as_vector(W)
    if Wv.M != cd.M:
        raise GridMismatchError(f"{Wv.M} signals for {cd.M} bubbles")
    dt = Wv.grid.dt
    G = r_operator(Wv.values, dt, cd.omega_M, spec.conv_method)

    def row(i):
        acc = np.zeros(Wv.grid.n)
        for j in range(cd.M):
            if j != i and cd.q[i, j] != 0.0:
                acc += cd.q[i, j] * delay(G[j], cd.tau[i, j], dt)
        return acc

    return VectorSignal(Wv.grid, np.array(pmap(row, range(cd.M))))


@dataclass
class NeumannSolution:
    """Terms ``W_n = K^{*n} * V`` and their weighted norms."""

    grid: TimeGrid
    terms: List[VectorSignal] = field(repr=False)
    term_norms: np.ndarray
    r: int
    sigma: float
    stop_reason: str = ""

    @property
    def N(self) -> int:
        return len(self.terms) - 1

    def partial(self, N: Optional[int] = None) -> VectorSignal:
        """``Y^N = sum_{n=0}^{N} (-1)^n W_n``."""
        N = self.N if N is None else N
        if not 0 <= N <= self.N:
            raise ValueError(f"N={N} outside the available 0..{self.N}")
        acc = np.zeros_like(self.terms[0].values)
        for n in range(N + 1):
            acc += (-1) ** n * self.terms[n].values
        return VectorSignal(self.grid, acc)

    @property
    def ratios(self) -> np.ndarray:
        a = self.term_norms
        with np.errstate(divide="ignore", invalid="ignore"):
            r = a[1:] / a[:-1]
        return r[np.isfinite(r)]

    @property
    def non_decaying(self) -> bool:
        """True when some term norm fails to shrink."""
        return bool(np.any(self.ratios >= 1.0))

    def dump(self, outdir) -> None:
        os.makedirs(outdir, exist_ok=True)
        for n, W in enumerate(self.terms):
            for i, sig in enumerate(W):
                sig.to_csv(os.path.join(outdir, f"term_{n}_bubble_{i + 1}.csv"))
        with open(os.path.join(outdir, "norms.csv"), "w", newline="") as fh:
            fh.write("n,term_norm\n")
            for n, v in enumerate(self.term_norms):
                fh.write(f"{n},{'%.17g' % v}\n")


def neumann_solve(spec: Union[KernelSpec, CouplingData], V: SignalLike,
                  N: Union[int, str] = "auto", r: int = 0,
                  sigma: Optional[float] = None, tol: float = 1e-8,
                  n_max: int = 200) -> NeumannSolution:
    """Build ``W_{n+1} = K * W_n`` up to order ``N``.

    With ``N="auto"`` the recursion stops once
    ``term_norms[n] < tol * term_norms[0]``, when a term vanishes on the
    horizon, when the norms blow up past ``1e8`` times the first, or at
    ``n_max``.
    """
    spec = _as_spec(spec)
    Vv = as_vector(V)
    if sigma is None:
        sigma = 1.5 / spec.cd.omega_M
    auto = isinstance(N, str)
    if auto and N != "auto":
        raise ValueError(f"N must be an integer or 'auto', not {N!r}")
    if not auto and int(N) < 0:
        raise ValueError("N must be non-negative")
    limit = n_max if auto else int(N)
    terms = [Vv]
    norms = [hrs_norm(Vv, r, sigma)]
    reason = "order reached"
    while len(terms) - 1 < limit:
        if auto:
            if norms[-1] <= tol * norms[0]:
                reason = "tolerance reached"
                break
            if norms[-1] > 1e8 * norms[0]:
                reason = "diverging"
                break
        terms.append(apply_K(spec, terms[-1]))
        norms.append(hrs_norm(terms[-1], r, sigma))
    else:
        if auto:
            reason = "n_max reached" if norms[-1] > tol * norms[0] else "tolerance reached"
    if auto and norms[0] == 0.0:
        reason = "zero input"
    return NeumannSolution(Vv.grid, terms, np.array(norms), r, sigma, reason)


def remainder_bound(cd: CouplingData, sigma0: float, N: int, forcing_norm: float,
                    epsilon: Optional[float] = None, p: Optional[float] = None,
                    alpha: Optional[float] = None) -> float:
    """Theoretical bound on the norm of the remainder after order ``N``.

    ``alpha`` overrides the epsilon-free constant from
    :func:`foldylax.cluster.alpha_inf`.
    """
    eps = cd.epsilon if epsilon is None else float(epsilon)
    pp = cd.p_exponent if p is None else float(p)
    if cd.omega_M ** 2 * sigma0 ** 2 <= 1.0:
        raise BoundInapplicable("omega_M^2 sigma0^2 must exceed 1")
    a = alpha_inf(cd, sigma0) if alpha is None else float(alpha)
    ae = a * eps ** (1.0 - pp)
    if ae >= 1.0:
        raise BoundInapplicable(f"alpha_inf * eps^(1-p) = {ae:.4g} is not below 1")
    if forcing_norm == 0.0:
        return 0.0
    return (a ** (N + 1) / (1.0 - ae) * eps ** ((N + 1) * (1.0 - pp))
            * cd.rational_factor(sigma0) * forcing_norm)


def tail_sum(sol: NeumannSolution, N: int) -> VectorSignal:
    """``Y^{N_ref} - Y^N`` with ``N_ref = sol.N``."""
    acc = np.zeros_like(sol.terms[0].values)
    for n in range(N + 1, sol.N + 1):
        acc += (-1) ** n * sol.terms[n].values
    return VectorSignal(sol.grid, acc)


def empirical_remainder(sol: NeumannSolution, N: int, r: Optional[int] = None,
                        sigma: Optional[float] = None,
                        tail_tol: float = 1e-3) -> float:
    """Norm of ``Y^{N_ref} - Y^N`` using the longest available sum as reference.

    Warns with :class:`TailWarning` when the last stored term is not small
    compared with the first.
    """
    if N > sol.N:
        raise ValueError(f"N={N} exceeds the reference order {sol.N}")
    r = sol.r if r is None else r
    sigma = sol.sigma if sigma is None else sigma
    if N == sol.N:
        return 0.0
    if sol.term_norms[-1] >= tail_tol * sol.term_norms[0]:
        warnings.warn(
            f"tail not negligible: term {sol.N} has relative norm "
            f"{sol.term_norms[-1] / sol.term_norms[0]:.3g}", TailWarning, stacklevel=2)
    return hrs_norm(tail_sum(sol, N), r, sigma)
