"""Frequency-side oracle on a Bromwich line ``Re s = sigma``.

Transforms use the trapezoid rule in time.  When the frequency grid is
the FFT grid of a time grid, forward and inverse transforms run through
``numpy.fft`` and round-trip exactly up to truncation of the signal.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cluster import CouplingData
from .signal import CausalSignal, TimeGrid, VectorSignal, as_vector


class PoleProximityError(ValueError):
    """A sample sits too close to a zero of ``omega_M^2 s^2 + 1``."""


class SingularTransferError(np.linalg.LinAlgError):
    """``I + T`` is numerically singular at some frequency."""


def _next_pow2(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n, 1))))


@dataclass(frozen=True)
class FrequencyGrid:
    """Samples ``s_k = sigma + i omega_k``.

    Grids built with :meth:`for_time_grid` store ``omegas`` in FFT order
    and remember ``dt`` so that transforms can use the FFT.
    """

    sigma: float
    omegas: np.ndarray = field(repr=False)
    dt: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        w = np.array(self.omegas, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def for_time_grid(cls, grid: TimeGrid, sigma: float, pad: int = 2) -> "FrequencyGrid":
        """FFT grid with ``n_freq = next_pow2(pad * n)`` and ``Omega = pi/dt``."""
        nf = _next_pow2(pad * grid.n)
        return cls(sigma, 2.0 * np.pi * np.fft.fftfreq(nf, grid.dt), grid.dt)

    @property
    def n_freq(self) -> int:
        return self.omegas.size

    @property
    def s(self) -> np.ndarray:
        return self.sigma + 1j * self.omegas

    @property
    def is_fft(self) -> bool:
        return self.dt is not None

    @property
    def d_omega(self) -> float:
        if self.is_fft:
            return 2.0 * np.pi / (self.n_freq * self.dt)
        return float(np.mean(np.diff(np.sort(self.omegas))))

    def check_resolution(self, grid: TimeGrid) -> None:
        if np.max(np.abs(self.omegas)) < 0.5 * np.pi / grid.dt:
            warnings.warn("frequency window below half the grid Nyquist rate",
                          RuntimeWarning, stacklevel=2)


def oracle_sigma(grid: TimeGrid, sigma: float, max_sigma_t: float = 10.0) -> float:
    """Abscissa for FFT inversion on ``grid``.

    The inverse multiplies by ``exp(sigma t)``, so ``sigma * t_end`` beyond
    a few tens loses every digit.  Any positive abscissa is valid for a
    causal stable response; with the default padding the wrap-around error
    is of order ``exp(-2 * max_sigma_t)``.
    """
    return min(sigma, max_sigma_t / grid.t_end)


def _trap_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def forward(f, fg: FrequencyGrid) -> np.ndarray:
    """Laplace transform of a signal (or each row of a vector signal).

    Returns shape ``(n_freq,)`` for a :class:`CausalSignal` and
    ``(n_freq, M)`` for a :class:`VectorSignal`.
    """
    scalar = isinstance(f, CausalSignal)
    vec = as_vector(f)
    grid = vec.grid
    t = grid.times
    fft_ok = (fg.is_fft and abs(fg.dt - grid.dt) <= 1e-12 * grid.dt
              and fg.n_freq >= grid.n)
    w = _trap_weights(grid.n)
    if fft_ok:
        # the horizon sample keeps full weight so that inverse(forward(f))
        # reproduces f(T) instead of the midpoint of the jump to zero
        w[-1] = 1.0
    g = vec.values * (np.exp(-fg.sigma * t) * w)[None, :]
    if fft_ok:
        out = grid.dt * np.fft.fft(g, n=fg.n_freq, axis=1)
    else:
        out = np.empty((vec.M, fg.n_freq), dtype=complex)
        step = max(1, 2_000_000 // grid.n)
        for k in range(0, fg.n_freq, step):
            ph = np.exp(-1j * np.outer(fg.omegas[k:k + step], t))
            out[:, k:k + step] = grid.dt * (g @ ph.T)
    out = out.T
    return out[:, 0] if scalar else out


def _conj_partner(fg: FrequencyGrid) -> np.ndarray:
    return (-np.arange(fg.n_freq)) % fg.n_freq


def inverse(samples, fg: FrequencyGrid, grid: TimeGrid, sym_tol: float = 1e-8):
    """Numerical Bromwich inversion on an FFT frequency grid.

    ``samples`` has shape ``(n_freq,)`` or ``(n_freq, M)``; the result is a
    :class:`CausalSignal` or :class:`VectorSignal` accordingly.
    """
    if not fg.is_fft or abs(fg.dt - grid.dt) > 1e-12 * grid.dt:
        raise ValueError("inverse needs the FFT grid of the target time grid")
    if fg.n_freq < grid.n:
        raise ValueError("frequency grid shorter than the time grid")
    S = np.asarray(samples, dtype=complex)
    scalar = S.ndim == 1
    S2 = S[:, None] if scalar else S
    partner = S2[_conj_partner(fg)]
    scale = max(np.max(np.abs(S2)), np.finfo(float).tiny)
    # the Nyquist bin is its own partner; its imaginary part is dropped
    mask = np.ones(fg.n_freq, dtype=bool)
    if fg.n_freq % 2 == 0:
        mask[fg.n_freq // 2] = False
    asym = np.max(np.abs(partner - np.conj(S2))[mask]) / scale
    if asym > sym_tol:
        raise ValueError(f"samples are not conjugate symmetric (rel. {asym:.3g})")
    g = np.fft.ifft(S2, axis=0).real[: grid.n] / grid.dt
    vals = (g * np.exp(fg.sigma * grid.times)[:, None]).T
    vals[:, 0] = 0.0
    if scalar:
        return CausalSignal(grid, vals[0])
    return VectorSignal(grid, vals)


def rational(omega_M: float, s):
    """``s^2 / (omega_M^2 s^2 + 1)``."""
    s = np.asarray(s)
    return s ** 2 / (omega_M ** 2 * s ** 2 + 1.0)


@dataclass(frozen=True)
class TransferSamples:
    """``T(s_k)`` with shape ``(n_freq, M, M)`` and optional ``V^(s_k)``."""

    fg: FrequencyGrid
    T: np.ndarray = field(repr=False)
    V_hat: Optional[np.ndarray] = field(default=None, repr=False)

    def to_csv(self, path) -> None:
        n, M, _ = self.T.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            hdr = ["omega"]
            for i in range(M):
                for j in range(M):
                    hdr += [f"re_T{i + 1}{j + 1}", f"im_T{i + 1}{j + 1}"]
            w.writerow(hdr)
            for k in range(n):
                row = ["%.17g" % self.fg.omegas[k]]
                for z in self.T[k].reshape(-1):
                    row += ["%.17g" % z.real, "%.17g" % z.imag]
                w.writerow(row)


def eval_T(cd: CouplingData, fg: FrequencyGrid, forcing=None,
           pole_tol: float = 1e-8) -> TransferSamples:
    """Transfer matrix samples and, if ``forcing`` is given, ``V^``."""
    s = fg.s
    den = cd.omega_M ** 2 * s ** 2 + 1.0
    k = int(np.argmin(np.abs(den)))
    if abs(den[k]) < pole_tol:
        raise PoleProximityError(
            f"|omega_M^2 s^2 + 1| = {abs(den[k]):.3g} at omega = {fg.omegas[k]:.6g}")
    R = s ** 2 / den
    T = R[:, None, None] * cd.q[None] * np.exp(-s[:, None, None] * cd.tau[None])
    idx = np.arange(cd.M)
    T[:, idx, idx] = 0.0
    V_hat = None
    if forcing is not None:
        F_hat = forward(as_vector(forcing), fg)
        V_hat = R[:, None] * F_hat
    return TransferSamples(fg, T, V_hat)


def solve_freq(ts: TransferSamples, V_hat=None, cond_limit: float = 1e12) -> np.ndarray:
    """Direct solve of ``(I + T) Y^ = V^`` at every sample."""
    V = ts.V_hat if V_hat is None else np.asarray(V_hat, complex)
    if V is None:
        raise ValueError("no right-hand side supplied")
    M = ts.T.shape[1]
    A = np.eye(M)[None] + ts.T
    cond = np.linalg.cond(A)
    k = int(np.argmax(cond))
    if not np.isfinite(cond[k]) or cond[k] > cond_limit:
        raise SingularTransferError(
            f"I + T is singular at omega = {ts.fg.omegas[k]:.6g} "
            f"(condition estimate {cond[k]:.3g})")
    return np.linalg.solve(A, V[..., None])[..., 0]


def neumann_freq(ts: TransferSamples, N: int, V_hat=None) -> np.ndarray:
    """Partial sum ``sum_{n=0}^{N} (-T)^n V^``."""
    V = ts.V_hat if V_hat is None else np.asarray(V_hat, complex)
    term = V.copy()
    total = V.copy()
    for _ in range(N):
        term = -np.einsum("kij,kj->ki", ts.T, term)
        total += term
    return total


def max_row_norm(T: np.ndarray) -> np.ndarray:
    """ell-infinity induced norm of each matrix in a stack."""
    return np.max(np.sum(np.abs(T), axis=-1), axis=-1)


@dataclass(frozen=True)
class SupNorm:
    alpha: float
    envelope: float
    omega_at_max: float


def sup_norm_T(cd: CouplingData, sigma0: float, omega_cap: Optional[float] = None,
               n_omega: int = 8193) -> SupNorm:
    """Sup over ``Re s = sigma0`` of the max-row-sum norm of ``T``.

    Only ``omega >= 0`` is sampled since ``|T(sigma - i w)| = |T(sigma + i w)|``.
    The envelope ``max_i sum_j q_ij * sigma0^2/(omega_M^2 sigma0^2 - 1)`` is
    a rigorous upper bound.
    """
    if cd.omega_M * sigma0 <= 1.0:
        raise ValueError("sigma0 must exceed 1/omega_M")
    if cd.M < 2:
        return SupNorm(0.0, 0.0, 0.0)
    env = cd.rational_factor(sigma0) * float(np.max(np.sum(cd.q, axis=1)))
    cap = 50.0 / cd.omega_M if omega_cap is None else omega_cap
    fg = FrequencyGrid(sigma0, np.linspace(0.0, cap, n_omega))
    norms = max_row_norm(eval_T(cd, fg).T)
    k = int(np.argmax(norms))
    return SupNorm(float(norms[k]), env, float(fg.omegas[k]))


def rational_factor_sup(omega_M: float, sigma0: float, n_omega: int = 20001) -> float:
    """Sampled sup of ``|s^2/(omega_M^2 s^2+1)|`` on ``Re s = sigma0``."""
    w = np.linspace(0.0, 100.0 / omega_M, n_omega)
    return float(np.max(np.abs(rational(omega_M, sigma0 + 1j * w))))


def h_norm_freq(samples, fg: FrequencyGrid, r: int = 0) -> float:
    """Frequency-side norm ``(1/2pi) int (sigma^2+omega^2)^r |f^|^2 d omega``.

    Vector samples of shape ``(n_freq, M)`` use the Euclidean norm per
    sample.
    """
    S = np.asarray(samples)
    mag2 = np.abs(S) ** 2
    if mag2.ndim == 2:
        mag2 = mag2.sum(axis=1)
    weight = (fg.sigma ** 2 + fg.omegas ** 2) ** r
    return float(np.sqrt(np.sum(weight * mag2) * fg.d_omega / (2.0 * np.pi)))
