"""Uniform-grid causal signals, source pulses and the weighted norm.

The norm used throughout is

    ||f||^2 = sum_{k=0}^{r} int_0^T exp(-2 sigma t) |d^k f / dt^k|^2 dt

evaluated by the composite trapezoid rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .cluster import BubbleCluster, MaterialParams


class GridMismatchError(ValueError):
    """Signals that were expected to share a time grid do not."""


@dataclass(frozen=True)
class TimeGrid:
    """Samples ``t_k = k dt`` for ``k = 0..n-1``."""

    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n) < 2:
            raise ValueError("a grid needs at least two samples")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_n(cls, t_end: float, n: int) -> "TimeGrid":
        """``n`` samples covering ``[0, t_end]`` inclusive."""
        if n < 2:
            raise ValueError("a grid needs at least two samples")
        return cls(t_end / (n - 1), n)

    @classmethod
    def from_dt(cls, t_end: float, dt: float) -> "TimeGrid":
        return cls(dt, int(np.ceil(t_end / dt - 1e-9)) + 1)

    @property
    def t_end(self) -> float:
        return self.dt * (self.n - 1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    def same_as(self, other: "TimeGrid") -> bool:
        return self.n == other.n and abs(self.dt - other.dt) <= 1e-12 * self.dt


def check_same_grid(grids: Iterable[TimeGrid]) -> TimeGrid:
    grids = list(grids)
    if not grids:
        raise ValueError("no signals given")
    g0 = grids[0]
    for g in grids[1:]:
        if not g0.same_as(g):
            raise GridMismatchError(f"grid {g} differs from {g0}")
    return g0


def _fmt(x: float) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class CausalSignal:
    """Real samples on a :class:`TimeGrid`."""

    grid: TimeGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).reshape(-1)
        if s.size != self.grid.n:
            raise GridMismatchError(
                f"{s.size} samples for a grid of {self.grid.n}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "CausalSignal":
        return cls(grid, np.zeros(grid.n))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __add__(self, other: "CausalSignal") -> "CausalSignal":
        check_same_grid([self.grid, other.grid])
        return CausalSignal(self.grid, self.samples + other.samples)

    def __sub__(self, other: "CausalSignal") -> "CausalSignal":
        check_same_grid([self.grid, other.grid])
        return CausalSignal(self.grid, self.samples - other.samples)

    def __mul__(self, c: float) -> "CausalSignal":
        return CausalSignal(self.grid, c * self.samples)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.times, self.samples):
                fh.write(f"{_fmt(t)},{_fmt(v)}\n")

    @classmethod
    def from_csv(cls, path) -> "CausalSignal":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value'")
        data = np.array(rows[1:], dtype=float)
        t = data[:, 0]
        return cls(TimeGrid(float(t[1] - t[0]), len(t)), data[:, 1])


@dataclass(frozen=True)
class VectorSignal:
    """``M`` signals sharing one grid, stored as an ``(M, n)`` array."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.n:
            raise GridMismatchError(
                f"values of shape {v.shape} do not fit grid of {self.grid.n}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_signals(cls, signals: Sequence[CausalSignal]) -> "VectorSignal":
        g = check_same_grid(s.grid for s in signals)
        return cls(g, np.stack([s.samples for s in signals]))

    @property
    def M(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.M

    def __getitem__(self, i: int) -> CausalSignal:
        return CausalSignal(self.grid, self.values[i])

    def __iter__(self):
        return (self[i] for i in range(self.M))

    def __add__(self, other: "VectorSignal") -> "VectorSignal":
        check_same_grid([self.grid, other.grid])
        return VectorSignal(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorSignal") -> "VectorSignal":
        check_same_grid([self.grid, other.grid])
        return VectorSignal(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "VectorSignal":
        return VectorSignal(self.grid, c * self.values)

    __rmul__ = __mul__


SignalLike = Union[VectorSignal, Sequence[CausalSignal]]


def as_vector(x: SignalLike) -> VectorSignal:
    if isinstance(x, VectorSignal):
        return x
    if isinstance(x, CausalSignal):
        return VectorSignal(x.grid, x.samples[None, :])
    return VectorSignal.from_signals(list(x))


# --------------------------------------------------------------------------
# pulses

@dataclass(frozen=True)
class SineBurst:
    """``A sin(omega0 t)`` on ``[0, cycles * 2 pi / omega0]``.

    ``cycles=None`` keeps the sine on for all ``t >= 0``.
    """

    amplitude: float
    omega0: float
    cycles: Optional[float] = None

    def __post_init__(self):
        if not (self.amplitude > 0 and self.omega0 > 0):
            raise ValueError("amplitude and omega0 must be positive")
        if self.cycles is not None and not self.cycles > 0:
            raise ValueError("cycles must be positive")

    def _on(self, t):
        on = t >= 0
        if self.cycles is not None:
            on &= t <= self.cycles * 2.0 * np.pi / self.omega0
        return on

    def value(self, t):
        t = np.asarray(t, float)
        return np.where(self._on(t), self.amplitude * np.sin(self.omega0 * t), 0.0)

    def second_derivative(self, t):
        # regular part only: kinks at the burst edges carry delta atoms
        t = np.asarray(t, float)
        return np.where(self._on(t), -self.amplitude * self.omega0 ** 2
                        * np.sin(self.omega0 * t), 0.0)


@dataclass(frozen=True)
class GaussianModulated:
    """``A exp(-u^2 / (2 w^2)) sin(omega0 u)`` with ``u = t - delay``.

    The default delay ``6 w`` makes the pulse numerically causal.
    """

    amplitude: float
    omega0: float
    width: float
    delay: Optional[float] = None

    def __post_init__(self):
        if not (self.amplitude > 0 and self.omega0 > 0 and self.width > 0):
            raise ValueError("amplitude, omega0 and width must be positive")

    @property
    def t0(self) -> float:
        return 6.0 * self.width if self.delay is None else self.delay

    def value(self, t):
        t = np.asarray(t, float)
        u = t - self.t0
        g = np.exp(-0.5 * (u / self.width) ** 2)
        return np.where(t >= 0, self.amplitude * g * np.sin(self.omega0 * u), 0.0)

    def second_derivative(self, t):
        t = np.asarray(t, float)
        u = t - self.t0
        w2 = self.width ** 2
        g = np.exp(-0.5 * u ** 2 / w2)
        dg = -u / w2 * g
        ddg = (u ** 2 / w2 ** 2 - 1.0 / w2) * g
        s = np.sin(self.omega0 * u)
        ds = self.omega0 * np.cos(self.omega0 * u)
        dds = -self.omega0 ** 2 * s
        out = self.amplitude * (ddg * s + 2.0 * dg * ds + g * dds)
        return np.where(t >= 0, out, 0.0)


@dataclass(frozen=True)
class ResonantBand:
    """Signal whose transform on ``Re s = sigma`` has modulus about ``m``
    over the inner resonance band ``[omega_res - h/2, omega_res + h/2]``.

    The time signal is ``exp(sigma t) g(t - t0)`` where ``g`` is a
    Gaussian-windowed band-pass kernel whose spectrum is ``m`` on
    ``omega_res +- 3h/4`` and vanishes well outside ``omega_res +- h``.
    Keep ``sigma`` small compared with ``h`` so that ``exp(sigma t)`` does
    not blow up over the kernel duration.
    """

    m: float
    h: float
    sigma: float
    omega_res: float
    delay: Optional[float] = None

    def __post_init__(self):
        if not (self.m > 0 and self.h > 0 and self.omega_res > 0):
            raise ValueError("m, h and omega_res must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def t0(self) -> float:
        return 175.0 / self.h if self.delay is None else self.delay

    @property
    def duration(self) -> float:
        """Horizon over which the kernel is effectively supported."""
        return 2.0 * self.t0

    def value(self, t):
        t = np.asarray(t, float)
        u = t - self.t0
        a = self.omega_res - 0.75 * self.h
        b = self.omega_res + 0.75 * self.h
        c, w = 0.5 * (a + b), b - a
        s = self.h / 16.0
        g = (self.m * w / np.pi) * np.exp(-0.25 * (s * u) ** 2) \
            * np.cos(c * u) * np.sinc(w * u / (2.0 * np.pi))
        return np.where(t >= 0, np.exp(self.sigma * t) * g, 0.0)

    second_derivative = None


PulseSpec = Union[SineBurst, GaussianModulated, ResonantBand]


def sample_pulse(pulse: PulseSpec, grid: TimeGrid) -> CausalSignal:
    """Samples of the pulse itself with the first sample forced to zero."""
    v = np.array(pulse.value(grid.times))
    v[0] = 0.0
    return CausalSignal(grid, v)


# --------------------------------------------------------------------------
# incident field and forcing

def _retarded(fun, grid: TimeGrid, r: float, c0: float) -> np.ndarray:
    t_ret = grid.times - r / c0
    out = np.where(t_ret >= 0, fun(np.maximum(t_ret, 0.0)), 0.0)
    out[0] = 0.0
    return out


def incident_field(x, x0, pulse: PulseSpec, mat: MaterialParams,
                   grid: TimeGrid) -> CausalSignal:
    """Point-source field ``rho_c lambda(t - r/c0) / (4 pi r)``."""
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(x0, float)))
    if r <= 0.0:
        raise ValueError("observation point coincides with the source")
    vals = _retarded(pulse.value, grid, r, mat.c0)
    return CausalSignal(grid, mat.rho_c * vals / (4.0 * np.pi * r))


def second_difference(f: np.ndarray, dt: float) -> np.ndarray:
    """Centered second difference, second-order one-sided at the ends."""
    f = np.asarray(f, float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dt ** 2
    if f.size >= 4:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dt ** 2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dt ** 2
    else:
        out[0], out[-1] = out[1], out[-2]
    return out


def forcing_vector(cluster: BubbleCluster, x0, pulse: PulseSpec,
                   mat: MaterialParams, grid: TimeGrid,
                   method: str = "auto") -> VectorSignal:
    """Second time derivative of the incident field at every center.

    Parameters
    ----------
    method : {"auto", "analytic", "fd"}
        ``auto`` uses the closed-form second derivative when the pulse has
        one and finite differences otherwise.
    """
    x0 = np.asarray(x0, float)
    r = np.linalg.norm(cluster.centers - x0[None, :], axis=1)
    if np.any(r <= cluster.epsilon):
        i = int(np.argmin(r))
        raise ValueError(f"source lies inside bubble {i + 1}")
    d2 = getattr(pulse, "second_derivative", None)
    if method == "auto":
        method = "analytic" if d2 is not None else "fd"
    rows = []
    for ri in r:
        if method == "analytic":
            if d2 is None:
                raise ValueError("pulse has no closed-form second derivative")
            vals = mat.rho_c * _retarded(d2, grid, ri, mat.c0) / (4.0 * np.pi * ri)
        elif method == "fd":
            u = mat.rho_c * _retarded(pulse.value, grid, ri, mat.c0) / (4.0 * np.pi * ri)
            vals = second_difference(u, grid.dt)
            vals[0] = 0.0
        else:
            raise ValueError(f"unknown method {method!r}")
        rows.append(vals)
    return VectorSignal(grid, np.array(rows))


# --------------------------------------------------------------------------
# norms

def _trapezoid(y: np.ndarray, dt: float) -> float:
    return float(dt * (np.sum(y) - 0.5 * (y[..., 0] + y[..., -1]).sum()))


def hrs_norm(f: Union[CausalSignal, VectorSignal], r: int, sigma: float) -> float:
    """Weighted Sobolev norm on the grid horizon.

    For a :class:`VectorSignal` the result is the Euclidean combination of
    the entry norms.
    """
    r = int(r)
    if r < 0:
        raise ValueError("r must be non-negative")
    if isinstance(f, CausalSignal):
        vals = f.samples[None, :]
    else:
        vals = as_vector(f).values
    grid = f.grid
    if grid.n < 3 * (r + 1):
        raise ValueError(f"grid of {grid.n} samples too short for r={r}")
    w = np.exp(-2.0 * sigma * grid.times)
    total = 0.0
    d = vals
    for k in range(r + 1):
        if k:
            d = np.gradient(d, grid.dt, axis=1, edge_order=2)
        y = w[None, :] * d ** 2
        total += _trapezoid(y, grid.dt)
    return float(np.sqrt(max(total, 0.0)))


def band_floor(f: CausalSignal, sigma: float, omega_band, n_samples: int = 257) -> float:
    """Minimum of ``|f^(sigma + i omega)|`` over samples of a band."""
    from .laplace import FrequencyGrid, forward

    lo, hi = float(omega_band[0]), float(omega_band[1])
    if not hi > lo:
        raise ValueError("empty frequency band")
    nyq = np.pi / f.grid.dt
    if max(abs(lo), abs(hi)) > nyq:
        raise ValueError(f"band exceeds the grid Nyquist frequency {nyq:.6g}")
    fg = FrequencyGrid(sigma, np.linspace(lo, hi, n_samples))
    return float(np.min(np.abs(forward(f, fg))))
