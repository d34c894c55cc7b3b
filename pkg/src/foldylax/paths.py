"""Weighted paths through the cluster and the atomic part of ``K^{*N}``.

A path ``(i_0, ..., i_N)`` (1-based) carries the weight
``Q = prod q_{i_k i_{k+1}}`` and the delay ``tau = sum tau_{i_k i_{k+1}}``.
The atomic part of the ``N``-fold convolution power of the kernel is the
delta train ``omega_M^{-2N} sum_paths Q delta(t - tau)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cluster import CouplingData, alpha_inf
from .parallel import pmap

DEFAULT_BUDGET = 10 ** 7


class PathBudgetExceeded(RuntimeError):
    """Exhaustive enumeration would produce more paths than allowed."""


@dataclass(frozen=True)
class Path:
    """Ordered 1-based bubble indices with weight and total delay."""

    indices: Tuple[int, ...]
    Q: float
    Q0: float = float("nan")
    tau_total: float = float("nan")

    @property
    def N(self) -> int:
        return len(self.indices) - 1

    @property
    def label(self) -> str:
        return "-".join(str(i) for i in self.indices)


def make_path(indices: Sequence[int], cd: CouplingData) -> Path:
    """Path record for explicit 1-based indices."""
    idx = tuple(int(i) for i in indices)
    if len(idx) < 2:
        raise ValueError("a path needs at least two indices")
    if min(idx) < 1 or max(idx) > cd.M:
        raise ValueError(f"path indices must lie in 1..{cd.M}")
    Q = Q0 = 1.0
    tau = 0.0
    for a, b in zip(idx[:-1], idx[1:]):
        Q *= cd.q[a - 1, b - 1]
        Q0 *= cd.q0[a - 1, b - 1]
        tau += cd.tau[a - 1, b - 1]
    return Path(idx, float(Q), float(Q0), float(tau))


def count_walks(q: np.ndarray, N: int) -> np.ndarray:
    """Number of nonzero-weight paths of length ``N`` between every pair."""
    A = (np.asarray(q) != 0).astype(object)
    return np.linalg.matrix_power(A, N) if N > 0 else np.eye(len(A), dtype=object)


def enumerate_paths(M: int, N: int, i: int, j: int, q: np.ndarray, *,
                    tau: Optional[np.ndarray] = None,
                    q0: Optional[np.ndarray] = None,
                    budget: int = DEFAULT_BUDGET) -> List[Path]:
    """All nonzero-weight paths of length ``N`` from ``i`` to ``j``.

    Paths are produced in lexicographic order.  Consecutive repeats are
    pruned at generation since ``q_ii = 0``.
    """
    q = np.asarray(q, float)
    if q.shape != (M, M):
        raise ValueError(f"q must be {M}x{M}")
    if N < 1:
        raise ValueError("N must be at least 1")
    if not (1 <= i <= M and 1 <= j <= M):
        raise ValueError(f"start and end must lie in 1..{M}")
    expected = int(count_walks(q, N)[i - 1, j - 1])
    if expected > budget:
        raise PathBudgetExceeded(
            f"{expected} paths of length {N} exceed the budget of {budget}")
    tau = np.zeros_like(q) if tau is None else np.asarray(tau, float)
    q0 = np.full_like(q, np.nan) if q0 is None else np.asarray(q0, float)
    nbrs = [[b for b in range(M) if q[a, b] != 0.0] for a in range(M)]
    out: List[Path] = []

    def walk(node, depth, idx, Q, Q0, t):
        if depth == N:
            if node == j - 1:
                out.append(Path(tuple(k + 1 for k in idx), Q, Q0, t))
            return
        for b in nbrs[node]:
            walk(b, depth + 1, idx + (b,), Q * q[node, b], Q0 * q0[node, b],
                 t + tau[node, b])

    walk(i - 1, 0, (i - 1,), 1.0, 1.0, 0.0)
    return out


def enumerate_all(cd: CouplingData, N: int, i: Optional[int] = None,
                  j: Optional[int] = None,
                  budget: int = DEFAULT_BUDGET) -> List[Path]:
    """Paths of length ``N`` over all (or the given) start and end indices."""
    starts = range(1, cd.M + 1) if i is None else [i]
    ends = range(1, cd.M + 1) if j is None else [j]
    if cd.M < 2:
        return []
    walks = count_walks(cd.q, N)
    total = sum(int(walks[a - 1, b - 1]) for a in starts for b in ends)
    if total > budget:
        raise PathBudgetExceeded(
            f"{total} paths of length {N} exceed the budget of {budget}")

    def for_start(a):
        res = []
        for b in ends:
            res += enumerate_paths(cd.M, N, a, b, cd.q, tau=cd.tau, q0=cd.q0,
                                   budget=budget)
        return res

    out = []
    for chunk in pmap(for_start, starts):
        out += chunk
    return sorted(out, key=lambda p: p.indices)


# --------------------------------------------------------------------------
# delta trains

@dataclass(frozen=True)
class DeltaTrain:
    """Weighted Dirac atoms ``sum w_k delta(t - d_k)`` sorted by delay."""

    atoms: Tuple[Tuple[float, float], ...] = field(default=())

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[float, float]],
                   merge_tol: float = 0.0) -> "DeltaTrain":
        """Sort by delay and merge delays closer than ``merge_tol``.

        A merged atom sits at the smallest delay of its group.
        """
        items = sorted(((float(w), float(d)) for w, d in atoms), key=lambda a: a[1])
        merged: List[List[float]] = []
        for w, d in items:
            if d < 0:
                raise ValueError("delays must be non-negative")
            if merged and d - merged[-1][1] <= merge_tol:
                merged[-1][0] += w
            else:
                merged.append([w, d])
        return cls(tuple((w, d) for w, d in merged))

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def delays(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    @property
    def total_weight(self) -> float:
        return float(sum(a[0] for a in self.atoms))

    def convolve_raw(self, other: "DeltaTrain") -> List[Tuple[float, float]]:
        """Unmerged atoms of ``self * other``; delays add in that order."""
        return [(w1 * w2, d1 + d2) for w1, d1 in self.atoms for w2, d2 in other.atoms]


def _merge_tol(cd: CouplingData) -> float:
    return 1e-15 * cd.tau_min if cd.M > 1 else 0.0


def atomic_power(cd: CouplingData, N: int) -> List[List[DeltaTrain]]:
    """Atomic part of ``K^{*N}`` as an ``M x M`` matrix of delta trains.

    Every entry is built twice, by path enumeration and by recursive
    convolution of delta trains, and the two must agree (weights to 1e-12
    relative, delays exactly).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    M = cd.M
    w2 = cd.omega_M ** 2
    tol = _merge_tol(cd)
    base = [[DeltaTrain(((cd.q[i, j] / w2, cd.tau[i, j]),)) if cd.q[i, j] != 0.0
             else DeltaTrain() for j in range(M)] for i in range(M)]

    # (b) recursive convolution; atoms are merged only at the end so the
    # delays are summed in path order, exactly as in (a)
    raw = [[list(base[i][j].atoms) for j in range(M)] for i in range(M)]
    for _ in range(N - 1):
        nxt = [[[] for _ in range(M)] for _ in range(M)]
        for i in range(M):
            for l in range(M):
                if not raw[i][l]:
                    continue
                left = DeltaTrain(tuple(raw[i][l]))
                for j in range(M):
                    if base[l][j].atoms:
                        nxt[i][j] += left.convolve_raw(base[l][j])
        raw = nxt
    recursive = [[DeltaTrain.from_atoms(raw[i][j], tol) for j in range(M)]
                 for i in range(M)]

    # (a) enumeration
    scale = w2 ** N
    result = []
    for i in range(M):
        row = []
        for j in range(M):
            paths = enumerate_paths(M, N, i + 1, j + 1, cd.q, tau=cd.tau) if M > 1 else []
            dt = DeltaTrain.from_atoms(((p.Q / scale, p.tau_total) for p in paths), tol)
            other = recursive[i][j]
            if len(dt.atoms) != len(other.atoms) or np.any(dt.delays != other.delays):
                raise AssertionError(f"delay mismatch in entry ({i + 1}, {j + 1})")
            if dt.atoms and not np.allclose(dt.weights, other.weights, rtol=1e-12, atol=0):
                raise AssertionError(f"weight mismatch in entry ({i + 1}, {j + 1})")
            row.append(dt)
        result.append(row)
    return result


# --------------------------------------------------------------------------
# path amplitudes and the M_max estimate

def r_min(sigma: float, omega_res: float, h: float, r: int) -> float:
    """``min over [omega_res - h, omega_res + h]`` of ``(sigma^2 + omega^2)^(r/2)``."""
    if r == 0:
        return 1.0
    w = max(omega_res - h, 0.0)
    return float((sigma ** 2 + w ** 2) ** (r / 2.0))


def path_amplitude(gamma: Path, cd: CouplingData, sigma: float, m: float, h: float,
                   r: int = 0, d_max: float = 0.1, *, drop_path_delay: bool = False,
                   C0: Optional[float] = None) -> float:
    """Lower-bound amplitude ``L_gamma`` of one path.

    ``L = Q0 C0 / (4 pi d_max omega_M^(2N)) exp(-sigma (tau + d_max/c0))
    m sqrt(2h) r_min``.  ``drop_path_delay`` replaces ``exp(-sigma tau)`` by 1.
    """
    if m < 0 or h <= 0:
        raise ValueError("m must be non-negative and h positive")
    c0 = float(cd.C0[gamma.indices[-1] - 1]) if C0 is None else C0
    N = gamma.N
    tau = 0.0 if drop_path_delay else gamma.tau_total
    pref = gamma.Q0 * c0 / (4.0 * np.pi * d_max * cd.omega_M ** (2 * N))
    return float(pref * np.exp(-sigma * (tau + d_max / cd.c0)) * m
                 * np.sqrt(2.0 * h) * r_min(sigma, cd.omega_res, h, r))


def background_bound(cd: CouplingData, sigma: float, sigma0: float, N: int,
                     d_min: float, forcing_norm: float,
                     alpha: Optional[float] = None, C0: Optional[float] = None) -> float:
    """Bound ``B`` on the contribution of everything but the leading path.

    ``alpha`` defaults to :func:`foldylax.cluster.alpha_inf`.
    """
    if cd.omega_M ** 2 * sigma0 ** 2 <= 1.0:
        raise ValueError("omega_M^2 sigma0^2 must exceed 1")
    a = alpha_inf(cd, sigma0) if alpha is None else float(alpha)
    c0 = float(np.max(cd.C0)) if C0 is None else C0
    return float(c0 / (4.0 * np.pi * d_min) * cd.rational_factor(sigma0)
                 * a ** (N + 1) * np.exp(-sigma * d_min / cd.c0) * forcing_norm)


def maximize_path(paths: Sequence[Path], cd: CouplingData, **params) -> Tuple[Path, float]:
    """Exhaustive argmax of :func:`path_amplitude`; ties go to the
    lexicographically smallest indices."""
    if not paths:
        raise ValueError("no paths to maximize over")
    scored = [(path_amplitude(p, cd, **params), p) for p in paths]
    best = max(v for v, _ in scored)
    winner = min((p for v, p in scored if v == best), key=lambda p: p.indices)
    return winner, best


def m_max(L_star: float, B_unit: float, forcing_norm: float, theta: float) -> int:
    """``floor(1 + theta L* / B)`` with ``B = B_unit * forcing_norm``."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    B = B_unit * forcing_norm
    if not B > 0:
        raise ValueError("the background bound B must be positive")
    return int(math.floor(1.0 + theta * L_star / B))


def resonance_band_condition(cd: CouplingData, gamma: Path, sigma: float, sigma0: float,
                             m: float, h: float, theta: float, forcing_norm: float,
                             d_min: float, d_max: float, r: int = 0) -> Dict[str, float]:
    """Band-energy predicate required by the path lower bound.

    Checks ``m sqrt(2h) > (1 - theta) ||F|| d_max exp(sigma (tau + (d_max -
    d_min)/c0)) / (d_min Q0 r_min) (C0/d_tilde)^(N+1) omega_M^(2N)
    ((M-1) sigma0^2/(omega_M^2 sigma0^2 - 1))^(N+2)``.
    """
    N = gamma.N
    c0 = float(np.max(cd.C0))
    lhs = m * np.sqrt(2.0 * h)
    rhs = ((1.0 - theta) * forcing_norm * d_max
           * np.exp(sigma * (gamma.tau_total + (d_max - d_min) / cd.c0))
           / (d_min * gamma.Q0 * r_min(sigma, cd.omega_res, h, r))
           * (c0 / cd.d_tilde) ** (N + 1) * cd.omega_M ** (2 * N)
           * ((cd.M - 1) * cd.rational_factor(sigma0)) ** (N + 2))
    return {"lhs": float(lhs), "rhs": float(rhs), "satisfied": bool(lhs > rhs)}


def write_path_report(paths: Sequence[Path], amplitudes: Sequence[float], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["indices", "Q0", "tau_total", "L_gamma"])
        for p, L in zip(paths, amplitudes):
            w.writerow([p.label, "%.17g" % p.Q0, "%.17g" % p.tau_total, "%.17g" % L])
