"""Scene configuration files (YAML, SI units).

Every accessor validates its block and raises :class:`ConfigError` with
the dotted path of the offending field.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .cluster import BubbleCluster, CouplingData, MaterialParams, derive_coupling
from .signal import GaussianModulated, ResonantBand, SineBurst, TimeGrid


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the problem."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


def _num(block: dict, key: str, where: str, default=None, positive=False,
         required=True) -> Optional[float]:
    path = f"{where}.{key}"
    if key not in block or block[key] is None:
        if required and default is None:
            raise ConfigError(path, "missing required field")
        return default
    try:
        v = float(block[key])
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {block[key]!r}")
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and v <= 0:
        raise ConfigError(path, "must be positive")
    return v


def _int(block: dict, key: str, where: str, default=None) -> Optional[int]:
    path = f"{where}.{key}"
    if key not in block or block[key] is None:
        if default is None:
            raise ConfigError(path, "missing required field")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    return int(v)


def _points(value, where: str, ndim: int = 2) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(where, "expected numeric coordinates")
    if ndim == 1:
        if arr.shape != (3,):
            raise ConfigError(where, "expected a 3-vector")
    elif arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise ConfigError(where, "expected a list of 3-vectors")
    return arr


@dataclass
class SceneConfig:
    raw: Dict[str, Any]
    source_path: Optional[str] = None

    @classmethod
    def load(cls, path) -> "SceneConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark is not None else "file"
            raise ConfigError(where, f"YAML syntax error: {exc}")
        except OSError as exc:
            raise ConfigError("file", str(exc))
        return cls.from_dict(data, str(path))

    @classmethod
    def from_dict(cls, data, source_path=None) -> "SceneConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a mapping of blocks")
        return cls(copy.deepcopy(data), source_path)

    def block(self, name: str) -> dict:
        b = self.raw.get(name)
        if b is None:
            raise ConfigError(name, "missing block")
        if not isinstance(b, dict):
            raise ConfigError(name, "expected a mapping")
        return b

    def has(self, name: str) -> bool:
        return self.raw.get(name) is not None

    # -- material / cluster ----------------------------------------------
    def material(self) -> MaterialParams:
        b = self.block("material")
        kb = b.get("kappa_b_bar")
        if kb is None:
            raise ConfigError("material.kappa_b_bar", "missing required field")
        try:
            return MaterialParams(
                rho_c=_num(b, "rho_c", "material", positive=True),
                kappa_c=_num(b, "kappa_c", "material", positive=True),
                kappa_b_bar=kb,
                rho_b_bar=_num(b, "rho_b_bar", "material", default=1.2, positive=True),
                gamma_poly=_num(b, "gamma_poly", "material", default=1.4, positive=True),
                P0=_num(b, "P0", "material", default=1.0e5, positive=True),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("material", str(exc))

    def cluster(self, epsilon: Optional[float] = None) -> BubbleCluster:
        b = self.block("cluster")
        eps = _num(b, "epsilon", "cluster", positive=True) if epsilon is None else epsilon
        p = _num(b, "p", "cluster", default=0.0, required=False)
        if "centers" in b:
            centers = _points(b["centers"], "cluster.centers")
        elif "template" in b:
            centers = _points(b["template"], "cluster.template") * eps ** p
        else:
            raise ConfigError("cluster.centers", "give centers or a template")
        try:
            return BubbleCluster(
                centers, eps, p,
                d_tilde=_num(b, "d_tilde", "cluster", required=False, positive=True),
                vol_B=_num(b, "vol_B", "cluster", default=4.0 * np.pi / 3.0, positive=True),
                Lambda_dB=_num(b, "Lambda_dB", "cluster", required=False),
                lambda1_3=_num(b, "lambda1_3", "cluster", required=False),
                d0_scale=_num(b, "d0_scale", "cluster", required=False, positive=True),
            )
        except ValueError as exc:
            raise ConfigError("cluster", str(exc))

    def omega_mode(self) -> Union[str, float]:
        v = self.block("cluster").get("omega_M", "minnaert")
        if isinstance(v, str):
            if v.lower() not in ("minnaert", "lambda"):
                raise ConfigError("cluster.omega_M",
                                  "expected 'minnaert', 'lambda' or a number")
            return v.lower()
        return _num(self.block("cluster"), "omega_M", "cluster", positive=True)

    def coupling(self, cluster: Optional[BubbleCluster] = None) -> CouplingData:
        cl = self.cluster() if cluster is None else cluster
        try:
            return derive_coupling(cl, self.material(), self.omega_mode())
        except ValueError as exc:
            raise ConfigError("cluster", str(exc))

    # -- source / grid ---------------------------------------------------
    def x0(self) -> np.ndarray:
        return _points(self.block("source").get("x0"), "source.x0", ndim=1)

    def pulse(self, omega_res: Optional[float] = None):
        """Source pulse; ``"resonance"`` frequencies resolve to ``omega_res``."""
        b = self.block("source").get("pulse")
        where = "source.pulse"
        if not isinstance(b, dict):
            raise ConfigError(where, "missing block")
        kind = b.get("kind")

        def omega0():
            v = b.get("omega0", "resonance")
            if v == "resonance":
                if omega_res is None:
                    raise ConfigError(f"{where}.omega0", "needs the cluster resonance")
                return omega_res
            return _num(b, "omega0", where, positive=True)

        try:
            if kind == "sine_burst":
                cycles = b.get("cycles")
                return SineBurst(_num(b, "amplitude", where, positive=True), omega0(),
                                 None if cycles is None else float(cycles))
            if kind == "gaussian":
                return GaussianModulated(_num(b, "amplitude", where, positive=True),
                                         omega0(), _num(b, "width", where, positive=True),
                                         _num(b, "delay", where, required=False))
            if kind == "resonant_band":
                wr = b.get("omega_res", "resonance")
                if wr == "resonance":
                    if omega_res is None:
                        raise ConfigError(f"{where}.omega_res", "needs the cluster resonance")
                    w = omega_res
                else:
                    w = _num(b, "omega_res", where, positive=True)
                return ResonantBand(_num(b, "m", where, positive=True),
                                    _num(b, "h", where, positive=True),
                                    _num(b, "sigma", where, default=0.0, required=False),
                                    w, _num(b, "delay", where, required=False))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(where, str(exc))
        raise ConfigError(f"{where}.kind",
                          "expected sine_burst, gaussian or resonant_band")

    def grid(self) -> TimeGrid:
        b = self.block("simulation")
        t_end = _num(b, "t_end", "simulation", positive=True)
        n = _int(b, "n", "simulation")
        if n < 2:
            raise ConfigError("simulation.n", "need at least two samples")
        return TimeGrid.from_n(t_end, n)

    def sim(self) -> dict:
        b = self.block("simulation")
        N = b.get("N", "auto")
        if N != "auto":
            N = _int(b, "N", "simulation")
            if N < 0:
                raise ConfigError("simulation.N", "must be non-negative or 'auto'")
        sigma = _num(b, "sigma", "simulation", positive=True)
        return {
            "sigma": sigma,
            "sigma0": _num(b, "sigma0", "simulation", default=sigma, positive=True),
            "r": _int(b, "r", "simulation", default=0),
            "N": N,
            "tol": _num(b, "tol", "simulation", default=1e-8, positive=True),
            "n_max": _int(b, "n_max", "simulation", default=200),
        }

    def observations(self) -> List[np.ndarray]:
        if not self.has("observation"):
            return []
        pts = self.block("observation").get("points")
        if pts is None:
            raise ConfigError("observation.points", "missing required field")
        return list(_points(pts, "observation.points"))

    def min_obs_distance(self) -> Optional[float]:
        if not self.has("observation"):
            return None
        return _num(self.block("observation"), "min_distance", "observation",
                    required=False, positive=True)
