"""Scalar summaries of per-cell metrics and their quantization for maps."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

logger = logging.getLogger(__name__)

DEFAULT_KNOTS = ((0.0, 0.0), (0.25, 0.45), (0.5, 0.70), (0.75, 0.88), (1.0, 1.0))


class AggregateDomainError(ValueError):
    pass


def globalize(phi, pi) -> float:
    """Stationary-weighted average sum_i pi_i * phi_i (summed in index order)."""
    pi = np.asarray(pi, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if abs(pi.sum() - 1.0) > 1e-9:
        raise AggregateDomainError(f"pi sums to {pi.sum()!r}, not 1")
    support = pi > 0
    if not np.all(np.isfinite(phi[support])):
        raise AggregateDomainError("metric undefined on the support of pi")
    total = 0.0
    for a, b in zip(pi[support].tolist(), phi[support].tolist()):
        total += a * b
    return total


@dataclass(frozen=True)
class QuantizationConfig:
    low: float = 1.0
    high: float = 98.0
    knots: tuple = DEFAULT_KNOTS

    def __post_init__(self):
        if not (0 <= self.low < self.high <= 100):
            raise ValueError(f"percentiles must satisfy 0 <= low < high <= 100, got {self.low}, {self.high}")
        xs = [k[0] for k in self.knots]
        ys = [k[1] for k in self.knots]
        if len(xs) < 2 or tuple(self.knots[0]) != (0.0, 0.0) or tuple(self.knots[-1]) != (1.0, 1.0):
            raise ValueError("spline knots must run from (0, 0) to (1, 1)")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("spline knots must be strictly increasing in both coordinates")
        object.__setattr__(self, "knots", tuple(tuple(map(float, k)) for k in self.knots))

    def spline(self) -> PchipInterpolator:
        xs, ys = zip(*self.knots)
        return PchipInterpolator(xs, ys)


@dataclass(frozen=True)
class Thresholds:
    low: float
    high: float

    @property
    def degenerate(self) -> bool:
        return not self.high > self.low


def fit_thresholds(distributions, cfg: QuantizationConfig = QuantizationConfig()) -> Thresholds:
    """Percentile clip bounds of the pooled values of every window.

    Percentiles use the linear-interpolation order statistic.
    """
    parts = [np.asarray(d, dtype=np.float64).ravel() for d in distributions]
    pooled = np.concatenate(parts) if parts else np.empty(0)
    if pooled.size == 0:
        raise AggregateDomainError("no values to fit thresholds on")
    pooled = np.sort(pooled)
    lo, hi = np.percentile(pooled, [cfg.low, cfg.high], method="linear")
    th = Thresholds(float(lo), float(hi))
    if th.degenerate:
        logger.warning("degenerate thresholds: every value equals %s", th.low)
    return th


def quantize(w, thresholds: Thresholds, cfg: QuantizationConfig = QuantizationConfig()):
    """Clip-normalize to [0, 1] then apply the monotone contrast spline."""
    w = np.asarray(w, dtype=np.float64)
    if thresholds.degenerate:
        warnings.warn("degenerate thresholds; quantized values set to 0", RuntimeWarning, stacklevel=2)
        return np.zeros_like(w)
    z = np.clip((w - thresholds.low) / (thresholds.high - thresholds.low), 0.0, 1.0)
    return np.clip(cfg.spline()(z), 0.0, 1.0)


@dataclass
class GlobalSummary:
    window: str
    category: str
    n_states: int
    n_transitions: int
    avg_path_length: float | None
    modularity: float | None
    phi: dict = field(default_factory=dict)
    excluded_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "category": self.category,
            "n_states": self.n_states,
            "n_transitions": self.n_transitions,
            "avg_path_length": self.avg_path_length,
            "modularity": self.modularity,
            "phi": dict(self.phi),
            "excluded_pairs": self.excluded_pairs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "GlobalSummary":
        return cls(data["window"], data["category"], data["n_states"], data["n_transitions"],
                   data["avg_path_length"], data["modularity"], dict(data["phi"]),
                   data["excluded_pairs"])
