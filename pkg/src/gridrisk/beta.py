"""Beta-distributed per-cell occupancy evidence.

A cell's occupancy probability is treated as Beta(alpha, beta): alpha
counts pseudo-detections, beta pseudo-misses, and (1, 1) is the ignorant
state. Expected sensor detections and misses are converted to pseudo-count
increments through per-sensor likelihood-ratio weights, which makes fusing
any number of heterogeneous sensors a pair of weighted sums.

All functions accept floats or numpy arrays and are pure, so they are safe
to evaluate concurrently per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation, require

# Evidence level at which the small-count weight expressions saturate.
# Without a cap the detection weight grows with accumulated alpha and a
# long-observed cell would absorb runaway evidence per epoch.
EVIDENCE_CAP = 1.0


@dataclass(frozen=True)
class SensorModel:
    """Detection and miss likelihood ratios of one sensor.

    ``lr_det``  = g(z=det | occupied) / g(z=det | empty)
    ``lr_miss`` = g(z=miss | empty) / g(z=miss | occupied)

    Both must exceed 1: a sensor at 1 carries no information.
    """

    id: str
    lr_det: float
    lr_miss: float

    def __post_init__(self):
        require(math.isfinite(self.lr_det) and self.lr_det > 1.0, f"sensor {self.id}: lr_det must be finite and > 1")
        require(math.isfinite(self.lr_miss) and self.lr_miss > 1.0, f"sensor {self.id}: lr_miss must be finite and > 1")


@dataclass(frozen=True)
class BetaState:
    """Scalar (alpha, beta) evidence pair; both strictly positive."""

    alpha: float
    beta: float

    def __post_init__(self):
        ok = math.isfinite(self.alpha) and math.isfinite(self.beta) and self.alpha > 0 and self.beta > 0
        require(ok, f"BetaState requires finite positive counts, got ({self.alpha}, {self.beta})")

    def mean(self) -> float:
        return float(occupancy_mean(self.alpha, self.beta))

    def variance(self) -> float:
        return float(occupancy_variance(self.alpha, self.beta))

    def updated(self, d_alpha: float, d_beta: float) -> "BetaState":
        a, b = conjugate_update(self.alpha, self.beta, d_alpha, d_beta)
        return BetaState(float(a), float(b))

    def discounted(self, gamma: float) -> "BetaState":
        a, b = discount(self.alpha, self.beta, gamma)
        return BetaState(float(a), float(b))


def occupancy_mean(alpha, beta):
    """E[r] = alpha / (alpha + beta)."""
    return alpha / (alpha + beta)


def occupancy_variance(alpha, beta):
    """Var[r] = alpha*beta / ((alpha+beta)^2 (alpha+beta+1))."""
    total = alpha + beta
    return alpha * beta / (total * total * (total + 1.0))


def sensor_weights(model: SensorModel, alpha, beta, cap: float = EVIDENCE_CAP):
    """Pseudo-count weights (w_det, w_miss) for one sensor against the
    pre-update state.

    The likelihood-ratio expressions hold for small counts; the effective
    counts saturate at ``cap`` so the weights match them exactly at the
    ignorant state and stay bounded as evidence accumulates.
    """
    w_det = (model.lr_det - 1.0) * np.minimum(alpha, cap)
    w_miss = (model.lr_miss - 1.0) * np.minimum(beta, cap)
    return w_det, w_miss


def pseudo_counts(
    per_sensor: Sequence[tuple[SensorModel, object, object]],
    alpha,
    beta,
    cap: float = EVIDENCE_CAP,
):
    """Fuse expected (detections, misses) from several sensors into
    (delta_alpha, delta_beta).

    Weights are computed from the supplied pre-update state for every
    sensor, so fusion at a fixed epoch is order-invariant.
    """
    d_alpha = np.zeros_like(np.asarray(alpha, dtype=float))
    d_beta = np.zeros_like(d_alpha)
    for model, n_det, n_miss in per_sensor:
        n_det = np.asarray(n_det, dtype=float)
        n_miss = np.asarray(n_miss, dtype=float)
        if np.any(n_det < 0.0) or np.any(n_miss < 0.0):
            raise ContractViolation(f"sensor {model.id}: expected counts must be non-negative")
        w_det, w_miss = sensor_weights(model, alpha, beta, cap)
        d_alpha = d_alpha + w_det * n_det
        d_beta = d_beta + w_miss * n_miss
    if d_alpha.ndim == 0:
        return float(d_alpha), float(d_beta)
    return d_alpha, d_beta


def conjugate_update(alpha, beta, d_alpha, d_beta):
    """Posterior evidence after absorbing non-negative pseudo-counts."""
    if np.any(np.asarray(d_alpha) < 0.0) or np.any(np.asarray(d_beta) < 0.0):
        raise ContractViolation("pseudo-count increments must be non-negative")
    return alpha + d_alpha, beta + d_beta


def discount(alpha, beta, gamma):
    """Decay evidence toward the ignorant (1, 1) state.

    gamma=1 is the identity, gamma=0 a full reset; intermediate values
    shrink the excess counts linearly.
    """
    require(0.0 <= gamma <= 1.0, "discount factor must lie in [0, 1]")
    return 1.0 + gamma * (alpha - 1.0), 1.0 + gamma * (beta - 1.0)
