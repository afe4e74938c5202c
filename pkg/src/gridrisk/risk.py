"""Collision-risk evaluation with uncertainty over an ego trajectory.

Instantaneous risk sums, over cells, occupancy x ego-presence x loss, where
the loss is a kinetic-energy severity normalized by cell area and epoch
duration so the metric is insensitive to the discretization.  The reported
risk variance propagates only the map's Beta occupancy variance (ego
presence and loss are treated as known at the epoch), which is the
uncertainty the map itself can quantify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import detrng
from .beta import occupancy_variance
from .errors import ContractViolation, require
from .filtering import OccupancyFilter
from .grid import GridSpec
from .sensing import Pose

_MASK_EPS = 1e-12


@dataclass(frozen=True)
class EgoState:
    """Ego vehicle at one epoch: pose (with localization covariance),
    expected planar velocity, rectangular footprint (length, width) centered
    on the pose, and mass."""

    pose: Pose
    velocity: np.ndarray
    footprint: tuple[float, float]
    mass: float = 1500.0

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=np.float64).reshape(2))
        require(self.footprint[0] > 0.0 and self.footprint[1] > 0.0, "footprint dimensions must be positive")
        require(self.mass > 0.0, "ego mass must be positive")


@dataclass(frozen=True)
class LossConfig:
    """Collision severity constants.

    By default the kinetic-energy pairing is used: C1 is the reduced-mass
    coefficient of the relative-velocity term and C2 = cell_mass / 2 scales
    the cell's velocity dispersion.  Explicit (c1, c2) override both.
    """

    cell_mass: float = 80.0
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        require(self.cell_mass > 0.0, "cell_mass must be positive")
        require((self.c1 is None) == (self.c2 is None), "c1 and c2 must be set together")
        if self.c1 is not None:
            require(self.c1 >= 0.0 and self.c2 >= 0.0, "explicit loss constants must be non-negative")

    def constants(self, ego_mass: float) -> tuple[float, float]:
        if self.c1 is not None:
            return self.c1, self.c2
        c1 = ego_mass * self.cell_mass / (2.0 * (ego_mass + self.cell_mass))
        return c1, self.cell_mass / 2.0


class RiskProfile:
    """Per-epoch risk with running accumulation (independent epochs)."""

    def __init__(self):
        self.times: list[float] = []
        self.risk_mean: list[float] = []
        self.risk_variance: list[float] = []
        self.accumulated_mean: list[float] = []
        self.accumulated_variance: list[float] = []

    def append(self, t: float, mean: float, variance: float) -> None:
        require(variance >= 0.0, "risk variance must be non-negative")
        prev_mean = self.accumulated_mean[-1] if self.accumulated_mean else 0.0
        prev_var = self.accumulated_variance[-1] if self.accumulated_variance else 0.0
        self.times.append(float(t))
        self.risk_mean.append(float(mean))
        self.risk_variance.append(float(variance))
        self.accumulated_mean.append(prev_mean + float(mean))
        self.accumulated_variance.append(prev_var + float(variance))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_accumulated_mean(self) -> float:
        require(len(self) > 0, "empty risk profile")
        return self.accumulated_mean[-1]

    @property
    def final_accumulated_variance(self) -> float:
        require(len(self) > 0, "empty risk profile")
        return self.accumulated_variance[-1]

    def plus_two_sigma(self) -> list[float]:
        return [m + 2.0 * math.sqrt(v) for m, v in zip(self.accumulated_mean, self.accumulated_variance)]

    def rows(self):
        """(epoch, t, risk_mean, risk_var, acc_mean, acc_var, acc_plus_2sigma) tuples."""
        band = self.plus_two_sigma()
        for k in range(len(self)):
            yield (
                k,
                self.times[k],
                self.risk_mean[k],
                self.risk_variance[k],
                self.accumulated_mean[k],
                self.accumulated_variance[k],
                band[k],
            )


def footprint_corners(centers: np.ndarray, headings: np.ndarray, length: float, width: float) -> np.ndarray:
    """Corner coordinates (S, 4, 2) of rotated rectangles."""
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    c = np.cos(headings)[:, None]
    s = np.sin(headings)[:, None]
    x = c * local[None, :, 0] - s * local[None, :, 1]
    y = s * local[None, :, 0] + c * local[None, :, 1]
    return centers[:, None, :] + np.stack([x, y], axis=2)


def _clip_halfplane(
    vx: np.ndarray, vy: np.ndarray, cnt: np.ndarray, bound: np.ndarray, axis: int, keep_le: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Sutherland-Hodgman pass of P padded polygons against an
    axis-aligned half-plane (per-polygon bound)."""
    p, v = vx.shape
    coord = vx if axis == 0 else vy
    j = np.arange(v)[None, :]
    valid = j < cnt[:, None]
    inside = (coord <= bound) if keep_le else (coord >= bound)
    prev = np.where(j == 0, np.maximum(cnt[:, None], 1) - 1, j - 1)
    prev_x = np.take_along_axis(vx, prev, axis=1)
    prev_y = np.take_along_axis(vy, prev, axis=1)
    prev_in = np.take_along_axis(inside, prev, axis=1)

    crossing = valid & (prev_in != inside)
    emit_cur = valid & inside
    n_emit = crossing.astype(np.int64) + emit_cur
    pos_end = np.cumsum(n_emit, axis=1)
    pos_start = pos_end - n_emit

    prev_c = prev_x if axis == 0 else prev_y
    cur_c = coord
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (bound - prev_c) / (cur_c - prev_c)
        t = np.where(crossing, t, 0.0)  # non-crossing lanes are discarded
    ix = prev_x + t * (vx - prev_x)
    iy = prev_y + t * (vy - prev_y)

    out_v = v + 1
    out_x = np.zeros((p, out_v))
    out_y = np.zeros((p, out_v))
    rows, cols = np.nonzero(crossing)
    flat = rows * out_v + pos_start[crossing]
    out_x.ravel()[flat] = ix[crossing]
    out_y.ravel()[flat] = iy[crossing]
    rows, cols = np.nonzero(emit_cur)
    flat = rows * out_v + pos_start[emit_cur] + crossing[emit_cur]
    out_x.ravel()[flat] = vx[emit_cur]
    out_y.ravel()[flat] = vy[emit_cur]
    return out_x, out_y, pos_end[:, -1]


def _polygon_areas(vx: np.ndarray, vy: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    """Shoelace area of P padded polygons."""
    v = vx.shape[1]
    j = np.arange(v)[None, :]
    valid = j < cnt[:, None]
    nxt = np.where(j + 1 >= cnt[:, None], 0, j + 1)
    nx = np.take_along_axis(vx, nxt, axis=1)
    ny = np.take_along_axis(vy, nxt, axis=1)
    terms = np.where(valid, vx * ny - nx * vy, 0.0)
    return 0.5 * np.abs(terms.sum(axis=1))


def _coverage(spec: GridSpec, centers: np.ndarray, headings: np.ndarray, footprint) -> np.ndarray:
    """Mean covered-area fraction per cell over the supplied pose samples.

    Exact: each sample footprint is clipped against every candidate cell
    (Sutherland-Hodgman on the four cell edges) and the clipped area taken.
    """
    corners = footprint_corners(centers, np.asarray(headings, dtype=np.float64), *footprint)
    n_samples = corners.shape[0]

    h = spec.cell_size
    gx0, gy0 = spec.origin
    c0 = max(0, int(math.floor((corners[..., 0].min() - gx0) / h)))
    c1 = min(spec.width - 1, int(math.floor((corners[..., 0].max() - gx0) / h)))
    r0 = max(0, int(math.floor((corners[..., 1].min() - gy0) / h)))
    r1 = min(spec.height - 1, int(math.floor((corners[..., 1].max() - gy0) / h)))
    out = np.zeros(spec.n_cells)
    if c0 > c1 or r0 > r1:
        return out

    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols = cols.ravel()
    rows = rows.ravel()
    n_cells = len(cols)
    x_lo = np.tile(gx0 + cols * h, n_samples)[:, None]
    y_lo = np.tile(gy0 + rows * h, n_samples)[:, None]

    vx = np.repeat(corners[:, :, 0], n_cells, axis=0)
    vy = np.repeat(corners[:, :, 1], n_cells, axis=0)
    cnt = np.full(n_samples * n_cells, 4, dtype=np.int64)
    vx, vy, cnt = _clip_halfplane(vx, vy, cnt, x_lo, 0, keep_le=False)
    vx, vy, cnt = _clip_halfplane(vx, vy, cnt, x_lo + h, 0, keep_le=True)
    vx, vy, cnt = _clip_halfplane(vx, vy, cnt, y_lo, 1, keep_le=False)
    vx, vy, cnt = _clip_halfplane(vx, vy, cnt, y_lo + h, 1, keep_le=True)
    areas = _polygon_areas(vx, vy, cnt).reshape(n_samples, n_cells)
    out[rows * spec.width + cols] = areas.mean(axis=0) / spec.cell_area
    return out


def ego_occupancy(ego: EgoState, spec: GridSpec, *, samples: int = 100, seed: int = 0) -> np.ndarray:
    """Per-cell probability-weighted presence of the ego footprint.

    Draws pose samples from the ego pose distribution and averages the exact
    covered-area fraction of each cell; a zero covariance therefore yields
    the exact footprint rasterization.  Deterministic for a fixed seed.
    """
    require(samples >= 1, "ego_occupancy needs at least one sample")
    cov = ego.pose.covariance
    if not np.any(cov):
        centers = ego.pose.position[None, :]
        headings = np.array([ego.pose.heading])
    else:
        key = detrng.fold(seed, detrng.EGO)
        idx = np.arange(samples, dtype=np.int64) * 3
        z = np.stack([detrng.normal(key, idx + c) for c in range(3)], axis=1)
        eps = z @ ego.pose.covariance_sqrt().T
        centers = ego.pose.position[None, :] + eps[:, :2]
        headings = ego.pose.heading + eps[:, 2]
    return _coverage(spec, centers, headings, ego.footprint)


def footprint_mask(ego: EgoState, spec: GridSpec, margin: float = 0.0) -> np.ndarray:
    """Cells whose center lies within the zero-noise ego footprint, optionally
    inflated by a physical ``margin``.

    These are excluded from the occupancy sum of ``instantaneous_risk``:
    presence mass there comes from the ego body itself and would count the
    ego as its own obstacle.  Masking by cell center keeps the excluded
    region aligned with the body outline (to within half a cell either way)
    at any discretization, so the risk metric stays resolution-stable.
    """
    hl = 0.5 * ego.footprint[0] + margin
    hw = 0.5 * ego.footprint[1] + margin
    h = spec.cell_size
    gx0, gy0 = spec.origin
    px, py = ego.pose.position
    reach = math.hypot(hl, hw)
    c0 = max(0, int(math.floor((px - reach - gx0) / h)))
    c1 = min(spec.width - 1, int(math.floor((px + reach - gx0) / h)))
    r0 = max(0, int(math.floor((py - reach - gy0) / h)))
    r1 = min(spec.height - 1, int(math.floor((py + reach - gy0) / h)))
    mask = np.zeros(spec.n_cells, dtype=bool)
    if c0 > c1 or r0 > r1:
        return mask
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols = cols.ravel()
    rows = rows.ravel()
    cx = gx0 + (cols + 0.5) * h - px
    cy = gy0 + (rows + 0.5) * h - py
    cos_h = math.cos(ego.pose.heading)
    sin_h = math.sin(ego.pose.heading)
    local_x = cos_h * cx + sin_h * cy
    local_y = -sin_h * cx + cos_h * cy
    inside = (np.abs(local_x) <= hl) & (np.abs(local_y) <= hw)
    mask[rows[inside] * spec.width + cols[inside]] = True
    return mask


def cell_loss(ego: EgoState, mean_velocity, second_moment, loss: LossConfig, spec: GridSpec):
    """Severity of a collision in a cell, normalized by cell area and epoch
    duration: (C1*|v_ego - v_cell|^2 + C2*E|v_cell - mean|^2) * A * tau."""
    c1, c2 = loss.constants(ego.mass)
    dv = ego.velocity - np.asarray(mean_velocity, dtype=np.float64)
    rel = np.sum(dv * dv, axis=-1)
    return (c1 * rel + c2 * np.asarray(second_moment, dtype=np.float64)) * spec.cell_area * spec.tau


def instantaneous_risk(
    filt: OccupancyFilter,
    ego: EgoState,
    loss: LossConfig,
    spec: GridSpec,
    *,
    samples: int = 100,
    seed: int = 0,
    exclusion_margin: float = 0.0,
) -> tuple[float, float]:
    """Expected risk and its map-uncertainty variance for one epoch.

    mean = sum_c r_c * p_ego_c * L_c over non-footprint cells;
    var  = sum_c (p_ego_c * L_c)^2 * Var[r_c] with Var[r] the Beta variance,
    cells treated as independent.
    """
    if spec != filt.spec:
        raise ContractViolation("risk evaluation spec does not match the filter grid")
    p_ego = ego_occupancy(ego, spec, samples=samples, seed=seed)
    mask = footprint_mask(ego, spec, margin=exclusion_margin)
    losses = cell_loss(ego, filt.mean_velocity, filt.velocity_second_moment, loss, spec)
    weighted = p_ego * losses
    weighted[mask] = 0.0
    mean = float(np.sum(filt.occupancy * weighted))
    var = float(np.sum(weighted * weighted * occupancy_variance(filt.alpha, filt.beta)))
    return mean, var
