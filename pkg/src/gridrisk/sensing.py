"""Monte Carlo beam measurement model.

Each physical beam is replaced by K sampled beams whose origin pose and
range are perturbed according to the sensor's pose covariance and range
noise.  Every sampled beam deposits 1/K of a miss into each cell it
traverses and, when it is a detecting beam whose endpoint lands in-grid,
1/K of a detection into the terminal cell.  Max-range returns certify
emptiness along the beam and contribute misses only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import detrng, parallel, rays
from .errors import ContractViolation, require
from .grid import GridSpec

_MIN_RAY = 1e-9


def _normalize_heading(theta: float) -> float:
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose:
    """Planar pose with a 3x3 covariance over (x, y, heading).

    The heading is normalized into (-pi, pi]; the covariance must be
    symmetric positive semidefinite (rank-deficient is fine, e.g. an exactly
    known pose has the zero matrix).
    """

    position: np.ndarray
    heading: float
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        position = np.asarray(self.position, dtype=np.float64).reshape(2)
        cov = np.asarray(self.covariance, dtype=np.float64)
        require(cov.shape == (3, 3), "pose covariance must be 3x3")
        require(bool(np.allclose(cov, cov.T, atol=1e-9)), "pose covariance must be symmetric")
        if np.any(cov):
            require(float(np.linalg.eigvalsh(cov).min()) > -1e-9, "pose covariance must be PSD")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "heading", _normalize_heading(float(self.heading)))
        object.__setattr__(self, "covariance", cov)

    def covariance_sqrt(self) -> np.ndarray:
        """Matrix square root via eigendecomposition; tolerates zero modes."""
        if not np.any(self.covariance):
            return np.zeros((3, 3))
        vals, vecs = np.linalg.eigh(self.covariance)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class BeamReturn:
    """One beam observation: azimuth relative to the sensor heading and the
    measured range; ``is_max_range`` flags a no-detection beam."""

    azimuth: float
    range: float
    is_max_range: bool = False

    def __post_init__(self):
        require(self.range > 0.0, "beam range must be positive")


@dataclass
class MeasurementGrid:
    """Per-cell expected detection and miss counts from one sensor epoch."""

    spec: GridSpec
    det: np.ndarray
    miss: np.ndarray

    def __post_init__(self):
        self.det = np.asarray(self.det, dtype=np.float64)
        self.miss = np.asarray(self.miss, dtype=np.float64)
        n = self.spec.n_cells
        require(self.det.shape == (n,) and self.miss.shape == (n,), "count arrays must have one entry per cell")
        ok = np.all(np.isfinite(self.det)) and np.all(np.isfinite(self.miss))
        require(bool(ok) and bool(np.all(self.det >= 0.0)) and bool(np.all(self.miss >= 0.0)),
                "expected counts must be finite and non-negative")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "MeasurementGrid":
        return cls(spec, np.zeros(spec.n_cells), np.zeros(spec.n_cells))


def sample_beams(
    spec: GridSpec,
    pose: Pose,
    returns: Sequence[BeamReturn],
    *,
    max_range: float,
    range_sigma: float = 0.0,
    samples_per_beam: int = 10,
    seed: int = 0,
) -> MeasurementGrid:
    """Expand physical beams into K perturbed samples and tally them.

    Sampled ranges are clamped into (0, max_range].  Each sampled beam draws
    from its own counter-based stream keyed by (seed, beam, sample), so the
    grid is bit-identical for a fixed seed no matter how the rays are
    batched or threaded.
    """
    require(samples_per_beam >= 1, "samples_per_beam must be at least 1")
    require(range_sigma >= 0.0, "range noise sigma must be non-negative")
    require(max_range > 0.0, "max_range must be positive")
    for ret in returns:
        require(ret.range <= max_range, "beam range exceeds max_range")

    n_beams = len(returns)
    det = np.zeros(spec.n_cells)
    miss = np.zeros(spec.n_cells)
    if n_beams == 0:
        return MeasurementGrid(spec, det, miss)

    k = samples_per_beam
    azimuths = np.array([r.azimuth for r in returns])
    base_range = np.array([r.range for r in returns])
    detecting = ~np.array([r.is_max_range for r in returns], dtype=bool)

    m = n_beams * k
    beam_of = np.repeat(np.arange(m // k), k)
    draw = np.arange(m, dtype=np.int64) * 4
    key = detrng.fold(seed, detrng.BEAMS)
    z = np.stack([detrng.normal(key, draw + c) for c in range(4)], axis=1)

    sqrt_cov = pose.covariance_sqrt()
    eps = z[:, :3] @ sqrt_cov.T
    origins = pose.position[None, :] + eps[:, :2]
    headings = pose.heading + eps[:, 2] + azimuths[beam_of]
    directions = np.stack([np.cos(headings), np.sin(headings)], axis=1)
    lengths = np.clip(base_range[beam_of] + range_sigma * z[:, 3], _MIN_RAY, max_range)
    is_detection = detecting[beam_of]
    inv_k = 1.0 / k

    def tally(start: int, stop: int):
        part_det = np.zeros(spec.n_cells)
        part_miss = np.zeros(spec.n_cells)
        rays.accumulate_measurements(
            spec,
            origins[start:stop],
            directions[start:stop],
            lengths[start:stop],
            is_detection[start:stop],
            inv_k,
            part_det,
            part_miss,
        )
        return part_det, part_miss

    for part_det, part_miss in parallel.run_chunks(tally, m):
        det += part_det
        miss += part_miss
    return MeasurementGrid(spec, det, miss)


def merge(grids: Sequence[MeasurementGrid]) -> tuple[MeasurementGrid, ...]:
    """Bundle per-sensor grids for fusion, checking they share one spec.

    No summation happens here: pseudo-count weights are per sensor, so the
    grids must stay separate until the evidence update.
    """
    require(len(grids) >= 1, "merge requires at least one measurement grid")
    spec = grids[0].spec
    for grid in grids[1:]:
        if grid.spec != spec:
            raise ContractViolation("measurement grids were built on different grid specs")
    return tuple(grids)
