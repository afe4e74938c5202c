"""Particle-realized dynamic occupancy filter.

Each cell holds Beta occupancy evidence plus a share of a weighted particle
population carrying position and velocity.  One epoch is

    predict   - constant-velocity motion with process noise, survival
                scaling, and re-centering of each cell's Beta prior on the
                advected particle mass,
    update    - pseudo-count evidence absorption per cell followed by
                particle weight reconciliation (persistent rescale plus a
                newborn cohort), so that the summed particle weight in a
                cell equals its posterior occupancy,
    resample  - per-cell systematic down-sampling wherever the particle
                count exceeds the configured cap.

All randomness is keyed by (seed, stream, epoch, cell, slot) through
counter-based streams, so runs are bit-identical for a fixed seed
regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import detrng
from .beta import SensorModel, occupancy_mean, occupancy_variance, pseudo_counts
from .errors import ContractViolation, require
from .grid import CellIndex, GridSpec
from .sensing import MeasurementGrid


@dataclass(frozen=True)
class FilterConfig:
    """Filter parameters; defaults are tuned for desk-scale street scenes."""

    particles_per_cell_max: int = 30
    birth_fraction: float = 0.02
    survival_probability: float = 0.99
    position_noise: float = 0.1
    velocity_noise: float = 0.5
    birth_velocity_sigma: float = 2.0
    discount: float = 0.98
    seed: int = 0
    newborns_per_cell: int = 4
    mass_margin: float = 1e-3
    min_mass: float = 1e-12

    def __post_init__(self):
        require(self.particles_per_cell_max >= 1, "particles_per_cell_max must be at least 1")
        require(0.0 <= self.birth_fraction < 1.0, "birth_fraction must lie in [0, 1)")
        require(0.0 < self.survival_probability <= 1.0, "survival_probability must lie in (0, 1]")
        require(self.position_noise >= 0.0 and self.velocity_noise >= 0.0, "process noise must be non-negative")
        require(self.birth_velocity_sigma >= 0.0, "birth velocity sigma must be non-negative")
        require(0.0 <= self.discount <= 1.0, "discount must lie in [0, 1]")
        require(self.newborns_per_cell >= 1, "newborns_per_cell must be at least 1")


@dataclass(frozen=True)
class CellStatistics:
    occupancy: float
    mean_velocity: np.ndarray
    velocity_second_moment: float
    occupancy_variance: float


class OccupancyFilter:
    """Dynamic occupancy map over a fixed grid."""

    def __init__(self, spec: GridSpec, config: FilterConfig):
        self.spec = spec
        self.config = config
        n = spec.n_cells
        self.alpha = np.ones(n)
        self.beta = np.ones(n)
        self.occupancy = np.full(n, 0.5)
        self.mean_velocity = np.zeros((n, 2))
        self.velocity_second_moment = np.zeros(n)
        self._pos = np.empty((0, 2))
        self._vel = np.empty((0, 2))
        self._weight = np.empty(0)
        self._cells = np.empty(0, dtype=np.int64)
        self._epoch_counter = 0
        self._pending = False
        self._last_epoch = -1
        self._m_raw = np.zeros(n)
        self._m_pred = np.zeros(n)
        self._alpha_pred = np.ones(n)
        self._beta_pred = np.ones(n)

    # -- read-only views ---------------------------------------------------

    @property
    def particle_count(self) -> int:
        return len(self._weight)

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def velocities(self) -> np.ndarray:
        return self._vel

    @property
    def weights(self) -> np.ndarray:
        return self._weight

    @property
    def particle_cells(self) -> np.ndarray:
        return self._cells

    @property
    def predicted_mass(self) -> np.ndarray:
        return self._m_pred

    @property
    def predicted_alpha(self) -> np.ndarray:
        return self._alpha_pred

    @property
    def predicted_beta(self) -> np.ndarray:
        return self._beta_pred

    def cell_weight_sums(self) -> np.ndarray:
        return np.bincount(self._cells, weights=self._weight, minlength=self.spec.n_cells)

    # -- epoch steps ---------------------------------------------------------

    def predict(self) -> None:
        """Advance particles one epoch and re-center the Beta prior.

        Particles move under constant velocity plus Gaussian process noise,
        weights shrink by the survival probability, and particles that leave
        the grid retire.  The prior for the coming update keeps a discounted
        share of the accumulated evidence, re-centered on the advected
        per-cell mass:  kappa = discount * (alpha + beta - 2), prior =
        (1 + kappa*m, 1 + kappa*(1 - m)).
        """
        if self._pending:
            raise ContractViolation("a prediction is already pending; call update() first")
        cfg = self.config
        epoch = self._epoch_counter
        self._epoch_counter += 1

        m = len(self._weight)
        if m:
            self._pos += self._vel * self.spec.tau
            if cfg.position_noise > 0.0 or cfg.velocity_noise > 0.0:
                # one counter-based stream per epoch, consumed in slot order;
                # skipping unused noise does not shift other streams
                key = int(detrng.fold(cfg.seed, detrng.PREDICT, epoch))
                z = np.random.Generator(np.random.Philox(key=key)).standard_normal((m, 4))
                if cfg.position_noise > 0.0:
                    self._pos += cfg.position_noise * z[:, :2]
                if cfg.velocity_noise > 0.0:
                    self._vel = self._vel + cfg.velocity_noise * z[:, 2:]
            self._weight = self._weight * cfg.survival_probability
            flat, inside = self.spec.cells_of(self._pos)
            if not np.all(inside):
                self._pos = self._pos[inside]
                self._vel = self._vel[inside]
                self._weight = self._weight[inside]
                flat = flat[inside]
            self._cells = flat

        n = self.spec.n_cells
        self._m_raw = np.bincount(self._cells, weights=self._weight, minlength=n)
        self._m_pred = np.minimum(self._m_raw, 1.0 - cfg.mass_margin)
        kappa = cfg.discount * (self.alpha + self.beta - 2.0)
        self._alpha_pred = 1.0 + kappa * self._m_pred
        self._beta_pred = 1.0 + kappa * (1.0 - self._m_pred)
        self._pending = True
        self._last_epoch = epoch

    def update(self, measurements: Sequence[tuple[SensorModel, MeasurementGrid]]) -> None:
        """Absorb one epoch of per-sensor evidence and reconcile particles.

        Weights for every sensor come from the predicted (pre-update) state,
        making fusion order-invariant.  Afterwards each cell's particle
        weights sum to its posterior occupancy: persistent particles are
        rescaled against the actual surviving mass and a newborn cohort
        carries the birth share (the full posterior when the cell held no
        mass).
        """
        if not self._pending:
            raise ContractViolation("update() requires a pending prediction")
        for _, grid in measurements:
            if grid.spec != self.spec:
                raise ContractViolation("measurement grid spec does not match the filter grid")
        cfg = self.config
        epoch = self._last_epoch
        n = self.spec.n_cells

        per_sensor = [(model, grid.det, grid.miss) for model, grid in measurements]
        d_alpha, d_beta = pseudo_counts(per_sensor, self._alpha_pred, self._beta_pred)
        self.alpha = self._alpha_pred + d_alpha
        self.beta = self._beta_pred + d_beta
        r = occupancy_mean(self.alpha, self.beta)
        self.occupancy = r

        # Rescale against the actual surviving mass (not the margin-clipped
        # prediction) so the per-cell weight sum lands on r exactly.
        active = self._m_raw > cfg.min_mass
        factor = np.where(active, r * (1.0 - cfg.birth_fraction) / np.where(active, self._m_raw, 1.0), 0.0)
        if len(self._weight):
            self._weight = self._weight * factor[self._cells]
        born_total = np.where(active, r * cfg.birth_fraction, r)

        nb = cfg.newborns_per_cell
        cell_ids = np.repeat(np.arange(n, dtype=np.int64), nb)
        packed = (cell_ids * nb + np.tile(np.arange(nb, dtype=np.int64), n)) * 2
        key_pos = detrng.fold(cfg.seed, detrng.BIRTH_POS, epoch)
        key_vel = detrng.fold(cfg.seed, detrng.BIRTH_VEL, epoch)
        ux = detrng.uniform(key_pos, packed)
        uy = detrng.uniform(key_pos, packed + 1)
        cols = cell_ids % self.spec.width
        rows = cell_ids // self.spec.width
        h = self.spec.cell_size
        born_pos = np.stack(
            [self.spec.origin[0] + (cols + ux) * h, self.spec.origin[1] + (rows + uy) * h], axis=1
        )
        born_vel = cfg.birth_velocity_sigma * np.stack(
            [detrng.normal(key_vel, packed), detrng.normal(key_vel, packed + 1)], axis=1
        )
        born_weight = np.repeat(born_total / nb, nb)

        self._pos = np.concatenate([self._pos, born_pos])
        self._vel = np.concatenate([self._vel, born_vel])
        self._weight = np.concatenate([self._weight, born_weight])
        self._cells = np.concatenate([self._cells, cell_ids])

        self._refresh_velocity_stats()
        self._pending = False

    def resample(self) -> None:
        """Systematically down-sample every cell holding more particles than
        the cap; per-cell weight totals are preserved to float round-off."""
        cap = self.config.particles_per_cell_max
        n = self.spec.n_cells
        counts = np.bincount(self._cells, minlength=n)
        if not np.any(counts > cap):
            return

        order = np.argsort(self._cells, kind="stable")
        cells_s = self._cells[order]
        w_s = self._weight[order]

        starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        rank_s = np.arange(len(cells_s), dtype=np.int64) - starts[cells_s]
        out_counts = np.minimum(counts, cap)
        out_starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(out_counts, out=out_starts[1:])
        m_out = int(out_starts[-1])

        # destination-indexed map into the sorted ordering; particle rows are
        # gathered once at the end
        src_sorted = np.empty(m_out, dtype=np.int64)
        new_w = np.empty(m_out)

        keep = counts[cells_s] <= cap
        dest_keep = out_starts[cells_s[keep]] + rank_s[keep]
        src_sorted[dest_keep] = np.flatnonzero(keep)
        new_w[dest_keep] = w_s[keep]

        over = np.flatnonzero(counts > cap)
        cw = np.cumsum(w_s)
        seg_start = starts[over]
        seg_end = seg_start + counts[over]
        base = np.where(seg_start > 0, cw[seg_start - 1], 0.0)
        w_over = cw[seg_end - 1] - base
        u = np.asarray(detrng.uniform(detrng.fold(self.config.seed, detrng.RESAMPLE, self._last_epoch), over))
        targets = base[:, None] + ((u[:, None] + np.arange(cap)[None, :]) / cap) * w_over[:, None]
        picks = np.searchsorted(cw, targets, side="left")
        picks = np.clip(picks, seg_start[:, None], seg_end[:, None] - 1)

        dest_over = (out_starts[over][:, None] + np.arange(cap)[None, :]).ravel()
        src_sorted[dest_over] = picks.ravel()
        new_w[dest_over] = np.repeat(w_over / cap, cap)

        src = order[src_sorted]
        self._pos = self._pos[src]
        self._vel = self._vel[src]
        self._weight = new_w
        self._cells = self._cells[src]

    # -- queries -------------------------------------------------------------

    def cell_statistics(self, idx: CellIndex) -> CellStatistics:
        i = self.spec.flat(idx)
        return CellStatistics(
            occupancy=float(self.occupancy[i]),
            mean_velocity=self.mean_velocity[i].copy(),
            velocity_second_moment=float(self.velocity_second_moment[i]),
            occupancy_variance=float(occupancy_variance(self.alpha[i], self.beta[i])),
        )

    def snapshot(self) -> dict[str, np.ndarray]:
        """Per-cell state fields for serialization (row-major order)."""
        return {
            "alpha": self.alpha.copy(),
            "beta": self.beta.copy(),
            "r": self.occupancy.copy(),
            "vx": self.mean_velocity[:, 0].copy(),
            "vy": self.mean_velocity[:, 1].copy(),
            "v2": self.velocity_second_moment.copy(),
        }

    def _refresh_velocity_stats(self) -> None:
        n = self.spec.n_cells
        w = self._weight
        cells = self._cells
        total = np.bincount(cells, weights=w, minlength=n)
        occupied = total > 0.0
        safe = np.where(occupied, total, 1.0)
        vx = np.bincount(cells, weights=w * self._vel[:, 0], minlength=n) / safe
        vy = np.bincount(cells, weights=w * self._vel[:, 1], minlength=n) / safe
        vx = np.where(occupied, vx, 0.0)
        vy = np.where(occupied, vy, 0.0)
        dvx = self._vel[:, 0] - vx[cells]
        dvy = self._vel[:, 1] - vy[cells]
        m2 = np.bincount(cells, weights=w * (dvx * dvx + dvy * dvy), minlength=n) / safe
        self.mean_velocity = np.stack([vx, vy], axis=1)
        self.velocity_second_moment = np.where(occupied, m2, 0.0)
