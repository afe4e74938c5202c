"""Uniform square-cell discretization of a 2-D world region.

Cells tile the plane half-open: cell (i, j) owns
[origin_x + i*s, origin_x + (i+1)*s) x [origin_y + j*s, origin_y + (j+1)*s),
so every in-grid point belongs to exactly one cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Generic, Iterator, NamedTuple, Optional, Sequence, TypeVar

import numpy as np

from .errors import ContractViolation, require

S = TypeVar("S")


class CellIndex(NamedTuple):
    col: int
    row: int


@dataclass(frozen=True)
class GridSpec:
    """Map geometry: origin corner (m), cell edge (m), cell counts, epoch duration (s)."""

    origin: tuple[float, float]
    cell_size: float
    width: int
    height: int
    tau: float

    def __post_init__(self):
        require(len(self.origin) == 2, "origin must be a 2-D point")
        require(self.cell_size > 0, "cell_size must be positive")
        require(self.width >= 1 and self.height >= 1, "grid must hold at least one cell")
        require(self.tau > 0, "tau must be positive")

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def x_max(self) -> float:
        return self.origin[0] + self.width * self.cell_size

    @property
    def y_max(self) -> float:
        return self.origin[1] + self.height * self.cell_size

    def world_to_cell(self, point: Sequence[float]) -> Optional[CellIndex]:
        """Cell owning ``point`` under the half-open tiling, or None if off-grid."""
        fx = (point[0] - self.origin[0]) / self.cell_size
        fy = (point[1] - self.origin[1]) / self.cell_size
        if fx < 0.0 or fy < 0.0 or fx >= self.width or fy >= self.height:
            return None
        return CellIndex(int(math.floor(fx)), int(math.floor(fy)))

    def cell_center(self, idx: CellIndex) -> np.ndarray:
        self.require_index(idx)
        return np.array(
            [
                self.origin[0] + (idx[0] + 0.5) * self.cell_size,
                self.origin[1] + (idx[1] + 0.5) * self.cell_size,
            ]
        )

    def contains(self, idx: CellIndex) -> bool:
        col, row = idx
        return 0 <= col < self.width and 0 <= row < self.height

    def require_index(self, idx: CellIndex) -> None:
        require(self.contains(idx), f"cell index {tuple(idx)} outside {self.width}x{self.height} grid")

    def flat(self, idx: CellIndex) -> int:
        """Row-major flat offset of a valid index."""
        self.require_index(idx)
        return idx[1] * self.width + idx[0]

    def unflat(self, i: int) -> CellIndex:
        require(0 <= i < self.n_cells, f"flat index {i} out of range")
        return CellIndex(i % self.width, i // self.width)

    def cells_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized cell lookup for an (N, 2) array.

        Returns (flat_ids, inside); flat_ids entries are meaningful only
        where ``inside`` is True.
        """
        fx = (points[:, 0] - self.origin[0]) / self.cell_size
        fy = (points[:, 1] - self.origin[1]) / self.cell_size
        inside = (fx >= 0.0) & (fy >= 0.0) & (fx < self.width) & (fy < self.height)
        cols = np.floor(fx).astype(np.int64)
        rows = np.floor(fy).astype(np.int64)
        flat = rows * self.width + cols
        return flat, inside


class GridMap(Generic[S]):
    """Dense row-major per-cell storage over a fixed GridSpec.

    The spec never changes after construction; disjoint cells may be
    written concurrently.
    """

    def __init__(self, spec: GridSpec, cells: Sequence[S]):
        require(len(cells) == spec.n_cells, "cells length must equal width*height")
        self.spec = spec
        self.cells = list(cells)

    @classmethod
    def filled(cls, spec: GridSpec, factory) -> "GridMap[S]":
        return cls(spec, [factory() for _ in range(spec.n_cells)])

    def __getitem__(self, idx: CellIndex) -> S:
        return self.cells[self.spec.flat(idx)]

    def __setitem__(self, idx: CellIndex, value: S) -> None:
        self.cells[self.spec.flat(idx)] = value

    def items(self) -> Iterator[tuple[CellIndex, S]]:
        for i, value in enumerate(self.cells):
            yield self.spec.unflat(i), value

    def __len__(self) -> int:
        return len(self.cells)
