"""Exact ray traversal across grid cells (2-D incremental cell stepping).

``cast_ray`` walks one segment and reports every cell the open segment
passes through plus the cell holding the endpoint.  ``cast_ray_batch`` is
the vectorized equivalent used by the beam sampler; both evaluate the same
float expressions so their traversals agree bit for bit.

Corner crossings take the diagonal: a segment through a cell corner touches
the two diagonal cells only (the corner point itself belongs to the upper
cell under the half-open tiling).  The x index is stepped before y inside
such a move, which fixes the truncation order at grid edges.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractViolation, require
from .grid import CellIndex, GridSpec

_SQRT2 = math.sqrt(2.0)


def _slab(origin: float, d: float, lo: float, hi: float) -> tuple[float, float]:
    """Parameter window in which the ray coordinate lies inside [lo, hi)."""
    if d == 0.0:
        if origin < lo or origin >= hi:
            return math.inf, -math.inf
        return -math.inf, math.inf
    ta = (lo - origin) / d
    tb = (hi - origin) / d
    return (ta, tb) if ta <= tb else (tb, ta)


def cast_ray(
    spec: GridSpec, origin, direction, length: float
) -> tuple[list[CellIndex], CellIndex | None]:
    """Trace a segment of ``length`` from ``origin`` along unit ``direction``.

    Returns (traversed, terminal): ``traversed`` lists, in order, every cell
    the open segment passes through excluding the terminal cell; ``terminal``
    is the cell containing the endpoint (None when the endpoint is off-grid,
    in which case the traversal is truncated at the grid boundary).  An
    off-grid origin starts the traversal at the grid entry point.
    """
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(direction[0]), float(direction[1])
    if dx == 0.0 and dy == 0.0:
        raise ContractViolation("ray direction must be non-zero")
    require(length > 0.0, "ray length must be positive")

    h = spec.cell_size
    gx0, gy0 = spec.origin
    end = (ox + dx * length, oy + dy * length)
    terminal = spec.world_to_cell(end)

    lox, hix = _slab(ox, dx, gx0, spec.x_max)
    loy, hiy = _slab(oy, dy, gy0, spec.y_max)
    t0 = max(0.0, lox, loy)
    t1 = min(length, hix, hiy)
    if not t0 < t1:
        return [], terminal

    px = ox + dx * t0
    py = oy + dy * t0
    fx = (px - gx0) / h
    fy = (py - gy0) / h
    icx = math.floor(fx)
    icy = math.floor(fy)
    if fx == icx and dx < 0.0:
        icx -= 1.0
    if fy == icy and dy < 0.0:
        icy -= 1.0
    cx, cy = int(icx), int(icy)
    if not (0 <= cx < spec.width and 0 <= cy < spec.height):
        return [], terminal

    sx = 1 if dx > 0.0 else -1
    sy = 1 if dy > 0.0 else -1
    if dx > 0.0:
        tmax_x = (gx0 + (cx + 1) * h - ox) / dx
        tdx = h / dx
    elif dx < 0.0:
        tmax_x = (gx0 + cx * h - ox) / dx
        tdx = h / -dx
    else:
        tmax_x = math.inf
        tdx = math.inf
    if dy > 0.0:
        tmax_y = (gy0 + (cy + 1) * h - oy) / dy
        tdy = h / dy
    elif dy < 0.0:
        tmax_y = (gy0 + cy * h - oy) / dy
        tdy = h / -dy
    else:
        tmax_y = math.inf
        tdy = math.inf

    visited = [CellIndex(cx, cy)]
    while True:
        tn = tmax_x if tmax_x <= tmax_y else tmax_y
        if tn >= t1:
            break
        if tmax_x == tmax_y:
            cx += sx
            if cx < 0 or cx >= spec.width:
                break
            tmax_x += tdx
            cy += sy
            if cy < 0 or cy >= spec.height:
                break
            tmax_y += tdy
        elif tmax_x < tmax_y:
            cx += sx
            if cx < 0 or cx >= spec.width:
                break
            tmax_x += tdx
        else:
            cy += sy
            if cy < 0 or cy >= spec.height:
                break
            tmax_y += tdy
        visited.append(CellIndex(cx, cy))

    if terminal is not None and visited[-1] == terminal:
        return visited[:-1], terminal
    return visited, terminal


def max_visited_cells(spec: GridSpec, max_length: float) -> int:
    """Upper bound on cells one ray of ``max_length`` can touch."""
    by_length = int(math.ceil(max_length * _SQRT2 / spec.cell_size)) + 4
    return min(by_length, spec.width + spec.height + 2)


def cast_ray_batch(
    spec: GridSpec,
    origins: np.ndarray,
    directions: np.ndarray,
    lengths: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``cast_ray`` over N rays.

    Returns (visited, counts, terminal): ``visited`` is (N, S) of flat cell
    ids padded with -1 listing every cell each ray touches in order
    (terminal included when reached), ``counts`` the number of valid
    entries, ``terminal`` the flat id of the endpoint cell or -1.
    """
    n = len(lengths)
    h = spec.cell_size
    gx0, gy0 = spec.origin
    w, ht = spec.width, spec.height
    cap = max_visited_cells(spec, float(np.max(lengths))) if n else 1

    ox = np.asarray(origins[:, 0], dtype=np.float64)
    oy = np.asarray(origins[:, 1], dtype=np.float64)
    dx = np.asarray(directions[:, 0], dtype=np.float64)
    dy = np.asarray(directions[:, 1], dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)

    end_x = ox + dx * lengths
    end_y = oy + dy * lengths
    tfx = (end_x - gx0) / h
    tfy = (end_y - gy0) / h
    term_in = (tfx >= 0.0) & (tfy >= 0.0) & (tfx < w) & (tfy < ht)
    terminal = np.where(
        term_in,
        np.floor(tfy).astype(np.int64) * w + np.floor(tfx).astype(np.int64),
        -1,
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        zero_x = dx == 0.0
        ta = np.where(zero_x, -np.inf, (gx0 - ox) / np.where(zero_x, 1.0, dx))
        tb = np.where(zero_x, np.inf, (spec.x_max - ox) / np.where(zero_x, 1.0, dx))
        lox, hix = np.minimum(ta, tb), np.maximum(ta, tb)
        dead_x = zero_x & ((ox < gx0) | (ox >= spec.x_max))
        zero_y = dy == 0.0
        ta = np.where(zero_y, -np.inf, (gy0 - oy) / np.where(zero_y, 1.0, dy))
        tb = np.where(zero_y, np.inf, (spec.y_max - oy) / np.where(zero_y, 1.0, dy))
        loy, hiy = np.minimum(ta, tb), np.maximum(ta, tb)
        dead_y = zero_y & ((oy < gy0) | (oy >= spec.y_max))

    t0 = np.maximum(0.0, np.maximum(lox, loy))
    t1 = np.minimum(lengths, np.minimum(hix, hiy))
    alive = (t0 < t1) & ~dead_x & ~dead_y

    px = ox + dx * t0
    py = oy + dy * t0
    fx = (px - gx0) / h
    fy = (py - gy0) / h
    icx = np.floor(fx)
    icy = np.floor(fy)
    icx = np.where((fx == icx) & (dx < 0.0), icx - 1.0, icx)
    icy = np.where((fy == icy) & (dy < 0.0), icy - 1.0, icy)
    cx = icx.astype(np.int64)
    cy = icy.astype(np.int64)
    alive &= (cx >= 0) & (cx < w) & (cy >= 0) & (cy < ht)

    sx = np.where(dx > 0.0, 1, -1).astype(np.int64)
    sy = np.where(dy > 0.0, 1, -1).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        bx = np.where(dx > 0.0, gx0 + (cx + 1) * h, gx0 + cx * h)
        tmax_x = np.where(zero_x, np.inf, (bx - ox) / np.where(zero_x, 1.0, dx))
        tdx = np.where(zero_x, np.inf, h / np.abs(np.where(zero_x, 1.0, dx)))
        by = np.where(dy > 0.0, gy0 + (cy + 1) * h, gy0 + cy * h)
        tmax_y = np.where(zero_y, np.inf, (by - oy) / np.where(zero_y, 1.0, dy))
        tdy = np.where(zero_y, np.inf, h / np.abs(np.where(zero_y, 1.0, dy)))

    visited = np.full((n, cap), -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    visited[alive, 0] = cy[alive] * w + cx[alive]
    counts[alive] = 1

    step = 1
    while True:
        tn = np.minimum(tmax_x, tmax_y)
        cont = alive & (tn < t1)
        if not np.any(cont):
            break
        tie = cont & (tmax_x == tmax_y)
        go_x = cont & (tmax_x < tmax_y)
        go_y = cont & ~tie & ~go_x
        alive[cont] = False  # re-enabled below for rays that stay in-grid

        move_x = tie | go_x
        cx[move_x] += sx[move_x]
        ok_x = move_x & (cx >= 0) & (cx < w)
        tmax_x[ok_x] += tdx[ok_x]
        tie_ok = tie & ok_x

        move_y = tie_ok | go_y
        cy[move_y] += sy[move_y]
        ok_y = move_y & (cy >= 0) & (cy < ht)
        tmax_y[ok_y] += tdy[ok_y]

        rec = (go_x & ok_x) | (go_y & ok_y) | (tie_ok & ok_y)
        alive[rec] = True
        visited[rec, step] = cy[rec] * w + cx[rec]
        counts[rec] += 1
        step += 1

    return visited, counts, terminal


def accumulate_measurements(
    spec: GridSpec,
    origins: np.ndarray,
    directions: np.ndarray,
    lengths: np.ndarray,
    is_detection: np.ndarray,
    weight: float,
    det: np.ndarray,
    miss: np.ndarray,
) -> None:
    """Tally one batch of rays into detection / miss expectation arrays.

    Each ray adds ``weight`` to the miss count of every traversed cell and,
    for detection rays with an in-grid endpoint, to the detection count of
    the terminal cell.  Accumulation order is the ray order, so the result
    is independent of how callers schedule batches.
    """
    visited, _, terminal = cast_ray_batch(spec, origins, directions, lengths)
    valid = visited >= 0
    is_term_entry = (visited == terminal[:, None]) & (terminal >= 0)[:, None]
    miss_entries = visited[valid & ~is_term_entry]
    np.add.at(miss, miss_entries, weight)
    det_rays = np.asarray(is_detection, dtype=bool) & (terminal >= 0)
    np.add.at(det, terminal[det_rays], weight)
