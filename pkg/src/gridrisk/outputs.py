"""Serialization of run artifacts.

Floats are written with ``repr`` (shortest round-trip form), so emitted
files are byte-stable for identical inputs and parse back to the exact
same values: every format here satisfies a parse-emit-parse fixpoint.
"""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np

from .errors import require
from .grid import GridSpec
from .risk import RiskProfile
from .sensing import MeasurementGrid

RISK_HEADER = "epoch,t,risk_mean,risk_var,acc_mean,acc_var,acc_plus_2sigma"
COMPARE_HEADER = "epoch,t,ego_acc_mean,ego_acc_plus_2sigma,coop_acc_mean,coop_acc_plus_2sigma"

VARIANCE_NOTE = (
    "accumulated variance sums per-epoch variances under an independence "
    "assumption across epochs; only Beta map uncertainty is propagated"
)


def format_float(x: float) -> str:
    return repr(float(x))


def risk_csv(profile: RiskProfile) -> str:
    lines = [RISK_HEADER]
    for epoch, t, mean, var, acc_m, acc_v, band in profile.rows():
        lines.append(
            f"{epoch},{format_float(t)},{format_float(mean)},{format_float(var)},"
            f"{format_float(acc_m)},{format_float(acc_v)},{format_float(band)}"
        )
    return "\n".join(lines) + "\n"


def parse_risk_csv(text: str) -> dict[str, np.ndarray]:
    lines = [line for line in text.splitlines() if line]
    require(lines and lines[0] == RISK_HEADER, "not a risk profile CSV")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    cols = {name: np.array([float(row[i]) for row in rows]) for i, name in enumerate(names)}
    cols["epoch"] = cols["epoch"].astype(np.int64)
    return cols


def map_csv(spec: GridSpec, fields: Mapping[str, np.ndarray]) -> str:
    """Grid snapshot: ``col,row,<fields>``, one line per cell, row-major."""
    names = list(fields)
    arrays = [np.asarray(fields[name]).reshape(spec.n_cells) for name in names]
    lines = ["col,row," + ",".join(names)]
    width = spec.width
    for i in range(spec.n_cells):
        values = ",".join(format_float(a[i]) for a in arrays)
        lines.append(f"{i % width},{i // width},{values}")
    return "\n".join(lines) + "\n"


def parse_map_csv(text: str) -> dict[str, np.ndarray]:
    lines = [line for line in text.splitlines() if line]
    require(len(lines) >= 1 and lines[0].startswith("col,row"), "not a grid snapshot CSV")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    out: dict[str, np.ndarray] = {}
    for i, name in enumerate(names):
        values = np.array([float(row[i]) for row in rows])
        out[name] = values.astype(np.int64) if name in ("col", "row") else values
    return out


def measurement_csv(grid: MeasurementGrid) -> str:
    return map_csv(grid.spec, {"det": grid.det, "miss": grid.miss})


def compare_csv(ego_profile: RiskProfile, coop_profile: RiskProfile) -> str:
    """Side-by-side accumulated curves with their +2 sigma bands."""
    require(len(ego_profile) == len(coop_profile), "profiles must cover the same epochs")
    ego_band = ego_profile.plus_two_sigma()
    coop_band = coop_profile.plus_two_sigma()
    lines = [COMPARE_HEADER]
    for k in range(len(ego_profile)):
        lines.append(
            f"{k},{format_float(ego_profile.times[k])},"
            f"{format_float(ego_profile.accumulated_mean[k])},{format_float(ego_band[k])},"
            f"{format_float(coop_profile.accumulated_mean[k])},{format_float(coop_band[k])}"
        )
    return "\n".join(lines) + "\n"


def parse_compare_csv(text: str) -> dict[str, np.ndarray]:
    lines = [line for line in text.splitlines() if line]
    require(lines and lines[0] == COMPARE_HEADER, "not a comparison CSV")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    cols = {name: np.array([float(row[i]) for row in rows]) for i, name in enumerate(names)}
    cols["epoch"] = cols["epoch"].astype(np.int64)
    return cols


def run_metadata(payload: dict) -> str:
    """Deterministic JSON metadata record (config echo, versions, seed)."""
    record = dict(payload)
    record.setdefault("variance_model", VARIANCE_NOTE)
    return json.dumps(record, indent=2, sort_keys=True) + "\n"
