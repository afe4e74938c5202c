"""Synthetic scenario description and beam-level frame simulation.

Scenarios are pydantic models, so scenario files are plain JSON validated
against ``Scenario.model_json_schema()``.  Units are SI throughout and
angles are radians.  ``simulate_frame`` produces ideal first-hit beam
returns (occlusion-correct); measurement noise is injected later by the
beam sampler, which consumes the pose covariance carried on the frame.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ContractViolation, require
from .grid import GridSpec
from .sensing import BeamReturn, Pose

_EPS_T = 1e-9
_HIT_EPS = 1e-9


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    origin: tuple[float, float]
    cell_size: float = Field(gt=0)
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    tau: float = Field(gt=0)

    def to_spec(self, cell_size: Optional[float] = None, tau: Optional[float] = None) -> GridSpec:
        """Build the runtime GridSpec, optionally re-discretizing.

        A cell-size override keeps the physical extent fixed and recomputes
        the cell counts; a tau override changes the epoch duration only.
        """
        cs = self.cell_size if cell_size is None else cell_size
        require(cs > 0, "cell_size override must be positive")
        width, height = self.width, self.height
        if cell_size is not None and cell_size != self.cell_size:
            width = max(1, round(self.width * self.cell_size / cs))
            height = max(1, round(self.height * self.cell_size / cs))
        t = self.tau if tau is None else tau
        require(t > 0, "tau override must be positive")
        return GridSpec(tuple(self.origin), cs, width, height, t)


class Waypoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: float
    x: float
    y: float
    heading: Optional[float] = None


class BodyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    length: float = Field(default=4.4, gt=0)
    width: float = Field(default=1.8, gt=0)


class SensorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beam_count: int = Field(default=180, ge=0)
    fov: float = Field(default=math.pi, gt=0, le=2 * math.pi)
    max_range: float = Field(default=30.0, gt=0)
    range_sigma: float = Field(default=0.05, ge=0)
    samples_per_beam: int = Field(default=10, ge=1)
    lr_det: float = Field(default=3.0, gt=1)
    lr_miss: float = Field(default=1.5, gt=1)
    pose_covariance: list[list[float]] = Field(
        default_factory=lambda: [[0.0] * 3 for _ in range(3)]
    )

    @model_validator(mode="after")
    def _check_covariance(self):
        cov = np.asarray(self.pose_covariance, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError("pose_covariance must be a 3x3 matrix")
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError("pose_covariance must be symmetric")
        if np.any(cov) and float(np.linalg.eigvalsh(cov).min()) < -1e-9:
            raise ValueError("pose_covariance must be positive semidefinite")
        return self


class VehicleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    role: Literal["ego", "collaborator"]
    trajectory: list[Waypoint] = Field(min_length=1)
    sensor: SensorConfig = Field(default_factory=SensorConfig)
    body: BodyConfig = Field(default_factory=BodyConfig)
    mass: float = Field(default=1500.0, gt=0)

    @model_validator(mode="after")
    def _check_trajectory(self):
        ts = [w.t for w in self.trajectory]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"vehicle {self.id}: waypoint times must be strictly increasing")
        return self


class ShapeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["rectangle", "circle"]
    length: Optional[float] = Field(default=None, gt=0)
    width: Optional[float] = Field(default=None, gt=0)
    radius: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_fields(self):
        if self.kind == "rectangle":
            if self.length is None or self.width is None:
                raise ValueError("rectangle shape requires length and width")
        elif self.radius is None:
            raise ValueError("circle shape requires radius")
        return self


class ObjectConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = "object"
    shape: ShapeConfig
    trajectory: list[Waypoint] = Field(min_length=1)
    # Descriptive label for large view blockers (plots, docs); every object
    # is solid to beams regardless.
    is_occluder: bool = False

    @model_validator(mode="after")
    def _check_trajectory(self):
        ts = [w.t for w in self.trajectory]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"object {self.id}: waypoint times must be strictly increasing")
        return self


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: GridConfig
    duration: float = Field(gt=0)
    vehicles: list[VehicleConfig] = Field(min_length=1)
    objects: list[ObjectConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_scenario(self):
        egos = [v for v in self.vehicles if v.role == "ego"]
        if len(egos) != 1:
            raise ValueError("scenario must define exactly one ego vehicle")
        for vehicle in self.vehicles:
            if not _covers(vehicle.trajectory, self.duration):
                raise ValueError(f"vehicle {vehicle.id}: trajectory must cover [0, duration]")
        for obj in self.objects:
            if not _covers(obj.trajectory, self.duration):
                raise ValueError(f"object {obj.id}: trajectory must cover [0, duration]")
        return self

    @property
    def ego(self) -> VehicleConfig:
        return next(v for v in self.vehicles if v.role == "ego")


def _covers(trajectory: Sequence[Waypoint], duration: float) -> bool:
    if len(trajectory) == 1:  # single waypoint means static
        return True
    return trajectory[0].t <= _EPS_T and trajectory[-1].t >= duration - _EPS_T


def _wrap(angle: float) -> float:
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def _effective_headings(wps: Sequence[Waypoint]) -> list[float]:
    """Waypoint headings, deriving unset ones from the travel direction."""
    n = len(wps)
    seg: list[Optional[float]] = []
    for a, b in zip(wps, wps[1:]):
        dx, dy = b.x - a.x, b.y - a.y
        seg.append(math.atan2(dy, dx) if (dx != 0.0 or dy != 0.0) else None)
    heads: list[float] = []
    prev = 0.0
    for i in range(n):
        if wps[i].heading is not None:
            h = float(wps[i].heading)
        else:
            outgoing = seg[i] if i < n - 1 else None
            incoming = seg[i - 1] if i > 0 else None
            h = outgoing if outgoing is not None else (incoming if incoming is not None else prev)
        heads.append(h)
        prev = h
    return heads


def interpolate(trajectory: Sequence[Waypoint], t: float) -> tuple[np.ndarray, float, np.ndarray]:
    """Pose and velocity at time ``t``: linear position, shortest-arc heading,
    per-segment finite-difference velocity.  Raises outside the span."""
    wps = list(trajectory)
    if len(wps) == 1:
        w = wps[0]
        return np.array([w.x, w.y]), _effective_headings(wps)[0], np.zeros(2)
    ts = [w.t for w in wps]
    if t < ts[0] - _EPS_T or t > ts[-1] + _EPS_T:
        raise ContractViolation(f"time {t} outside trajectory span [{ts[0]}, {ts[-1]}]")
    t = min(max(t, ts[0]), ts[-1])
    i = min(max(bisect_right(ts, t) - 1, 0), len(wps) - 2)
    a, b = wps[i], wps[i + 1]
    span = b.t - a.t
    s = (t - a.t) / span
    position = np.array([a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)])
    heads = _effective_headings(wps)
    heading = _wrap(heads[i] + s * math.remainder(heads[i + 1] - heads[i], 2.0 * math.pi))
    velocity = np.array([(b.x - a.x) / span, (b.y - a.y) / span])
    return position, heading, velocity


@dataclass(frozen=True)
class SensorFrame:
    """Ideal beam returns of one vehicle at one epoch, sorted by azimuth."""

    vehicle_id: str
    epoch: int
    pose: Pose
    returns: tuple[BeamReturn, ...]


def _ray_circle(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    rel = origin - center
    b = dirs[:, 0] * rel[0] + dirs[:, 1] * rel[1]
    c0 = float(rel @ rel) - radius * radius
    disc = b * b - c0
    with np.errstate(invalid="ignore"):
        t = -b - np.sqrt(disc)
    hit = (disc >= 0.0) & (t > _HIT_EPS)
    return np.where(hit, t, np.inf)


def _ray_rectangle(
    origin: np.ndarray,
    dirs: np.ndarray,
    center: np.ndarray,
    heading: float,
    length: float,
    width: float,
) -> np.ndarray:
    c, s = math.cos(-heading), math.sin(-heading)
    rel = origin - center
    ox = c * rel[0] - s * rel[1]
    oy = s * rel[0] + c * rel[1]
    dxl = c * dirs[:, 0] - s * dirs[:, 1]
    dyl = s * dirs[:, 0] + c * dirs[:, 1]
    hl, hw = 0.5 * length, 0.5 * width

    def axis(o: float, d: np.ndarray, half: float) -> tuple[np.ndarray, np.ndarray]:
        zero = d == 0.0
        guarded = np.where(zero, 1.0, d)
        ta = (-half - o) / guarded
        tb = (half - o) / guarded
        lo = np.where(zero, -np.inf, np.minimum(ta, tb))
        hi = np.where(zero, np.inf, np.maximum(ta, tb))
        outside = zero & (abs(o) > half)
        lo = np.where(outside, np.inf, lo)
        hi = np.where(outside, -np.inf, hi)
        return lo, hi

    lox, hix = axis(ox, dxl, hl)
    loy, hiy = axis(oy, dyl, hw)
    enter = np.maximum(lox, loy)
    exit_ = np.minimum(hix, hiy)
    hit = (enter <= exit_) & (enter > _HIT_EPS)
    return np.where(hit, enter, np.inf)


def simulate_frame(
    scenario: Scenario, vehicle_id: str, epoch: int, tau: Optional[float] = None
) -> SensorFrame:
    """Exact first-hit beam returns for one vehicle at ``epoch``.

    Every other vehicle body and every object is solid; the nearest
    intersection along each beam wins, and beams that hit nothing within the
    sensor's max range come back flagged max-range.
    """
    step = scenario.grid.tau if tau is None else tau
    t = epoch * step
    require(epoch >= 0 and t <= scenario.duration + _EPS_T, f"epoch {epoch} outside scenario duration")
    vehicle = next((v for v in scenario.vehicles if v.id == vehicle_id), None)
    if vehicle is None:
        raise ContractViolation(f"unknown vehicle id {vehicle_id!r}")

    position, heading, _ = interpolate(vehicle.trajectory, t)
    sensor = vehicle.sensor
    pose = Pose(position, heading, np.asarray(sensor.pose_covariance, dtype=float))
    n_beams = sensor.beam_count
    if n_beams == 0:
        return SensorFrame(vehicle_id, epoch, pose, ())

    azimuths = -0.5 * sensor.fov + (np.arange(n_beams) + 0.5) * (sensor.fov / n_beams)
    world = heading + azimuths
    dirs = np.stack([np.cos(world), np.sin(world)], axis=1)

    ranges = np.full(n_beams, np.inf)
    for other in scenario.vehicles:
        if other.id == vehicle_id:
            continue
        opos, ohead, _ = interpolate(other.trajectory, t)
        hits = _ray_rectangle(position, dirs, opos, ohead, other.body.length, other.body.width)
        ranges = np.minimum(ranges, hits)
    for obj in scenario.objects:
        opos, ohead, _ = interpolate(obj.trajectory, t)
        if obj.shape.kind == "circle":
            hits = _ray_circle(position, dirs, opos, obj.shape.radius)
        else:
            hits = _ray_rectangle(position, dirs, opos, ohead, obj.shape.length, obj.shape.width)
        ranges = np.minimum(ranges, hits)

    detected = ranges < sensor.max_range
    returns = tuple(
        BeamReturn(
            azimuth=float(azimuths[i]),
            range=float(ranges[i]) if detected[i] else sensor.max_range,
            is_max_range=not bool(detected[i]),
        )
        for i in range(n_beams)
    )
    return SensorFrame(vehicle_id, epoch, pose, returns)


def bundled_intersection() -> Scenario:
    """Canonical occluded-intersection scenario.

    A westbound ego approaches an intersection past a stopped bus that hides
    the north crosswalk; a pedestrian crosses behind the bus while a
    collaborator approaching from the west (then turning south) has a clear
    view.  60 m x 60 m grid, 0.5 m cells, 10 Hz epochs, 12 s.
    """
    pose_cov = [[0.0625, 0.0, 0.0], [0.0, 0.0625, 0.0], [0.0, 0.0, 0.0004]]
    ego_sensor = SensorConfig(
        beam_count=90,
        fov=math.pi / 2,
        max_range=30.0,
        range_sigma=0.05,
        lr_det=3.0,
        lr_miss=1.5,
        pose_covariance=pose_cov,
    )
    collab_sensor = SensorConfig(
        beam_count=180,
        fov=math.pi,
        max_range=30.0,
        range_sigma=0.05,
        lr_det=3.0,
        lr_miss=1.5,
        pose_covariance=pose_cov,
    )
    return Scenario(
        grid=GridConfig(origin=(-30.0, -30.0), cell_size=0.5, width=120, height=120, tau=0.1),
        duration=12.0,
        vehicles=[
            VehicleConfig(
                id="ego",
                role="ego",
                trajectory=[
                    Waypoint(t=0.0, x=27.0, y=-1.75),
                    Waypoint(t=12.0, x=-27.0, y=-1.75),
                ],
                sensor=ego_sensor,
            ),
            VehicleConfig(
                id="collab",
                role="collaborator",
                trajectory=[
                    Waypoint(t=0.0, x=-27.0, y=1.75),
                    Waypoint(t=4.8, x=-5.0, y=1.75),
                    Waypoint(t=6.3, x=-1.75, y=-3.0),
                    Waypoint(t=12.0, x=-1.75, y=-26.0),
                ],
                sensor=collab_sensor,
            ),
        ],
        objects=[
            ObjectConfig(
                id="bus",
                shape=ShapeConfig(kind="rectangle", length=12.0, width=2.5),
                trajectory=[Waypoint(t=0.0, x=18.0, y=0.95, heading=0.0)],
                is_occluder=True,
            ),
            ObjectConfig(
                id="pedestrian",
                shape=ShapeConfig(kind="circle", radius=0.3),
                trajectory=[
                    Waypoint(t=0.0, x=-4.5, y=3.0),
                    Waypoint(t=12.0, x=-4.5, y=-13.8),
                ],
            ),
        ],
    )
