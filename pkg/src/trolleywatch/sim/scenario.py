"""Scenario documents: schema, defaults and validation.

A scenario is a JSON object describing one deployment: the trolley fleet,
the stations with their cameras, the passenger demand profile, scripted
camera occlusions and a handful of physical constants.  The full schema
is documented in docs/scenario_schema.md; unknown keys are rejected so
typos fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..errors import ScenarioError

_TOP_KEYS = {
    "seed", "fleet_size", "stations", "demand_schedule", "occluder_events",
    "crew_travel_time_s", "frame_period_s", "return_delay_s", "render",
    "pipeline", "monitor", "name",
}
_STATION_KEYS = {"station_id", "capacity", "initial_count", "camera_id", "demand_weight"}
_SEGMENT_KEYS = {"start_s", "rate_per_min"}
_OCCLUDER_KEYS = {"camera_id", "start_s", "duration_s", "coverage"}
_RENDER_KEYS = {
    "frame_w", "frame_h", "trolley_w", "trolley_h", "gap_x", "gap_y",
    "margin_x", "margin_y", "walkway_h", "people_max",
    "person_w_min", "person_w_max", "person_h_min", "person_h_max",
}
_MONITOR_KEYS = {"warning_frac", "critical_frac"}


@dataclass(frozen=True)
class StationSpec:
    station_id: str
    capacity: int
    initial_count: int
    camera_id: str
    demand_weight: float = 1.0


@dataclass(frozen=True)
class DemandSegment:
    start_s: float
    rate_per_min: float  # global arrival rate; split across stations by weight


@dataclass(frozen=True)
class OccluderEvent:
    camera_id: str
    start_s: float
    duration_s: float
    coverage: float  # fraction of the frame hidden, 0..1

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class RenderOptions:
    """Geometry of the rendered scene; defaults target 320x240 frames."""

    frame_w: int = 320
    frame_h: int = 240
    trolley_w: int = 24
    trolley_h: int = 16
    gap_x: int = 4
    gap_y: int = 6
    margin_x: int = 8
    margin_y: int = 8
    walkway_h: int = 30
    people_max: int = 3
    person_w_min: int = 10
    person_w_max: int = 16
    person_h_min: int = 12
    person_h_max: int = 20


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    fleet_size: int
    stations: tuple[StationSpec, ...]
    demand_schedule: tuple[DemandSegment, ...]
    occluder_events: tuple[OccluderEvent, ...]
    crew_travel_time_s: float = 120.0
    frame_period_s: float = 2.0
    return_delay_s: float = 0.0  # 0 means passengers keep trolleys forever
    render: RenderOptions = field(default_factory=RenderOptions)
    pipeline: dict = field(default_factory=dict)
    monitor: dict = field(default_factory=dict)
    name: str = ""

    def station(self, station_id: str) -> StationSpec:
        for st in self.stations:
            if st.station_id == station_id:
                return st
        raise ScenarioError(f"unknown station {station_id!r}")

    def camera_station(self, camera_id: str) -> StationSpec:
        for st in self.stations:
            if st.camera_id == camera_id:
                return st
        raise ScenarioError(f"unknown camera {camera_id!r}")


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return obj[key]


def load_scenario(source: str | os.PathLike | dict) -> ScenarioConfig:
    """Parse and validate a scenario document (path or already-loaded dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ScenarioError(f"scenario file not found: {source}")
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "scenario")

    raw_stations = _require(doc, "stations", "scenario")
    if not isinstance(raw_stations, list) or not raw_stations:
        raise ScenarioError("scenario.stations must be a non-empty list")

    stations: list[StationSpec] = []
    for i, raw in enumerate(raw_stations):
        where = f"stations[{i}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{where}: must be an object")
        _check_keys(raw, _STATION_KEYS, where)
        sid = str(_require(raw, "station_id", where))
        capacity = int(_require(raw, "capacity", where))
        if capacity <= 0:
            raise ScenarioError(f"{where}: capacity must be positive")
        initial = int(raw.get("initial_count", capacity))
        if not 0 <= initial <= capacity:
            raise ScenarioError(f"{where}: initial_count must be in [0, capacity]")
        weight = float(raw.get("demand_weight", 1.0))
        if weight < 0:
            raise ScenarioError(f"{where}: demand_weight must be >= 0")
        stations.append(StationSpec(
            station_id=sid,
            capacity=capacity,
            initial_count=initial,
            camera_id=str(raw.get("camera_id", f"cam-{sid}")),
            demand_weight=weight,
        ))

    ids = [s.station_id for s in stations]
    if len(set(ids)) != len(ids):
        raise ScenarioError("station_id values must be unique")
    cams = [s.camera_id for s in stations]
    if len(set(cams)) != len(cams):
        raise ScenarioError("camera_id values must be unique")

    segments: list[DemandSegment] = []
    for i, raw in enumerate(doc.get("demand_schedule", [])):
        where = f"demand_schedule[{i}]"
        _check_keys(raw, _SEGMENT_KEYS, where)
        seg = DemandSegment(
            start_s=float(_require(raw, "start_s", where)),
            rate_per_min=float(_require(raw, "rate_per_min", where)),
        )
        if seg.rate_per_min < 0:
            raise ScenarioError(f"{where}: rate_per_min must be >= 0")
        segments.append(seg)
    for a, b in zip(segments, segments[1:]):
        if b.start_s <= a.start_s:
            raise ScenarioError("demand_schedule segments must have increasing start_s")

    occluders: list[OccluderEvent] = []
    for i, raw in enumerate(doc.get("occluder_events", [])):
        where = f"occluder_events[{i}]"
        _check_keys(raw, _OCCLUDER_KEYS, where)
        ev = OccluderEvent(
            camera_id=str(_require(raw, "camera_id", where)),
            start_s=float(_require(raw, "start_s", where)),
            duration_s=float(_require(raw, "duration_s", where)),
            coverage=float(_require(raw, "coverage", where)),
        )
        if not 0.0 <= ev.coverage <= 1.0:
            raise ScenarioError(f"{where}: coverage must be in [0, 1]")
        if ev.duration_s <= 0:
            raise ScenarioError(f"{where}: duration_s must be positive")
        if ev.camera_id not in cams:
            raise ScenarioError(f"{where}: unknown camera_id {ev.camera_id!r}")
        occluders.append(ev)

    total_initial = sum(s.initial_count for s in stations)
    fleet = int(doc.get("fleet_size", total_initial))
    if fleet < total_initial:
        raise ScenarioError("fleet_size smaller than the sum of initial station counts")

    render_doc = doc.get("render", {})
    _check_keys(render_doc, _RENDER_KEYS, "render")
    render = RenderOptions(**render_doc)

    monitor_doc = dict(doc.get("monitor", {}))
    _check_keys(monitor_doc, _MONITOR_KEYS, "monitor")

    frame_period = float(doc.get("frame_period_s", 2.0))
    if frame_period <= 0:
        raise ScenarioError("frame_period_s must be positive")
    crew_travel = float(doc.get("crew_travel_time_s", 120.0))
    if crew_travel < 0:
        raise ScenarioError("crew_travel_time_s must be >= 0")
    return_delay = float(doc.get("return_delay_s", 0.0))
    if return_delay < 0:
        raise ScenarioError("return_delay_s must be >= 0")

    return ScenarioConfig(
        seed=int(doc.get("seed", 0)),
        fleet_size=fleet,
        stations=tuple(stations),
        demand_schedule=tuple(segments),
        occluder_events=tuple(occluders),
        crew_travel_time_s=crew_travel,
        frame_period_s=frame_period,
        return_delay_s=return_delay,
        render=render,
        pipeline=dict(doc.get("pipeline", {})),
        monitor=monitor_doc,
        name=str(doc.get("name", "")),
    )
