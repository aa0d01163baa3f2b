"""Station status classification and the alert lifecycle.

Status is a pure function of the observed count against capacity
fractions; the boundary belongs to the more severe side:

    critical  when count <= floor(critical_frac * capacity)
    warning   when count <= floor(warning_frac * capacity)
    good      otherwise

``update_station`` turns a stream of (count, t) observations into alert
raise/resolve transitions.  At most one alert per (station, level) is
open at a time; a drop straight through both thresholds raises both
alerts at the same timestamp, and recovery resolves every level the
station climbed back above, stamping each with its response time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from ..errors import ObservationOrderError


class Status(str, enum.Enum):
    GOOD = "good"
    WARNING = "warning"
    CRITICAL = "critical"


_SEVERITY = {Status.GOOD: 0, Status.WARNING: 1, Status.CRITICAL: 2}


def severity(status: Status) -> int:
    return _SEVERITY[status]


@dataclass(frozen=True)
class ThresholdConfig:
    warning_frac: float = 0.5
    critical_frac: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.critical_frac <= self.warning_frac <= 1.0:
            raise ValueError(
                "thresholds need 0 <= critical_frac <= warning_frac <= 1, "
                f"got warning={self.warning_frac} critical={self.critical_frac}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ThresholdConfig":
        unknown = set(doc) - {"warning_frac", "critical_frac"}
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**doc)


def threshold_counts(capacity: int, cfg: ThresholdConfig) -> tuple[int, int]:
    """(warning_at, critical_at): the highest count inside each band.

    The tiny epsilon keeps fractions like 0.29 * 100 from flooring one
    short of the intended integer.
    """
    warn = math.floor(cfg.warning_frac * capacity + 1e-9)
    crit = math.floor(cfg.critical_frac * capacity + 1e-9)
    return warn, crit


def classify_status(count: int, capacity: int,
                    cfg: ThresholdConfig = ThresholdConfig()) -> Status:
    if count < 0:
        raise ValueError("count must be >= 0")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    warn, crit = threshold_counts(capacity, cfg)
    if count <= crit:
        return Status.CRITICAL
    if count <= warn:
        return Status.WARNING
    return Status.GOOD


@dataclass
class AlertEvent:
    alert_id: str
    station_id: str
    level: Status
    raised_at: float
    count_at_raise: int
    resolved_at: float | None = None
    response_s: float | None = None
    acked_at: float | None = None
    operator: str | None = None

    def snapshot(self) -> "AlertEvent":
        return replace(self)


@dataclass
class StationState:
    station_id: str
    capacity: int
    count: int
    status: Status
    last_update: float
    status_entered_at: float
    open_alerts: dict[Status, AlertEvent] = field(default_factory=dict)
    alert_seq: dict[Status, int] = field(default_factory=dict)

    @classmethod
    def fresh(cls, station_id: str, capacity: int, count: int, t: float = 0.0,
              cfg: ThresholdConfig = ThresholdConfig()) -> "StationState":
        return cls(
            station_id=station_id, capacity=capacity, count=count,
            status=classify_status(count, capacity, cfg),
            last_update=t, status_entered_at=t,
        )


@dataclass(frozen=True)
class Transition:
    kind: str  # "status_change" | "alert_raised" | "alert_resolved"
    station_id: str
    t: float
    status_from: Status | None = None
    status_to: Status | None = None
    alert: AlertEvent | None = None


def update_station(state: StationState, count: int, t: float,
                   cfg: ThresholdConfig = ThresholdConfig()
                   ) -> tuple[StationState, list[Transition]]:
    """Apply one observation; returns the state and what changed.

    The state object is updated in place and returned.  Observations must
    not move backwards in time; equal timestamps are accepted.
    """
    if t < state.last_update:
        raise ObservationOrderError(
            f"{state.station_id}: observation at {t} is older than {state.last_update}")

    old_status = state.status
    new_status = classify_status(count, state.capacity, cfg)
    state.count = count
    state.last_update = t

    transitions: list[Transition] = []
    if new_status == old_status:
        return state, transitions

    state.status = new_status
    state.status_entered_at = t
    transitions.append(Transition(
        kind="status_change", station_id=state.station_id, t=t,
        status_from=old_status, status_to=new_status,
    ))

    old_sev, new_sev = severity(old_status), severity(new_status)
    if new_sev > old_sev:
        for level in (Status.WARNING, Status.CRITICAL):
            if old_sev < severity(level) <= new_sev and level not in state.open_alerts:
                seq = state.alert_seq.get(level, 0) + 1
                state.alert_seq[level] = seq
                alert = AlertEvent(
                    alert_id=f"{state.station_id}-{level.value}-{seq:04d}",
                    station_id=state.station_id, level=level,
                    raised_at=t, count_at_raise=count,
                )
                state.open_alerts[level] = alert
                transitions.append(Transition(
                    kind="alert_raised", station_id=state.station_id, t=t,
                    alert=alert))
    else:
        for level in (Status.CRITICAL, Status.WARNING):
            if new_sev < severity(level) <= old_sev and level in state.open_alerts:
                alert = state.open_alerts.pop(level)
                alert.resolved_at = t
                alert.response_s = t - alert.raised_at
                transitions.append(Transition(
                    kind="alert_resolved", station_id=state.station_id, t=t,
                    alert=alert))
    return state, transitions


@dataclass(frozen=True)
class Notification:
    alert_id: str
    station_id: str
    level: Status
    count: int
    donors: tuple[str, ...]
    message: str


def build_notification(alert: AlertEvent, states: dict[str, StationState],
                       cfg: ThresholdConfig = ThresholdConfig()) -> Notification:
    """Crew-facing message naming where stock can be pulled from.

    Donor candidates are the stations currently Good, ranked by headroom
    (count minus their own warning threshold) descending; ties break on
    station id ascending.
    """
    candidates: list[tuple[int, str]] = []
    for sid, st in states.items():
        if sid == alert.station_id or st.status != Status.GOOD:
            continue
        warn, _ = threshold_counts(st.capacity, cfg)
        candidates.append((st.count - warn, sid))
    candidates.sort(key=lambda item: (-item[0], item[1]))
    donors = tuple(sid for _, sid in candidates)

    where = f"; nearest stock: {', '.join(donors[:3])}" if donors else ""
    message = (f"{alert.station_id} is {alert.level.value} with "
               f"{alert.count_at_raise} trolleys{where}")
    return Notification(
        alert_id=alert.alert_id, station_id=alert.station_id,
        level=alert.level, count=alert.count_at_raise,
        donors=donors, message=message,
    )
