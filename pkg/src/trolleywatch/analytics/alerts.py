"""Alert and usage statistics computed from event log records.

Everything here is a pure function over a list of EventLogRecord, which
is exactly what makes live analytics and replayed analytics comparable:
the runtime passes its in-memory records, offline tooling passes the
parsed file, and the numbers must match.

Station status between observations is a step function: the status
carried by a record holds until the next status-bearing record for that
station, and the last known status extends to the window end (open
intervals are clipped there).
"""

from __future__ import annotations

from collections import defaultdict

from ..monitor.station import Status, severity

WEEK_S = 7 * 24 * 3600.0

Window = tuple[float, float]


def week_index(t: float) -> int:
    return int(t // WEEK_S)


def _status_points(records, station_id: str) -> list[tuple[float, Status]]:
    """(t, status) steps for one station, in log order."""
    points: list[tuple[float, Status]] = []
    for rec in records:
        if rec.station != station_id:
            continue
        if rec.kind == "observation":
            points.append((rec.t, Status(rec.data["status"])))
        elif rec.kind == "status_change":
            points.append((rec.t, Status(rec.data["to"])))
    return points


def _station_ids(records) -> list[str]:
    seen: dict[str, None] = {}
    for rec in records:
        if rec.station is not None:
            seen.setdefault(rec.station)
    return sorted(seen)


def cumulative_alert_time(records, window: Window, level: Status
                          ) -> dict[str, float]:
    """Seconds each station spent at severity >= level inside the window."""
    start, end = window
    if end < start:
        raise ValueError("window end before start")
    out: dict[str, float] = {}
    lvl = severity(level)
    for sid in _station_ids(records):
        points = _status_points(records, sid)
        total = 0.0
        for (t0, status), nxt in zip(points, points[1:] + [None]):
            t1 = end if nxt is None else nxt[0]
            if severity(status) >= lvl:
                a = max(t0, start)
                b = min(t1, end)
                if b > a:
                    total += b - a
        out[sid] = total
    return out


def avg_response_time(records, window: Window, level: Status) -> float | None:
    """Mean response time of alerts of this level resolved inside the window.

    Only resolved alerts participate; open alerts have no response time
    yet.  None when nothing resolved in the window.
    """
    start, end = window
    times = [
        float(rec.data["response_s"])
        for rec in records
        if rec.kind == "alert_resolved"
        and rec.data.get("level") == level.value
        and start <= rec.t <= end
    ]
    if not times:
        return None
    return sum(times) / len(times)


def resolved_count(records, window: Window, level: Status) -> int:
    start, end = window
    return sum(
        1 for rec in records
        if rec.kind == "alert_resolved"
        and rec.data.get("level") == level.value
        and start <= rec.t <= end
    )


def station_usage(records, station_ids, window: Window) -> dict[str, dict]:
    """Per-station aggregates over observation and alert records.

    takes_per_hour is estimated from downward steps between consecutive
    observations: deliveries masking a take in the same interval are
    invisible, which is fine for a usage indicator.
    """
    start, end = window
    hours = max(end - start, 0.0) / 3600.0
    per_station: dict[str, dict] = {}
    obs: dict[str, list[tuple[float, int]]] = defaultdict(list)
    alerts: dict[str, dict[str, int]] = defaultdict(lambda: {"warning": 0, "critical": 0})
    for rec in records:
        if rec.station is None:
            continue
        if rec.kind == "observation" and start <= rec.t <= end:
            obs[rec.station].append((rec.t, int(rec.data["count"])))
        elif rec.kind == "alert_raised" and start <= rec.t <= end:
            level = rec.data.get("level")
            if level in ("warning", "critical"):
                alerts[rec.station][level] += 1
    for sid in station_ids:
        counts = [c for _, c in obs.get(sid, [])]
        takes = 0
        for (_, prev), (_, cur) in zip(obs.get(sid, []), obs.get(sid, [])[1:]):
            if cur < prev:
                takes += prev - cur
        per_station[sid] = {
            "mean_count": (sum(counts) / len(counts)) if counts else None,
            "takes_per_hour": (takes / hours) if hours > 0 else 0.0,
            "alerts_warning": alerts[sid]["warning"],
            "alerts_critical": alerts[sid]["critical"],
        }
    return per_station


def log_time_span(records) -> Window:
    """(first, last) record time, or (0, 0) for an empty log."""
    if not records:
        return (0.0, 0.0)
    return (records[0].t, max(rec.t for rec in records))
