"""Monitor service: observations in, log records and notifications out.

One instance owns every station's state.  It is the single writer: the
runtime (or API layer) serializes calls into it, and read-side consumers
get snapshot copies, never live objects.  Every state change is recorded
in the event log first; the log alone is enough to rebuild final station
state (see ``replay``), which is what makes offline analytics trustworthy.
"""

from __future__ import annotations

import logging
from typing import Callable

from ..errors import ObservationOrderError
from .eventlog import EventLog, EventLogRecord
from .station import (AlertEvent, Notification, StationState, Status,
                      ThresholdConfig, build_notification, classify_status,
                      threshold_counts, update_station)

logger = logging.getLogger(__name__)

Sink = Callable[[str, dict], None]


def _alert_doc(alert: AlertEvent) -> dict:
    return {
        "alert_id": alert.alert_id,
        "station": alert.station_id,
        "level": alert.level.value,
        "raised_at": alert.raised_at,
        "count_at_raise": alert.count_at_raise,
        "resolved_at": alert.resolved_at,
        "response_s": alert.response_s,
        "acked_at": alert.acked_at,
        "operator": alert.operator,
    }


class MonitorService:
    def __init__(self, capacities: dict[str, int], initial_counts: dict[str, int],
                 cfg: ThresholdConfig = ThresholdConfig(),
                 log: EventLog | None = None):
        self.cfg = cfg
        self.log = log if log is not None else EventLog()
        self.states: dict[str, StationState] = {}
        self.alerts_by_id: dict[str, AlertEvent] = {}
        self._ack_docs: dict[str, dict] = {}
        self._sinks: list[Sink] = []
        self._dispatch_seq = 0
        for sid, cap in capacities.items():
            state = StationState.fresh(sid, cap, initial_counts.get(sid, cap),
                                       t=0.0, cfg=cfg)
            self.states[sid] = state
            # Anchor the log with the starting point of every station.
            self._record(0.0, "observation", sid,
                         {"count": state.count, "status": state.status.value})

    def add_sink(self, sink: Sink) -> None:
        self._sinks.append(sink)

    def _record(self, t: float, kind: str, station: str | None, data: dict) -> None:
        self.log.append(EventLogRecord(t=t, kind=kind, station=station, data=data))
        doc = {"t": t, "kind": kind, "station": station, **data}
        for sink in self._sinks:
            sink(kind, doc)

    # ---------- observations ----------

    def observe(self, station_id: str, count: int, t: float,
                log_observation: bool = True) -> tuple[list, list[Notification]]:
        """Apply one observation; returns (transitions, notifications).

        An observation older than the station's last update is rejected
        and logged; it never touches station state.  ``log_observation``
        lets long runs sample the per-frame observation records while
        still recording every status change and alert; note that replay
        from such a thinned log is likewise sampled.
        """
        state = self.states[station_id]
        try:
            state, transitions = update_station(state, count, t, self.cfg)
        except ObservationOrderError as exc:
            logger.warning("rejected observation: %s", exc)
            self._record(state.last_update, "rejection", station_id,
                         {"reason": "out_of_order", "observed_t": t, "count": count})
            return [], []

        if log_observation or transitions:
            self._record(t, "observation", station_id,
                         {"count": count, "status": state.status.value})
        notifications: list[Notification] = []
        for tr in transitions:
            if tr.kind == "status_change":
                self._record(t, "status_change", station_id,
                             {"from": tr.status_from.value, "to": tr.status_to.value})
            elif tr.kind == "alert_raised":
                alert = tr.alert
                self.alerts_by_id[alert.alert_id] = alert
                self._record(t, "alert_raised", station_id, {
                    "alert_id": alert.alert_id, "level": alert.level.value,
                    "count": alert.count_at_raise,
                })
                notifications.append(build_notification(alert, self.states, self.cfg))
            elif tr.kind == "alert_resolved":
                alert = tr.alert
                self._record(t, "alert_resolved", station_id, {
                    "alert_id": alert.alert_id, "level": alert.level.value,
                    "raised_at": alert.raised_at, "response_s": alert.response_s,
                })
        return transitions, notifications

    # ---------- operator actions ----------

    def ack(self, alert_id: str, t: float, operator: str) -> dict:
        """Acknowledge an alert; repeated acks return the original record."""
        if alert_id not in self.alerts_by_id:
            raise KeyError(f"unknown alert {alert_id!r}")
        if alert_id in self._ack_docs:
            return dict(self._ack_docs[alert_id])
        alert = self.alerts_by_id[alert_id]
        alert.acked_at = t
        alert.operator = operator
        doc = {"alert_id": alert_id, "acked_at": t, "operator": operator}
        self._ack_docs[alert_id] = doc
        self._record(t, "ack", alert.station_id,
                     {"alert_id": alert_id, "operator": operator})
        return dict(doc)

    def record_dispatch(self, t: float, station_id: str, requested: int,
                        accepted: int, eta_s: float | None) -> dict:
        """Log a replenishment dispatch (or its rejection) and receipt."""
        if accepted > 0:
            self._dispatch_seq += 1
            dispatch_id = f"dispatch-{self._dispatch_seq:05d}"
            receipt = {
                "dispatch_id": dispatch_id, "station": station_id,
                "requested": requested, "accepted": accepted, "eta_s": eta_s,
            }
            self._record(t, "dispatch", station_id, {
                "dispatch_id": dispatch_id, "requested": requested,
                "accepted": accepted, "eta_s": eta_s,
            })
        else:
            receipt = {
                "dispatch_id": None, "station": station_id,
                "requested": requested, "accepted": 0, "eta_s": None,
            }
            self._record(t, "rejection", station_id, {
                "reason": "depot_empty", "requested": requested,
            })
        return receipt

    # ---------- read side ----------

    def snapshot_station(self, station_id: str) -> dict:
        st = self.states[station_id]
        warn, crit = threshold_counts(st.capacity, self.cfg)
        return {
            "station_id": st.station_id,
            "capacity": st.capacity,
            "count": st.count,
            "status": st.status.value,
            "last_update": st.last_update,
            "status_entered_at": st.status_entered_at,
            "warning_at": warn,
            "critical_at": crit,
            "open_alerts": [_alert_doc(a) for _, a in
                            sorted(st.open_alerts.items(),
                                   key=lambda kv: kv[0].value)],
        }

    def snapshot_all(self) -> list[dict]:
        return [self.snapshot_station(sid) for sid in sorted(self.states)]

    def alert_doc(self, alert_id: str) -> dict:
        return _alert_doc(self.alerts_by_id[alert_id])


def replay(records, capacities: dict[str, int],
           cfg: ThresholdConfig = ThresholdConfig()) -> dict[str, StationState]:
    """Rebuild final station states from a log.

    Only observation and ack records drive state; everything else in the
    log is derived from these and is ignored here.  The result matches
    the live service's states field for field.
    """
    states: dict[str, StationState] = {}
    alerts: dict[str, AlertEvent] = {}
    for rec in records:
        if rec.kind == "observation":
            sid = rec.station
            count = int(rec.data["count"])
            if sid not in states:
                states[sid] = StationState.fresh(sid, capacities[sid], count,
                                                 t=rec.t, cfg=cfg)
                continue
            _, transitions = update_station(states[sid], count, rec.t, cfg)
            for tr in transitions:
                if tr.kind == "alert_raised":
                    alerts[tr.alert.alert_id] = tr.alert
        elif rec.kind == "ack":
            alert = alerts.get(rec.data["alert_id"])
            if alert is not None:
                alert.acked_at = rec.t
                alert.operator = rec.data.get("operator")
    return states
