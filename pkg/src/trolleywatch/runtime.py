"""Run composition: simulation clock, per-camera vision, monitor, fan-out.

``SimRuntime`` owns one scenario end to end.  Each tick advances the
simulation by one frame period, renders and processes every camera (or
reads true counts directly in truth mode), feeds observations to the
monitor, applies the configured replenishment policy and publishes
everything to the event broker.  Operator actions (dispatch, ack) enter
through the same lock as the tick, so the monitor only ever sees one
writer.

Observation modes:
  vision  render frames and observe what the detector counts
  truth   observe simulator counts directly (policy studies; no rendering)

Replenishment policies:
  none    dispatch only on operator request
  alert   top the station up the moment a critical alert is raised
  patrol  top every station up on a fixed patrol period
"""

from __future__ import annotations

import threading
import time
from typing import Callable

from .analytics.metrics import MetricsCounters, score_detections
from .analytics.report import build_report
from .api.events import EventBroker
from .monitor.eventlog import EventLog
from .monitor.service import MonitorService
from .monitor.station import Status, ThresholdConfig
from .sim import engine
from .sim.render import GroundTruth, Renderer
from .sim.scenario import ScenarioConfig
from .vision.pipeline import CameraPipeline, FrameResult, PipelineConfig

OBSERVE_MODES = ("vision", "truth")
POLICIES = ("none", "alert", "patrol")

# Simulator events worth pushing to stream subscribers (takes are too chatty).
_PUSHED_SIM_KINDS = {
    engine.DELIVER, engine.OVERFLOW, engine.DISPATCH, engine.DISPATCH_PARTIAL,
    engine.DISPATCH_REJECTED, engine.OCCLUSION_START, engine.OCCLUSION_END,
}

FrameHook = Callable[[str, float, "FrameResult | None", "GroundTruth | None", int], None]


class SimRuntime:
    def __init__(self, config: ScenarioConfig, *,
                 observe: str = "vision",
                 classifier=None,
                 policy: str = "none",
                 patrol_period_s: float = 1800.0,
                 log: EventLog | None = None,
                 obs_log_every: int = 1,
                 collect_detections: bool = False,
                 event_buffer: int = 4096,
                 sim_event_writer: Callable[[dict], None] | None = None):
        if observe not in OBSERVE_MODES:
            raise ValueError(f"observe must be one of {OBSERVE_MODES}")
        if policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if observe == "vision" and classifier is None:
            raise ValueError("vision mode needs a classifier")
        if obs_log_every < 1:
            raise ValueError("obs_log_every must be >= 1")

        self.config = config
        self.observe_mode = observe
        self.policy = policy
        self.patrol_period_s = patrol_period_s
        self.obs_log_every = obs_log_every
        self.sim_event_writer = sim_event_writer
        self.broker = EventBroker(capacity=event_buffer)
        self.frame_hooks: list[FrameHook] = []

        self.threshold_cfg = ThresholdConfig.from_dict(config.monitor)
        capacities = {s.station_id: s.capacity for s in config.stations}
        initials = {s.station_id: s.initial_count for s in config.stations}
        self.service = MonitorService(capacities, initials,
                                      cfg=self.threshold_cfg, log=log)
        self.service.add_sink(lambda kind, doc: self.broker.publish(doc))

        self.state = engine.initial_state(config)
        self.counters = MetricsCounters() if collect_detections else None

        self.renderer: Renderer | None = None
        self.pipelines: dict[str, CameraPipeline] = {}
        if observe == "vision":
            self.renderer = Renderer(config)
            pipe_cfg = PipelineConfig.from_dict(config.pipeline)
            for st in config.stations:
                self.pipelines[st.station_id] = CameraPipeline(
                    st.camera_id, classifier, pipe_cfg,
                    self.renderer.background_plate(st.camera_id),
                    initial_count=st.initial_count)

        self._displayed = dict(initials)
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._step_index = 0
        self._next_patrol = patrol_period_s

    # ---------- properties ----------

    @property
    def clock(self) -> float:
        return self.state.clock

    @property
    def depot(self) -> int:
        return self.state.depot

    # ---------- the tick ----------

    def step(self) -> list[engine.SimulatedEvent]:
        """Advance one frame period: simulate, observe, apply policy."""
        with self._lock:
            state, sim_events = engine.step(self.state, self.config,
                                            self.config.frame_period_s)
            self.state = state
            self._emit_sim_events(sim_events)

            t = state.clock
            self._step_index += 1
            log_obs = (self._step_index % self.obs_log_every) == 0

            critical_raised: list[str] = []
            for st in self.config.stations:
                sid = st.station_id
                true_count = state.counts[sid]
                result: FrameResult | None = None
                gt: GroundTruth | None = None
                transitions: list = []
                notifications: list = []

                if self.observe_mode == "truth":
                    self._displayed[sid] = true_count
                    transitions, notifications = self.service.observe(
                        sid, true_count, t, log_observation=log_obs)
                else:
                    frame, gt = self.renderer.render(state, st.camera_id)
                    result = self.pipelines[sid].process(frame.pixels, t)
                    self._displayed[sid] = result.reported_count
                    if self.counters is not None and gt.coverage == 0.0:
                        self.counters.add(
                            score_detections(result.detections, gt.boxes))
                    if result.emitted:
                        transitions, notifications = self.service.observe(
                            sid, result.raw_count, t, log_observation=log_obs)

                for note in notifications:
                    self.broker.publish({
                        "t": t, "kind": "notification", "station": sid,
                        "alert_id": note.alert_id, "level": note.level.value,
                        "count": note.count, "donors": list(note.donors),
                        "message": note.message,
                    })
                for tr in transitions:
                    if (tr.kind == "alert_raised"
                            and tr.alert.level is Status.CRITICAL):
                        critical_raised.append(sid)

                for hook in self.frame_hooks:
                    hook(sid, t, result, gt, true_count)

            self._apply_policy(t, critical_raised)
            return sim_events

    def _apply_policy(self, t: float, critical_raised: list[str]) -> None:
        capacities = {s.station_id: s.capacity for s in self.config.stations}
        if self.policy == "alert":
            for sid in critical_raised:
                need = capacities[sid] - self.state.counts[sid]
                if need > 0:
                    self._dispatch(sid, need, t)
        elif self.policy == "patrol":
            if t >= self._next_patrol:
                self._next_patrol += self.patrol_period_s
                for sid in sorted(capacities):
                    need = capacities[sid] - self.state.counts[sid]
                    if need > 0:
                        self._dispatch(sid, need, t)

    def _dispatch(self, station_id: str, qty: int, t: float) -> dict:
        state, events = engine.dispatch_replenishment(
            self.state, self.config, station_id, qty)
        self.state = state
        self._emit_sim_events(events)
        granted = sum(ev.qty for ev in events
                      if ev.kind in (engine.DISPATCH, engine.DISPATCH_PARTIAL))
        eta = t + self.config.crew_travel_time_s if granted > 0 else None
        return self.service.record_dispatch(t, station_id, qty, granted, eta)

    def _emit_sim_events(self, events: list[engine.SimulatedEvent]) -> None:
        for ev in events:
            doc = ev.to_doc()
            if self.sim_event_writer is not None:
                self.sim_event_writer(doc)
            if ev.kind in _PUSHED_SIM_KINDS:
                self.broker.publish(doc)

    # ---------- long-running drive ----------

    def run(self, duration_s: float, speed: float = 0.0) -> None:
        """Step until the sim clock reaches duration_s.

        speed > 0 paces the loop at that many simulated seconds per wall
        second; speed == 0 runs flat out.
        """
        period = self.config.frame_period_s
        started = time.monotonic()
        start_clock = self.state.clock
        while self.state.clock < duration_s and not self._stop.is_set():
            self.step()
            if speed > 0:
                ahead = (self.state.clock - start_clock) / speed \
                    - (time.monotonic() - started)
                if ahead > 0:
                    self._stop.wait(ahead)

    def stop(self) -> None:
        self._stop.set()

    # ---------- operator surface (API handlers call these) ----------

    def request_replenishment(self, station_id: str, qty: int) -> dict:
        with self._lock:
            return self._dispatch(station_id, qty, self.state.clock)

    def acknowledge(self, alert_id: str, operator: str) -> dict:
        with self._lock:
            return self.service.ack(alert_id, self.state.clock, operator)

    def list_stations(self) -> list[dict]:
        with self._lock:
            out = []
            for snap in self.service.snapshot_all():
                sid = snap["station_id"]
                snap["displayed_count"] = self._displayed.get(sid, snap["count"])
                if sid in self.pipelines:
                    snap["pipeline_mode"] = self.pipelines[sid].state.mode
                out.append(snap)
            return out

    def station_history(self, station_id: str,
                        window: tuple[float, float] | None = None,
                        limit: int | None = None) -> list[dict]:
        with self._lock:
            if station_id not in self.service.states:
                raise KeyError(station_id)
            records = [rec.to_doc() for rec in self.service.log.records
                       if rec.station == station_id]
        if window is not None:
            start, end = window
            records = [r for r in records if start <= r["t"] <= end]
        if limit is not None:
            records = records[-limit:]
        return records

    def analytics_document(self, window: tuple[float, float] | None = None) -> dict:
        with self._lock:
            records = list(self.service.log.records)
            counters = None if self.counters is None else MetricsCounters(
                self.counters.tfp, self.counters.tfn, self.counters.agt)
        return build_report(records, window=window, counters=counters)
