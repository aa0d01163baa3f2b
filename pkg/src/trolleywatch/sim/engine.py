"""Discrete-time simulation core: demand, deliveries, occlusions.

The engine is deliberately boring: plain dataclass state, an explicit
``random.Random`` whose state travels inside ``SimState``, and a single
conservation law that must hold after every operation:

    station counts + in transit + depot + with passengers == fleet_size

``step`` never mutates its input; it returns a fresh state plus the
time-ordered list of events that happened during the interval.  Two runs
with the same scenario and the same call sequence produce identical
states and identical event lists, byte for byte once serialized.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from ..errors import UnknownStationError
from .scenario import ScenarioConfig

# Event kinds emitted by the engine.
TAKE = "take"
UNMET = "unmet"
DELIVER = "deliver"
OVERFLOW = "overflow"
RETURN = "return"
DISPATCH = "dispatch"
DISPATCH_PARTIAL = "dispatch_partial"
DISPATCH_REJECTED = "dispatch_rejected"
OCCLUSION_START = "occlusion_start"
OCCLUSION_END = "occlusion_end"


@dataclass(frozen=True)
class SimulatedEvent:
    t: float
    kind: str
    station: str | None
    qty: int

    def to_doc(self) -> dict:
        return {"t": self.t, "kind": self.kind, "station": self.station, "qty": self.qty}


@dataclass(frozen=True)
class Delivery:
    arrival_s: float
    station_id: str
    qty: int


@dataclass(frozen=True)
class SimState:
    clock: float
    counts: dict[str, int]
    in_transit: tuple[Delivery, ...]
    depot: int
    taken: int                      # trolleys currently out with passengers
    total_taken: int                # cumulative take count, for reporting
    return_queue: tuple[tuple[float, int], ...]
    rng_state: tuple
    active_occluders: frozenset[int]  # indices into config.occluder_events

    def station_count(self, station_id: str) -> int:
        try:
            return self.counts[station_id]
        except KeyError:
            raise UnknownStationError(f"unknown station {station_id!r}")


def check_conservation(state: SimState, config: ScenarioConfig) -> None:
    """Raise if the fleet accounting identity is violated."""
    total = (sum(state.counts.values()) + sum(d.qty for d in state.in_transit)
             + state.depot + state.taken)
    if total != config.fleet_size:
        raise AssertionError(
            f"fleet conservation broken: {total} != {config.fleet_size}")


def _active_occluder_indices(config: ScenarioConfig, t: float) -> frozenset[int]:
    return frozenset(
        i for i, ev in enumerate(config.occluder_events)
        if ev.start_s <= t < ev.end_s
    )


def initial_state(config: ScenarioConfig) -> SimState:
    rng = random.Random(config.seed)
    counts = {s.station_id: s.initial_count for s in config.stations}
    depot = config.fleet_size - sum(counts.values())
    return SimState(
        clock=0.0,
        counts=counts,
        in_transit=(),
        depot=depot,
        taken=0,
        total_taken=0,
        return_queue=(),
        rng_state=rng.getstate(),
        active_occluders=_active_occluder_indices(config, 0.0),
    )


def _poisson(rng: random.Random, lam: float) -> int:
    """Poisson draw by CDF inversion; fine for the desk-scale rates used here."""
    if lam <= 0.0:
        return 0
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if k > 10_000:  # numerically unreachable at sane rates
            break
    return k


def _rate_segments(config: ScenarioConfig, t0: float, t1: float):
    """Yield (a, b, rate_per_min) pieces covering (t0, t1]."""
    schedule = config.demand_schedule
    if not schedule:
        return
    starts = [seg.start_s for seg in schedule]
    # Rate before the first segment is zero.
    bounds = starts + [math.inf]
    for i, seg in enumerate(schedule):
        a = max(t0, bounds[i])
        b = min(t1, bounds[i + 1])
        if b > a:
            yield a, b, seg.rate_per_min


def _draw_arrivals(rng: random.Random, config: ScenarioConfig,
                   t0: float, t1: float) -> list[float]:
    """Passenger arrival times in (t0, t1], sorted."""
    times: list[float] = []
    for a, b, rate in _rate_segments(config, t0, t1):
        lam = rate / 60.0 * (b - a)
        n = _poisson(rng, lam)
        times.extend(a + rng.random() * (b - a) for _ in range(n))
    times.sort()
    return times


def _pick_station(rng: random.Random, config: ScenarioConfig) -> str:
    weights = [s.demand_weight for s in config.stations]
    total = sum(weights)
    if total <= 0:
        # Degenerate but legal: all weights zero, pick uniformly.
        return config.stations[rng.randrange(len(config.stations))].station_id
    x = rng.random() * total
    acc = 0.0
    for st, w in zip(config.stations, weights):
        acc += w
        if x < acc:
            return st.station_id
    return config.stations[-1].station_id


def step(state: SimState, config: ScenarioConfig, dt: float) -> tuple[SimState, list[SimulatedEvent]]:
    """Advance the simulation by dt seconds.

    Everything that happens inside the interval is applied in time order:
    matured returns, arriving deliveries, passenger takes and occluder
    boundaries.  Ties are broken by a fixed kind priority so replays are
    exact.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t0 = state.clock
    t1 = t0 + dt

    rng = random.Random()
    rng.setstate(state.rng_state)

    counts = dict(state.counts)
    depot = state.depot
    taken = state.taken
    total_taken = state.total_taken
    capacities = {s.station_id: s.capacity for s in config.stations}

    # (t, priority, ordinal, action, payload); priority fixes same-time order.
    timeline: list[tuple[float, int, int, str, object]] = []
    ordinal = 0

    pending_returns = []
    for due, qty in state.return_queue:
        if due <= t1:
            timeline.append((due, 0, ordinal, RETURN, qty))
            ordinal += 1
        else:
            pending_returns.append((due, qty))

    remaining_transit = []
    for d in sorted(state.in_transit, key=lambda d: (d.arrival_s, d.station_id)):
        if d.arrival_s <= t1:
            timeline.append((d.arrival_s, 1, ordinal, DELIVER, d))
            ordinal += 1
        else:
            remaining_transit.append(d)

    for at in _draw_arrivals(rng, config, t0, t1):
        timeline.append((at, 2, ordinal, TAKE, None))
        ordinal += 1

    for i, ev in enumerate(config.occluder_events):
        if t0 < ev.start_s <= t1:
            timeline.append((ev.start_s, 3, ordinal, OCCLUSION_START, (i, ev)))
            ordinal += 1
        if t0 < ev.end_s <= t1:
            timeline.append((ev.end_s, 3, ordinal, OCCLUSION_END, (i, ev)))
            ordinal += 1

    timeline.sort(key=lambda item: (item[0], item[1], item[2]))

    events: list[SimulatedEvent] = []
    new_returns: list[tuple[float, int]] = []

    for t, _prio, _ord, action, payload in timeline:
        if action == RETURN:
            qty = payload
            depot += qty
            taken -= qty
            events.append(SimulatedEvent(t, RETURN, None, qty))
        elif action == DELIVER:
            d: Delivery = payload
            room = capacities[d.station_id] - counts[d.station_id]
            accepted = min(d.qty, room)
            counts[d.station_id] += accepted
            events.append(SimulatedEvent(t, DELIVER, d.station_id, accepted))
            if accepted < d.qty:
                # No room at the station; the crew hauls the rest back.
                overflow = d.qty - accepted
                depot += overflow
                events.append(SimulatedEvent(t, OVERFLOW, d.station_id, overflow))
        elif action == TAKE:
            sid = _pick_station(rng, config)
            if counts[sid] > 0:
                counts[sid] -= 1
                taken += 1
                total_taken += 1
                events.append(SimulatedEvent(t, TAKE, sid, 1))
                if config.return_delay_s > 0:
                    new_returns.append((t + config.return_delay_s, 1))
            else:
                events.append(SimulatedEvent(t, UNMET, sid, 1))
        else:  # occlusion boundary
            i, ev = payload
            kind = OCCLUSION_START if action == OCCLUSION_START else OCCLUSION_END
            events.append(SimulatedEvent(
                t, kind, config.camera_station(ev.camera_id).station_id, 0))

    if config.return_delay_s <= 0:
        # Takes never come back; drop any bookkeeping.
        new_returns = []

    return_queue = tuple(sorted(pending_returns + new_returns))

    new_state = SimState(
        clock=t1,
        counts=counts,
        in_transit=tuple(remaining_transit),
        depot=depot,
        taken=taken,
        total_taken=total_taken,
        return_queue=return_queue,
        rng_state=rng.getstate(),
        active_occluders=_active_occluder_indices(config, t1),
    )
    return new_state, events


def dispatch_replenishment(state: SimState, config: ScenarioConfig,
                           station_id: str, qty: int) -> tuple[SimState, list[SimulatedEvent]]:
    """Send qty trolleys from the depot toward a station.

    The fill is clamped to what the depot holds: a partial fill ships what
    is available, an empty depot rejects the dispatch outright.  Delivery
    lands crew_travel_time_s after the dispatch.
    """
    if station_id not in state.counts:
        raise UnknownStationError(f"unknown station {station_id!r}")
    if qty <= 0:
        raise ValueError("dispatch qty must be positive")

    t = state.clock
    granted = min(qty, state.depot)
    if granted == 0:
        return state, [SimulatedEvent(t, DISPATCH_REJECTED, station_id, 0)]

    delivery = Delivery(arrival_s=t + config.crew_travel_time_s,
                        station_id=station_id, qty=granted)
    new_state = replace(
        state,
        depot=state.depot - granted,
        in_transit=state.in_transit + (delivery,),
    )
    kind = DISPATCH if granted == qty else DISPATCH_PARTIAL
    return new_state, [SimulatedEvent(t, kind, station_id, granted)]
