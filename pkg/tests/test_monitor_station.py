"""Station status classification, alert lifecycle, notifications."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trolleywatch.errors import ObservationOrderError
from trolleywatch.monitor.station import (
    StationState,
    Status,
    ThresholdConfig,
    build_notification,
    classify_status,
    severity,
    threshold_counts,
    update_station,
)

CFG = ThresholdConfig()


def test_threshold_counts_floor_with_epsilon():
    # capacity 24: warning at floor(12)=12, critical at floor(4.8)=4
    assert threshold_counts(24, CFG) == (12, 4)
    # capacity 10: 0.2 * 10 is exactly 2; the epsilon keeps float floor honest
    assert threshold_counts(10, CFG) == (5, 2)
    assert threshold_counts(7, CFG) == (3, 1)
    assert threshold_counts(1, CFG) == (0, 0)
    # 0.29 * 100 floats to 28.999...; epsilon rescues the intended 29
    assert threshold_counts(100, ThresholdConfig(0.29, 0.1)) == (29, 10)


def test_classify_status_boundaries_are_severe_inclusive():
    warn, crit = threshold_counts(20, CFG)  # 10, 4
    assert classify_status(crit, 20, CFG) is Status.CRITICAL
    assert classify_status(crit + 1, 20, CFG) is Status.WARNING
    assert classify_status(warn, 20, CFG) is Status.WARNING
    assert classify_status(warn + 1, 20, CFG) is Status.GOOD
    assert classify_status(0, 20, CFG) is Status.CRITICAL
    assert classify_status(20, 20, CFG) is Status.GOOD
    with pytest.raises(ValueError):
        classify_status(-1, 20, CFG)
    with pytest.raises(ValueError):
        classify_status(5, 0, CFG)


def test_severity_orders_statuses():
    assert severity(Status.GOOD) < severity(Status.WARNING) < severity(Status.CRITICAL)


def fresh(station_id="S1", capacity=20, count=20, t=0.0):
    return StationState.fresh(station_id, capacity, count, t, CFG)


def test_single_downward_crossing_raises_one_alert():
    state = fresh()
    state, transitions = update_station(state, 9, 10.0, CFG)
    assert [tr.kind for tr in transitions] == ["status_change", "alert_raised"]
    change = transitions[0]
    assert (change.status_from, change.status_to) == (Status.GOOD, Status.WARNING)
    alert = transitions[1].alert
    assert alert.level is Status.WARNING
    assert alert.raised_at == 10.0
    assert alert.count_at_raise == 9
    assert alert.resolved_at is None
    assert state.status is Status.WARNING
    assert state.open_alerts[Status.WARNING] is alert


def test_skipping_straight_to_critical_raises_both_levels():
    state = fresh()
    state, transitions = update_station(state, 2, 8.0, CFG)
    raised = [tr.alert for tr in transitions if tr.kind == "alert_raised"]
    assert [a.level for a in raised] == [Status.WARNING, Status.CRITICAL]
    assert all(a.raised_at == 8.0 for a in raised)
    assert state.status is Status.CRITICAL
    assert set(state.open_alerts) == {Status.WARNING, Status.CRITICAL}


def test_recovery_resolves_levels_climbed_past():
    state = fresh()
    update_station(state, 2, 8.0, CFG)
    state, transitions = update_station(state, 15, 20.0, CFG)
    resolved = [tr.alert for tr in transitions if tr.kind == "alert_resolved"]
    assert [a.level for a in resolved] == [Status.CRITICAL, Status.WARNING]
    for alert in resolved:
        assert alert.resolved_at == 20.0
        assert alert.response_s == pytest.approx(12.0)
    assert state.status is Status.GOOD
    assert state.open_alerts == {}


def test_partial_recovery_resolves_only_the_critical_alert():
    state = fresh()
    update_station(state, 2, 8.0, CFG)
    state, transitions = update_station(state, 9, 14.0, CFG)
    resolved = [tr.alert for tr in transitions if tr.kind == "alert_resolved"]
    assert [a.level for a in resolved] == [Status.CRITICAL]
    assert state.status is Status.WARNING
    assert set(state.open_alerts) == {Status.WARNING}


def test_no_transition_while_status_holds():
    state = fresh()
    update_station(state, 9, 10.0, CFG)
    state, transitions = update_station(state, 8, 12.0, CFG)
    assert transitions == []
    assert state.count == 8
    state, transitions = update_station(state, 3, 14.0, CFG)
    raised = [tr.alert.level for tr in transitions if tr.kind == "alert_raised"]
    assert raised == [Status.CRITICAL]
    # The earlier warning alert is still the open one, untouched.
    assert state.open_alerts[Status.WARNING].raised_at == 10.0


def test_alert_ids_sequence_per_station_and_level():
    state = fresh()
    update_station(state, 9, 1.0, CFG)
    update_station(state, 15, 2.0, CFG)
    update_station(state, 9, 3.0, CFG)
    second = state.open_alerts[Status.WARNING]
    assert second.alert_id == "S1-warning-0002"
    other = fresh(station_id="S2")
    update_station(other, 9, 1.0, CFG)
    assert other.open_alerts[Status.WARNING].alert_id == "S2-warning-0001"


def test_out_of_order_observation_is_rejected_equal_time_allowed():
    state = fresh()
    update_station(state, 18, 10.0, CFG)
    with pytest.raises(ObservationOrderError):
        update_station(state, 17, 9.0, CFG)
    # Same timestamp is fine (two updates can land on one tick).
    update_station(state, 17, 10.0, CFG)
    assert state.count == 17


def test_alert_snapshot_is_a_detached_copy():
    state = fresh()
    update_station(state, 2, 5.0, CFG)
    live = state.open_alerts[Status.CRITICAL]
    snap = live.snapshot()
    assert snap == live and snap is not live
    update_station(state, 18, 9.0, CFG)
    assert snap.resolved_at is None  # the copy did not follow the resolve
    assert live.resolved_at == 9.0
    assert live.response_s == pytest.approx(4.0)


def test_notification_ranks_donors_by_headroom():
    crit_state = fresh(station_id="S1", capacity=20)
    update_station(crit_state, 2, 5.0, CFG)
    alert = crit_state.open_alerts[Status.CRITICAL]
    states = {
        "S1": crit_state,
        "S2": fresh(station_id="S2", capacity=20, count=19),
        "S3": fresh(station_id="S3", capacity=40, count=39),
        "S4": fresh(station_id="S4", capacity=20, count=9),  # warning: no donor
        "S5": fresh(station_id="S5", capacity=20, count=19),
    }
    note = build_notification(alert, states, CFG)
    # S3 headroom 39-20=19 beats S2/S5 headroom 9; ties break on id.
    assert note.donors == ("S3", "S2", "S5")
    assert note.alert_id == alert.alert_id
    assert note.station_id == "S1"
    assert note.level is Status.CRITICAL
    assert note.count == 2
    assert note.message == "S1 is critical with 2 trolleys; nearest stock: S3, S2, S5"


def test_notification_with_no_good_peers():
    state = fresh(station_id="S1")
    update_station(state, 2, 5.0, CFG)
    alert = state.open_alerts[Status.CRITICAL]
    note = build_notification(alert, {"S1": state}, CFG)
    assert note.donors == ()
    assert note.message == "S1 is critical with 2 trolleys"


def test_message_names_at_most_three_donors():
    state = fresh(station_id="S1", capacity=20)
    update_station(state, 9, 1.0, CFG)
    alert = state.open_alerts[Status.WARNING]
    states = {"S1": state}
    for i in range(5):
        sid = f"D{i}"
        states[sid] = fresh(station_id=sid, capacity=20, count=20 - i)
    note = build_notification(alert, states, CFG)
    assert len(note.donors) == 5
    assert note.message.endswith("nearest stock: D0, D1, D2")


def test_threshold_config_validation():
    assert ThresholdConfig.from_dict({}) == ThresholdConfig()
    custom = ThresholdConfig.from_dict({"warning_frac": 0.6, "critical_frac": 0.1})
    assert custom.warning_frac == 0.6
    with pytest.raises(ValueError):
        ThresholdConfig(warning_frac=0.1, critical_frac=0.5)  # reversed
    with pytest.raises(ValueError):
        ThresholdConfig(warning_frac=1.5)
    with pytest.raises(ValueError):
        ThresholdConfig.from_dict({"unknown_knob": 1})


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(min_value=0, max_value=20), min_size=1,
                       max_size=40))
def test_alert_lifecycle_invariants(counts):
    state = fresh(capacity=20, count=20)
    resolved: list = []
    t = 0.0
    for count in counts:
        t += 1.0
        state, transitions = update_station(state, count, t, CFG)
        resolved.extend(tr.alert for tr in transitions
                        if tr.kind == "alert_resolved")
        # Open alerts are exactly the levels at or below current severity
        # (minus Good), and critical is open iff the status is critical.
        for level, alert in state.open_alerts.items():
            assert alert.resolved_at is None
            assert severity(level) <= severity(state.status)
        assert (Status.CRITICAL in state.open_alerts) == (
            state.status is Status.CRITICAL)
        if state.status is Status.GOOD:
            assert state.open_alerts == {}
        else:
            assert Status.WARNING in state.open_alerts
    for alert in resolved:
        assert alert.resolved_at is not None
        assert alert.resolved_at >= alert.raised_at
        assert alert.response_s == pytest.approx(
            alert.resolved_at - alert.raised_at)
