"""Report building and emission.

A report is a flat row table — ``station_id, week_index, metric, value``
— which serializes naturally to CSV and mirrors one-to-one into JSON.
Summary metrics that are not tied to a station or week (response times,
detector quality, the analysis window itself) use station_id "*" and
week_index -1 so the schema never needs a second shape.

The same builder backs the HTTP analytics endpoint and the offline
``trolleywatch report`` command; both must produce identical content for
the same records, and the tests hold them to that.
"""

from __future__ import annotations

import csv
import io
import json

from ..monitor.station import Status
from .alerts import (WEEK_S, avg_response_time, cumulative_alert_time,
                     log_time_span, resolved_count, station_usage, week_index)
from .metrics import MetricsCounters, accuracy, false_alarm

SUMMARY_STATION = "*"
SUMMARY_WEEK = -1

CSV_HEADER = ("station_id", "week_index", "metric", "value")


def _num(value) -> float | None:
    return None if value is None else float(value)


def build_report(records, window: tuple[float, float] | None = None,
                 counters: MetricsCounters | None = None) -> dict:
    """Canonical analytics document: {"rows": [...]} sorted and stable."""
    if not records:
        return {"rows": []}
    if window is None:
        window = log_time_span(records)
    start, end = window
    if end < start:
        raise ValueError("window end before start")

    rows: list[dict] = []

    def add(station: str, week: int, metric: str, value) -> None:
        rows.append({
            "station_id": station, "week_index": week,
            "metric": metric, "value": _num(value),
        })

    add(SUMMARY_STATION, SUMMARY_WEEK, "window_start_s", start)
    add(SUMMARY_STATION, SUMMARY_WEEK, "window_end_s", end)

    for level in (Status.WARNING, Status.CRITICAL):
        add(SUMMARY_STATION, SUMMARY_WEEK, f"mean_response_{level.value}_s",
            avg_response_time(records, window, level))
        add(SUMMARY_STATION, SUMMARY_WEEK, f"resolved_{level.value}",
            resolved_count(records, window, level))

    add(SUMMARY_STATION, SUMMARY_WEEK, "detection_tfp",
        None if counters is None else counters.tfp)
    add(SUMMARY_STATION, SUMMARY_WEEK, "detection_tfn",
        None if counters is None else counters.tfn)
    add(SUMMARY_STATION, SUMMARY_WEEK, "detection_agt",
        None if counters is None else counters.agt)
    add(SUMMARY_STATION, SUMMARY_WEEK, "detection_accuracy",
        None if counters is None else accuracy(counters))
    add(SUMMARY_STATION, SUMMARY_WEEK, "detection_false_alarm",
        None if counters is None else false_alarm(counters))

    station_ids = sorted({rec.station for rec in records if rec.station is not None})
    first_week = week_index(start)
    last_week = week_index(end) if end > start else first_week
    for week in range(first_week, last_week + 1):
        bin_start = max(start, week * WEEK_S)
        bin_end = min(end, (week + 1) * WEEK_S)
        if bin_end <= bin_start and not (week == first_week and end == start):
            continue
        bin_window = (bin_start, bin_end)
        usage = station_usage(records, station_ids, bin_window)
        cum = {
            level: cumulative_alert_time(records, bin_window, level)
            for level in (Status.WARNING, Status.CRITICAL)
        }
        for sid in station_ids:
            add(sid, week, "alerts_critical", usage[sid]["alerts_critical"])
            add(sid, week, "alerts_warning", usage[sid]["alerts_warning"])
            add(sid, week, "cumulative_critical_s",
                cum[Status.CRITICAL].get(sid, 0.0))
            add(sid, week, "cumulative_warning_s",
                cum[Status.WARNING].get(sid, 0.0))
            add(sid, week, "mean_count", usage[sid]["mean_count"])
            add(sid, week, "takes_per_hour", usage[sid]["takes_per_hour"])

    rows.sort(key=lambda r: (r["station_id"], r["week_index"], r["metric"]))
    return {"rows": rows}


def emit_report(report: dict, fmt: str) -> str:
    """Serialize a report document as 'csv' or 'json'."""
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in report["rows"]:
            value = row["value"]
            writer.writerow([
                row["station_id"], row["week_index"], row["metric"],
                "" if value is None else repr(value),
            ])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str, fmt: str) -> dict:
    """Inverse of emit_report, used to verify the two formats agree."""
    if fmt == "json":
        return json.loads(text)
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = []
        for parts in reader:
            if not parts:
                continue
            station, week, metric, raw = parts
            rows.append({
                "station_id": station, "week_index": int(week),
                "metric": metric, "value": None if raw == "" else float(raw),
            })
        return {"rows": rows}
    raise ValueError(f"unknown report format {fmt!r}")
