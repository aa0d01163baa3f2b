"""Shared builders and stand-ins for the test suite."""

from __future__ import annotations

import numpy as np

from trolleywatch.sim.scenario import load_scenario

# Compact render geometry used by most scene tests: 12x8 trolleys keep
# patches around 100 px so region proposals stay honest but cheap.
SMALL_RENDER = {
    "frame_w": 160, "frame_h": 120,
    "trolley_w": 12, "trolley_h": 8,
    "gap_x": 3, "gap_y": 4,
    "margin_x": 6, "margin_y": 6,
    "walkway_h": 22,
    "people_max": 2,
    "person_w_min": 8, "person_w_max": 11,
    "person_h_min": 9, "person_h_max": 13,
}

SMALL_PIPELINE = {"a_min": 40}


def scenario_doc(**overrides) -> dict:
    """One-station baseline document; overrides replace whole top-level keys."""
    doc = {
        "seed": 1,
        "fleet_size": 40,
        "stations": [
            {"station_id": "A", "capacity": 12, "initial_count": 10,
             "camera_id": "cam-A"},
        ],
        "demand_schedule": [{"start_s": 0.0, "rate_per_min": 6.0}],
        "occluder_events": [],
        "crew_travel_time_s": 30.0,
        "frame_period_s": 2.0,
        "render": dict(SMALL_RENDER),
        "pipeline": dict(SMALL_PIPELINE),
    }
    doc.update(overrides)
    return doc


def make_scenario(**overrides):
    return load_scenario(scenario_doc(**overrides))


class VarianceClassifier:
    """Deterministic patch classifier with no trained weights.

    The rendered world is linearly separable on patch variance alone: the
    basket texture swings between 40 and 220 while people, floor and
    vehicles stay inside a narrow band.  Tests that exercise pipeline or
    runtime *plumbing* use this so they do not depend on training.
    """

    def __init__(self, threshold: float = 2000.0):
        self.threshold = threshold

    def predict_scores(self, patches: np.ndarray) -> np.ndarray:
        v = patches.reshape(patches.shape[0], -1).astype(np.float64).var(axis=1)
        margin = (v - self.threshold) / 100.0
        return np.stack([margin, -margin], axis=1)


def drain_stream(lines_iter) -> list[tuple[str | None, int | None, str]]:
    """Parse SSE text into (event, id, data) tuples, skipping comments."""
    events = []
    event = seq = data = None
    for raw_line in lines_iter:
        line = raw_line.rstrip("\n")
        if line.startswith(":"):
            continue
        if line == "":
            if data is not None:
                events.append((event, seq, data))
            event = seq = data = None
            continue
        if line.startswith("event: "):
            event = line[len("event: "):]
        elif line.startswith("id: "):
            seq = int(line[len("id: "):])
        elif line.startswith("data: "):
            data = line[len("data: "):]
    if data is not None:
        events.append((event, seq, data))
    return events
