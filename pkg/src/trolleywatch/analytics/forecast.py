"""Short-horizon trolley count forecasting.

A least-squares line through the recent (t, count) history, evaluated
horizon seconds past the last sample, clamped to the physical range and
rounded to a whole trolley.  Deliberately simple: the goal is "will this
station go critical soon", not a traffic model.
"""

from __future__ import annotations

import numpy as np


def forecast_count(history: list[tuple[float, int]], horizon_s: float,
                   capacity: int | None = None) -> int:
    """Predicted count horizon_s after the last observation in history."""
    if not history:
        raise ValueError("history must not be empty")
    if horizon_s < 0:
        raise ValueError("horizon must be >= 0")
    ts = np.asarray([t for t, _ in history], dtype=np.float64)
    counts = np.asarray([c for _, c in history], dtype=np.float64)
    if len(history) < 2 or np.ptp(ts) == 0.0:
        predicted = float(counts[-1])
    else:
        slope, intercept = np.polyfit(ts, counts, 1)
        predicted = float(slope * (ts[-1] + horizon_s) + intercept)
    predicted = max(0.0, predicted)
    if capacity is not None:
        predicted = min(float(capacity), predicted)
    return int(round(predicted))
