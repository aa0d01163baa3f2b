"""TrolleyWatch: camera-based monitoring of luggage trolley stations.

Subpackages:
    sim       deterministic scene and demand simulator
    vision    from-scratch detection pipeline (conv net, HOG, background model)
    monitor   threshold alerting and the append-only event log
    analytics metrics, alert statistics and report emission
    api       HTTP + SSE service surface
"""

__version__ = "0.1.0"
