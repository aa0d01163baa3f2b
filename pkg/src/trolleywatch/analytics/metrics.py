"""Detection-quality metrics.

The two headline ratios follow the project's established definitions:

    accuracy     A = TFP / AGT        (true finds over actual ground truth)
    false_alarm  F = TFP / (TFP + TFN)

Both are kept verbatim.  Note that F as defined is the precision of the
detector, not a false-positive rate; despite its name a HIGHER value
means fewer false alarms.  Downstream consumers treat it as opaque, so
renaming it would only create a second dialect.

Matching is greedy: detections in descending confidence order each claim
the unmatched truth box they overlap best, provided IoU reaches the
threshold.  Only trolley-class boxes participate on either side.
"""

from __future__ import annotations

from dataclasses import dataclass

Box = tuple[float, float, float, float]  # x, y, w, h


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix0 = max(ax0, bx0)
    iy0 = max(ay0, by0)
    ix1 = min(ax0 + aw, bx0 + bw)
    iy1 = min(ay0 + ah, by0 + bh)
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass
class MetricsCounters:
    tfp: int = 0  # true finds: detections matched to ground truth
    tfn: int = 0  # false finds: detections with no ground truth behind them
    agt: int = 0  # actual ground truth instances

    def add(self, other: "MetricsCounters") -> None:
        self.tfp += other.tfp
        self.tfn += other.tfn
        self.agt += other.agt


def accuracy(counters: MetricsCounters) -> float | None:
    """A = TFP / AGT; None when there is no ground truth to score against."""
    if counters.agt == 0:
        return None
    return counters.tfp / counters.agt


def false_alarm(counters: MetricsCounters) -> float | None:
    """F = TFP / (TFP + TFN); None when there were no detections at all."""
    denom = counters.tfp + counters.tfn
    if denom == 0:
        return None
    return counters.tfp / denom


def score_detections(detections, ground_truth, iou_threshold: float = 0.5
                     ) -> MetricsCounters:
    """Score one frame's detections against its ground truth boxes.

    ``detections`` need ``cls``, ``box`` and ``confidence`` attributes;
    ``ground_truth`` entries need ``cls`` and ``box``.  Non-trolley
    entries are ignored on both sides.
    """
    dets = [d for d in detections if d.cls == "trolley"]
    truths = [g.box for g in ground_truth if g.cls == "trolley"]

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    matched = [False] * len(truths)
    tfp = tfn = 0
    for i in order:
        best_j = -1
        best_iou = 0.0
        for j, tbox in enumerate(truths):
            if matched[j]:
                continue
            v = iou(dets[i].box, tbox)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= iou_threshold:
            matched[best_j] = True
            tfp += 1
        else:
            tfn += 1
    return MetricsCounters(tfp=tfp, tfn=tfn, agt=len(truths))
