"""Scoring detections against ground truth on spatio-temporal cells.

A cell is one (location_id, slot) pair.  Per-slot detections are first
merged into events (anomalies in consecutive slots sharing at least one
member), then events are matched one-to-one against truth anomalies by
descending cell IoU; a match counts when IoU exceeds the threshold strictly.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

from .detection import AnomalyReport
from .synth import GroundTruth, TruthAnomaly


def iou(a: Iterable, b: Iterable) -> float:
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union


@dataclass
class DetectionEvent:
    cells: frozenset
    t_start: int
    t_end: int
    score: float
    kind: str


def merge_detections(reports: Sequence[AnomalyReport]) -> list[DetectionEvent]:
    """Chain per-slot anomalies into events.

    An anomaly at slot t extends any open event that was fed at slot t - 1
    by an anomaly sharing a member; touching several merges them.  Events
    keep the max anomaly score seen.
    """
    open_events: list[dict] = []
    closed: list[dict] = []
    for report in sorted(reports, key=lambda r: r.t):
        t = report.t
        still = []
        for e in open_events:
            if e["t_last"] == t - 1:
                still.append(e)
            else:
                closed.append(e)
        open_events = still
        fed: list[dict] = []
        for anomaly in report.anomalies:
            mem = set(anomaly.members)
            cells = {(m, t) for m in anomaly.members}
            touching = [e for e in open_events if e["last_members"] & mem]
            if touching:
                target = touching[0]
                for other in touching[1:]:
                    target["cells"] |= other["cells"]
                    target["score"] = max(target["score"], other["score"])
                    target["t_start"] = min(target["t_start"], other["t_start"])
                    target["new_members"] |= other["new_members"]
                    open_events.remove(other)
                    if other in fed:
                        fed.remove(other)
            else:
                target = {"cells": set(), "t_start": t, "t_last": t - 1,
                          "last_members": set(), "new_members": set(),
                          "score": float("-inf"), "kind": anomaly.kind}
                open_events.append(target)
            target["cells"] |= cells
            target["new_members"] |= mem
            target["score"] = max(target["score"], anomaly.score)
            if target not in fed:
                fed.append(target)
        for e in fed:
            e["t_last"] = t
            e["last_members"] = e["new_members"]
            e["new_members"] = set()
    closed.extend(open_events)
    events = [
        DetectionEvent(frozenset(e["cells"]), e["t_start"], e["t_last"], e["score"], e["kind"])
        for e in closed
    ]
    events.sort(key=lambda e: (e.t_start, e.t_end, min(e.cells)))
    return events


def truth_cells(anomaly: TruthAnomaly) -> frozenset:
    return frozenset(
        (m, t) for m in anomaly.members for t in range(anomaly.t_start, anomaly.t_end + 1)
    )


def match_events(events: Sequence[DetectionEvent], truths: Sequence[TruthAnomaly],
                 threshold: float = 0.5) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by descending IoU, earlier start on ties."""
    t_cells = [truth_cells(a) for a in truths]
    pairs = []
    for ei, event in enumerate(events):
        for ti, cells in enumerate(t_cells):
            if truths[ti].t_start > event.t_end or truths[ti].t_end < event.t_start:
                continue
            v = iou(event.cells, cells)
            if v > threshold:
                pairs.append((v, ei, ti))
    pairs.sort(key=lambda p: (-p[0], truths[p[2]].t_start, events[p[1]].t_start, p[2], p[1]))
    used_e: set[int] = set()
    used_t: set[int] = set()
    matches = []
    for v, ei, ti in pairs:
        if ei in used_e or ti in used_t:
            continue
        used_e.add(ei)
        used_t.add(ti)
        matches.append((ei, ti, v))
    return matches


def score(reports: Sequence[AnomalyReport], truth: GroundTruth,
          iou_threshold: float = 0.5, top_k: int | None = None) -> dict:
    """Precision / recall / F1 of merged detection events against truth."""
    events = merge_detections(reports)
    if top_k is not None:
        ranked = sorted(events, key=lambda e: (-e.score, e.t_start, e.t_end, min(e.cells) if e.cells else ("", 0)))
        events = ranked[:top_k]
    matches = match_events(events, truth.anomalies, iou_threshold)
    hits = len(matches)
    n_events = len(events)
    n_truth = len(truth.anomalies)
    precision = hits / n_events if n_events else 0.0
    recall = hits / n_truth if n_truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "events": n_events,
        "truth_anomalies": n_truth,
        "hits": hits,
        "external_overlap_ratio": external_overlap_ratio_from_events(events, truth),
    }


class _IntervalIndex:
    """Per-location interval sets supporting O(log n) cell membership tests."""

    def __init__(self):
        self._raw: dict[str, list[tuple[int, int]]] = {}
        self._built: dict[str, tuple[list[int], list[int]]] = {}

    def add(self, location_id: str, t_start: int, t_end: int) -> None:
        self._raw.setdefault(location_id, []).append((t_start, t_end))
        self._built.pop(location_id, None)

    def _table(self, location_id: str) -> tuple[list[int], list[int]]:
        built = self._built.get(location_id)
        if built is None:
            intervals = sorted(self._raw[location_id])
            starts = [a for a, _ in intervals]
            max_end: list[int] = []
            running = -1
            for _, b in intervals:
                running = max(running, b)
                max_end.append(running)
            built = (starts, max_end)
            self._built[location_id] = built
        return built

    def covers(self, location_id: str, t: int) -> bool:
        if location_id not in self._raw:
            return False
        starts, max_end = self._table(location_id)
        k = bisect_right(starts, t)
        return k > 0 and max_end[k - 1] >= t


def _external_index(truth: GroundTruth) -> _IntervalIndex:
    index = _IntervalIndex()
    for ext in truth.externals:
        for region in ext.regions:
            for m in truth.region_members.get(region, ()):
                index.add(m, ext.t_start, ext.t_end)
    return index


def external_overlap_ratio_from_events(events: Sequence[DetectionEvent],
                                       truth: GroundTruth) -> float:
    """Fraction of events whose cells touch any external-influence cell."""
    if not events or not truth.externals:
        return 0.0
    index = _external_index(truth)
    overlapping = 0
    for event in events:
        if any(index.covers(m, t) for m, t in event.cells):
            overlapping += 1
    return overlapping / len(events)


def external_overlap_ratio(reports: Sequence[AnomalyReport], truth: GroundTruth) -> float:
    return external_overlap_ratio_from_events(merge_detections(reports), truth)
