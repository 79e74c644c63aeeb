"""Multi-seed benchmark harness comparing the three detectors.

The weighted and wavy detectors share the partition + divergence stage, so
each seed runs that stage once and feeds all folds in the same sweep.  The
baseline rides along on the cached triangulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .detection import (
    DetectorConfig,
    T2Fold,
    WavyFold,
    WeightedFold,
    _SlotCaches,
    iter_slot_features,
)
from .evaluation import score
from .synth import SynthConfig, generate
from .triangulation import components

METHODS = ("weighted", "wavy", "baseline-t2")


@dataclass
class BenchmarkResult:
    per_seed: dict[str, list[dict]] = field(default_factory=lambda: {m: [] for m in METHODS})
    connectivity_violations: int = 0
    seeds: tuple[int, ...] = ()

    def mean(self, method: str, key: str) -> float:
        rows = self.per_seed[method]
        return float(np.mean([r[key] for r in rows])) if rows else float("nan")

    def summary(self) -> dict:
        out = {}
        for m in METHODS:
            out[m] = {
                k: self.mean(m, k)
                for k in ("precision", "recall", "f1", "external_overlap_ratio")
            }
        return out


def _connected(graph, members) -> bool:
    return len(components(graph, members)) == 1


def run_benchmark(seeds: Sequence[int], synth_config: SynthConfig | None = None,
                  detector_config: DetectorConfig | None = None,
                  iou_threshold: float = 0.5,
                  check_connectivity: bool = False) -> BenchmarkResult:
    base_synth = synth_config or SynthConfig()
    det = detector_config or DetectorConfig()
    det.validate()
    result = BenchmarkResult(seeds=tuple(int(s) for s in seeds))
    for seed in seeds:
        dataset, truth = generate(replace(base_synth, seed=int(seed)))
        weighted = WeightedFold(det)
        wavy = WavyFold(det)
        t2 = T2Fold(det)
        reports = {m: [] for m in METHODS}
        caches = _SlotCaches(det)
        for feat in iter_slot_features(dataset, det, caches):
            reports["weighted"].append(weighted.step(feat))
            wr = wavy.step(feat)
            reports["wavy"].append(wr)
            tr = t2.step(feat.slice, feat.graph)
            reports["baseline-t2"].append(tr)
            if check_connectivity:
                for rep in (wr, tr):
                    for anomaly in rep.anomalies:
                        if not _connected(feat.graph, anomaly.members):
                            result.connectivity_violations += 1
        for m in METHODS:
            result.per_seed[m].append(score(reports[m], truth, iou_threshold))
    return result
