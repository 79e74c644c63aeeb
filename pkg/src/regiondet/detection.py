"""Anomaly detectors over per-slot region divergences.

Three approaches share the slot pipeline (triangulate, cluster locations,
cluster readings, intersect, score divergence):

* ``weighted``: per-point divergence trends reweight each region's score,
  then a momentum-smoothed mean/std threshold flags whole regions.
* ``wavy``: per-point divergence fluctuation against a momentum baseline
  flags individual points, which are aggregated into connected groups.
* ``baseline-t2``: a per-point Hotelling T-squared test on raw readings,
  aggregated the same way; no partition involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.stats import f as f_dist

from .data import Dataset, TimeSlice
from .divergence import RegionDivergence, regional_divergence
from .partition import LocationClustering, RegionSet, cluster_locations, cluster_readings_cfdp, intersect
from .triangulation import TriangulationGraph, build_delaunay, components

_EXP_CLIP = 700.0  # keeps the logistic strictly inside (0, 2)


class DetectionError(ValueError):
    pass


class InsufficientHistory(DetectionError):
    pass


class PipelineError(RuntimeError):
    """Module error re-raised with the slot that produced it."""

    def __init__(self, t: int, cause: Exception):
        self.t = t
        self.cause = cause
        super().__init__(f"slot {t}: {cause}")


@dataclass(frozen=True)
class DetectorConfig:
    approach: str = "weighted"
    location_clusters: int = 4
    reading_clusters: int = 2
    d_c: float | None = None
    blend: float = 1.0
    window: int = 10
    decay: float = 1.0
    momentum: float = 0.9
    bandwidth_rule: str = "scott"
    t2_window: int = 10
    t2_alpha: float = 0.01
    jitter_duplicates: bool = False

    def validate(self) -> None:
        if self.approach not in ("weighted", "wavy", "baseline-t2"):
            raise DetectionError(f"unknown approach {self.approach!r}")
        if self.location_clusters < 1:
            raise DetectionError("location_clusters must be >= 1")
        if self.reading_clusters < 1:
            raise DetectionError("reading_clusters must be >= 1")
        if self.d_c is not None and self.d_c <= 0:
            raise DetectionError("d_c must be positive")
        if not 0.0 <= self.blend <= 1.0:
            raise DetectionError("blend must lie in [0, 1]")
        if self.window < 1:
            raise DetectionError("window must be >= 1")
        if not 0.0 <= self.decay <= 1.0:
            raise DetectionError("decay must lie in [0, 1]")
        if not 0.0 <= self.momentum <= 1.0:
            raise DetectionError("momentum must lie in [0, 1]")
        if self.t2_window < 2:
            raise DetectionError("t2_window must be >= 2")
        if not 0.0 < self.t2_alpha < 1.0:
            raise DetectionError("t2_alpha must lie in (0, 1)")


@dataclass(frozen=True)
class Anomaly:
    members: tuple[str, ...]
    score: float
    kind: str


@dataclass(frozen=True)
class AnomalyReport:
    t: int
    anomalies: tuple[Anomaly, ...]


class PointDivergenceHistory:
    """Sliding per-point buffers of the last ``window`` divergence values.

    Slots where a point was absent stay NaN, so window statistics can skip
    them without remembering calendar gaps explicitly.
    """

    def __init__(self, window: int):
        if window < 1:
            raise InsufficientHistory("window must be >= 1")
        self.window = window
        self._row: dict[str, int] = {}
        self._buf = np.empty((0, window), dtype=float)

    def _ensure_rows(self, ids) -> None:
        missing = [i for i in ids if i not in self._row]
        if missing:
            extra = np.full((len(missing), self.window), np.nan)
            self._buf = np.vstack([self._buf, extra]) if self._buf.size else extra
            for k, i in enumerate(missing, start=len(self._row)):
                self._row[i] = k

    def push(self, alphas: Mapping[str, float]) -> None:
        """Advance one slot; points missing from ``alphas`` record a gap."""
        self._ensure_rows(alphas)
        if self._buf.size:
            self._buf[:, :-1] = self._buf[:, 1:]
            self._buf[:, -1] = np.nan
        for i, a in alphas.items():
            self._buf[self._row[i], -1] = float(a)

    @property
    def ids(self) -> list[str]:
        return list(self._row)

    def matrix(self) -> tuple[list[str], np.ndarray]:
        return list(self._row), self._buf.copy()

    def series(self, location_id: str) -> list[float | None]:
        row = self._buf[self._row[location_id]]
        return [None if np.isnan(x) else float(x) for x in row]


@dataclass(frozen=True)
class MomentumState:
    """Carry-over statistics for the threshold folds."""

    mean: float = 0.0
    std: float = 0.0
    point_mean: dict[str, float] = field(default_factory=dict)
    initialized: bool = False


def point_weight(history: Sequence[float | None], decay: float, window: int) -> float:
    """Logistic weight of a point's recent divergence trend.

    ``history`` is oldest-to-newest with the current value last; None marks a
    gap.  The trend is the decayed average of differences between the current
    value and each of the previous window - 1 entries, missing lags
    contributing nothing.
    """
    if window < 1:
        raise InsufficientHistory("window must be >= 1")
    if not history or history[-1] is None:
        raise InsufficientHistory("current divergence value required")
    current = float(history[-1])
    acc = 0.0
    for j in range(1, window):
        k = len(history) - 1 - j
        if k < 0:
            break
        lag = history[k]
        if lag is None:
            continue
        acc += decay ** j * (current - float(lag))
    trend = acc / window
    return float(2.0 / (1.0 + np.exp(-np.clip(trend, -_EXP_CLIP, _EXP_CLIP))))


def _weights_from_history(history: PointDivergenceHistory, decay: float) -> dict[str, float]:
    ids = history.ids
    buf = history._buf
    window = history.window
    current = buf[:, -1]
    if window > 1:
        # columns -2, -3, ... in lag order j = 1 .. window - 1
        lags = buf[:, -2::-1]
        diffs = current[:, None] - lags
        powers = decay ** np.arange(1, window)
        acc = np.nansum(diffs * powers[None, :], axis=1)
    else:
        acc = np.zeros(len(ids))
    trend = acc / window
    w = 2.0 / (1.0 + np.exp(-np.clip(trend, -_EXP_CLIP, _EXP_CLIP)))
    return {i: float(w[k]) for k, i in enumerate(ids) if not np.isnan(current[k])}


def assign_point_divergences(regions: RegionSet, divs: Sequence[RegionDivergence]) -> dict[str, float]:
    """Give every member its region's blended divergence."""
    by_index = {d.region_index: d.blended for d in divs}
    out: dict[str, float] = {}
    for region in regions.regions:
        a = by_index[region.index]
        for m in region.members:
            out[m] = a
    return out


def weighted_region_divergence(regions: RegionSet, alphas: Mapping[str, float],
                               weights: Mapping[str, float]) -> dict[int, float]:
    """Mean of weight * divergence over each region's members."""
    out = {}
    for region in regions.regions:
        total = sum(weights[m] * alphas[m] for m in region.members)
        out[region.index] = total / len(region.members)
    return out


def threshold_weighted(divs: Mapping[int, float], sizes: Mapping[int, int],
                       state: MomentumState, momentum: float) -> tuple[set[int], MomentumState]:
    """Flag regions whose updated divergence clears the momentum threshold.

    The threshold for a region of size m is mean + (mean / m) * std, where
    mean and std are momentum-smoothed over slots (population std within a
    slot).  The first slot seeds the state from its own statistics.
    """
    values = np.array([divs[k] for k in sorted(divs)], dtype=float)
    cur_mean = float(values.mean())
    cur_std = float(values.std())
    if state.initialized:
        mean = momentum * state.mean + (1.0 - momentum) * cur_mean
        std = momentum * state.std + (1.0 - momentum) * cur_std
    else:
        mean, std = cur_mean, cur_std
    flagged = {k for k, v in divs.items() if v >= mean + (mean / sizes[k]) * std}
    return flagged, replace(state, mean=mean, std=std, initialized=True)


def wavy_point_anomalies(history: PointDivergenceHistory, state: MomentumState,
                         momentum: float) -> tuple[dict[str, float], MomentumState]:
    """Flag points whose current divergence outruns their own baseline.

    Per point, the window mean feeds a momentum baseline; the momentum std is
    global, fed by the mean of per-point window stds.  A point with current
    value a flags when a > 0 and a >= mean_i + (mean_i / a) * std.  Points
    with fewer than two window entries are skipped; their first appearance
    just seeds the baseline.
    """
    ids, buf = history.matrix()
    if not ids:
        return {}, state
    current = buf[:, -1]
    counts = np.sum(~np.isnan(buf), axis=1)
    present = ~np.isnan(current)

    point_mean = dict(state.point_mean)
    eligible = present & (counts >= 2)
    flagged: dict[str, float] = {}

    if eligible.any():
        rows = np.flatnonzero(eligible)
        win = buf[rows]
        win_mean = np.nanmean(win, axis=1)
        win_std = np.nanstd(win, axis=1)
        std = momentum * state.std + (1.0 - momentum) * float(win_std.mean())
    else:
        rows = np.empty(0, dtype=int)
        win_mean = np.empty(0)
        std = state.std

    known = np.array([ids[r] in point_mean for r in rows], dtype=bool)
    for k, r in enumerate(rows):
        i = ids[r]
        wm = float(win_mean[k])
        if known[k]:
            base = momentum * point_mean[i] + (1.0 - momentum) * wm
            point_mean[i] = base
            a = float(current[r])
            if a > 0.0 and a >= base + (base / a) * std:
                flagged[i] = a
        else:
            point_mean[i] = wm

    # first sighting of a point seeds its baseline without flagging
    for r in np.flatnonzero(present & (counts < 2)):
        i = ids[r]
        if i not in point_mean:
            point_mean[i] = float(current[r])

    return flagged, replace(state, std=std, point_mean=point_mean, initialized=True)


def aggregate_points(graph: TriangulationGraph, point_scores: Mapping[str, float],
                     kind: str = "aggregated-points") -> list[Anomaly]:
    """Merge flagged points into connected groups scored by their mean."""
    if not point_scores:
        return []
    groups = components(graph, point_scores)
    out = []
    for comp in groups:
        members = tuple(sorted(comp))
        score = float(np.mean([point_scores[m] for m in members]))
        out.append(Anomaly(members, score, kind))
    return out


def t2_statistic(window: Sequence[float], value: float) -> float:
    """Univariate Hotelling statistic of ``value`` against a reference window."""
    w = np.asarray(list(window), dtype=float)
    if w.size < 2:
        raise InsufficientHistory("window length must be >= 2")
    mean = float(w.mean())
    var = float(w.var(ddof=1))
    diff = mean - float(value)
    if var == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return w.size * diff * diff / var


_F_CRIT_CACHE: dict[tuple[float, int], float] = {}


def _f_critical(alpha_level: float, n: int) -> float:
    crit = _F_CRIT_CACHE.get((alpha_level, n))
    if crit is None:
        crit = float(f_dist.ppf(1.0 - alpha_level, 1, n - 1))
        _F_CRIT_CACHE[(alpha_level, n)] = crit
    return crit


def hotelling_t2(windows: Mapping[str, tuple[Sequence[float], float]],
                 alpha_level: float) -> dict[str, float]:
    """Statistics of the points whose T-squared clears the F critical value."""
    if not 0.0 < alpha_level < 1.0:
        raise DetectionError("alpha_level must lie in (0, 1)")
    out = {}
    for i, (window, value) in windows.items():
        stat = t2_statistic(window, value)
        if stat > _f_critical(alpha_level, len(window)):
            out[i] = stat
    return out


class _SlotCaches:
    """Per-call caches keyed by the slot's id tuple.

    Valid because a dataset pins one coordinate pair per location id, so the
    same id set always triangulates identically within a run.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self._graphs: dict[tuple[str, ...], TriangulationGraph] = {}
        self._clusterings: dict[tuple[str, ...], LocationClustering] = {}

    def graph(self, sl: TimeSlice) -> TriangulationGraph:
        g = self._graphs.get(sl.ids)
        if g is None:
            g = build_delaunay(sl.points(), jitter_duplicates=self.config.jitter_duplicates)
            self._graphs[sl.ids] = g
        return g

    def location_clustering(self, sl: TimeSlice) -> LocationClustering:
        lc = self._clusterings.get(sl.ids)
        if lc is None:
            lc = cluster_locations(self.graph(sl), self.config.location_clusters)
            self._clusterings[sl.ids] = lc
        return lc


@dataclass
class SlotFeatures:
    slice: TimeSlice
    graph: TriangulationGraph
    regions: RegionSet
    divergences: list[RegionDivergence]
    alphas: dict[str, float]


def iter_slot_features(dataset: Dataset, config: DetectorConfig,
                       caches: _SlotCaches | None = None) -> Iterator[SlotFeatures]:
    """Run the stateless partition + divergence stage slot by slot."""
    caches = caches or _SlotCaches(config)
    for sl in dataset.slices:
        try:
            graph = caches.graph(sl)
            loc = caches.location_clustering(sl)
            read = cluster_readings_cfdp(sl.readings(), config.reading_clusters, config.d_c)
            regions = intersect(loc, read, sl.t)
            divs = regional_divergence(regions, config.blend, config.bandwidth_rule)
            alphas = assign_point_divergences(regions, divs)
        except Exception as exc:  # noqa: BLE001 - slot context matters more
            raise PipelineError(sl.t, exc) from exc
        yield SlotFeatures(sl, graph, regions, divs, alphas)


class WeightedFold:
    """Sequential state for the weighted approach."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.history = PointDivergenceHistory(config.window)
        self.state = MomentumState()

    def step(self, feat: SlotFeatures) -> AnomalyReport:
        self.history.push(feat.alphas)
        weights = _weights_from_history(self.history, self.config.decay)
        updated = weighted_region_divergence(feat.regions, feat.alphas, weights)
        sizes = {r.index: len(r.members) for r in feat.regions.regions}
        flagged, self.state = threshold_weighted(updated, sizes, self.state, self.config.momentum)
        anomalies = tuple(
            Anomaly(r.members, updated[r.index], "region")
            for r in feat.regions.regions
            if r.index in flagged
        )
        return AnomalyReport(feat.slice.t, anomalies)


class WavyFold:
    """Sequential state for the wavy approach."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.history = PointDivergenceHistory(config.window)
        self.state = MomentumState()

    def step(self, feat: SlotFeatures) -> AnomalyReport:
        self.history.push(feat.alphas)
        flagged, self.state = wavy_point_anomalies(self.history, self.state, self.config.momentum)
        anomalies = tuple(aggregate_points(feat.graph, flagged))
        return AnomalyReport(feat.slice.t, anomalies)


class T2Fold:
    """Sequential state for the baseline detector on raw readings."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.history = PointDivergenceHistory(config.t2_window)

    def step(self, sl: TimeSlice, graph: TriangulationGraph) -> AnomalyReport:
        # Vectorized equivalent of calling hotelling_t2 on each point's
        # non-NaN history window against its current reading.
        row_of = self.history._row
        buf = self.history._buf
        flagged: dict[str, float] = {}
        if buf.size:
            rows = np.array([row_of.get(i, -1) for i in sl.ids], dtype=int)
            have = np.flatnonzero(rows >= 0)
            if have.size:
                sub = buf[rows[have]]
                mask = ~np.isnan(sub)
                counts = mask.sum(axis=1)
                ok = np.flatnonzero(counts >= 2)
                if ok.size:
                    sub = sub[ok]
                    mask = mask[ok]
                    n = counts[ok].astype(float)
                    v = sl.values[have[ok]]
                    mean = np.where(mask, sub, 0.0).sum(axis=1) / n
                    centered = np.where(mask, sub - mean[:, None], 0.0)
                    var = (centered * centered).sum(axis=1) / (n - 1.0)
                    diff = mean - v
                    with np.errstate(divide="ignore", invalid="ignore"):
                        stat = np.where(
                            var > 0.0,
                            n * diff * diff / var,
                            np.where(diff == 0.0, 0.0, np.inf),
                        )
                    alpha = self.config.t2_alpha
                    for k, idx in enumerate(have[ok]):
                        if stat[k] > _f_critical(alpha, int(counts[ok[k]])):
                            flagged[sl.ids[idx]] = float(stat[k])
        self.history.push({i: float(v) for i, v in zip(sl.ids, sl.values)})
        anomalies = tuple(aggregate_points(graph, flagged))
        return AnomalyReport(sl.t, anomalies)


def detect(dataset: Dataset, config: DetectorConfig) -> list[AnomalyReport]:
    """Run one detector over every slot of the dataset, in slot order."""
    config.validate()
    reports: list[AnomalyReport] = []
    if config.approach == "baseline-t2":
        caches = _SlotCaches(config)
        fold = T2Fold(config)
        for sl in dataset.slices:
            try:
                graph = caches.graph(sl)
                reports.append(fold.step(sl, graph))
            except PipelineError:
                raise
            except Exception as exc:  # noqa: BLE001
                raise PipelineError(sl.t, exc) from exc
        return reports

    fold = WeightedFold(config) if config.approach == "weighted" else WavyFold(config)
    for feat in iter_slot_features(dataset, config):
        reports.append(fold.step(feat))
    return reports
