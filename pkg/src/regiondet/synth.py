"""Synthetic spatio-temporal benchmark with planted anomalies.

Locations are scattered inside fixed region polygons; every region follows a
rectified-sine base curve plus base-level noise, shared external shifts hit
all regions simultaneously, and planted anomalies add or subtract an offset
on a connected group of locations over an interval.  Ground truth records
both the anomalies and the external shifts so detectors can be scored for
accuracy and for robustness against region-wide changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import Dataset, TimeSlice
from .triangulation import build_delaunay


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class RegionSpec:
    name: str
    polygon: tuple[tuple[float, float], ...]
    n_points: int
    amplitude: float  # scales the rectified sine
    bias: float       # additive floor of the base curve
    min_spacing: float


def _default_regions() -> tuple[RegionSpec, ...]:
    # Four regions of differing size and shape; R1 is the sparse one.  The
    # polygons sit far apart relative to their diameters so that the spatial
    # clustering has an unambiguous four-blob structure to recover.
    return (
        RegionSpec("R1", ((0.0, 0.0), (12.0, 0.0), (13.5, 6.5), (8.0, 12.0), (0.0, 10.0)),
                   40, 3.0, 1.0, 1.15),
        RegionSpec("R2", ((67.5, 0.0), (76.0, 0.0), (76.0, 7.5), (68.0, 6.5)),
                   65, 1.0, 0.5, 0.55),
        RegionSpec("R3", ((0.0, 51.0), (8.0, 50.0), (9.5, 57.0), (4.0, 60.0), (0.0, 58.0)),
                   58, 1.0, 0.5, 0.62),
        RegionSpec("R4", ((66.5, 51.5), (76.0, 51.0), (76.0, 59.5), (67.5, 60.0)),
                   60, 3.0, 1.0, 0.68),
    )


@dataclass(frozen=True)
class SynthConfig:
    regions: tuple[RegionSpec, ...] = field(default_factory=_default_regions)
    n_slots: int = 6402
    sample_step: float = 0.1
    noise_std: float = 0.5
    base_noise_std: float | None = None  # default: 0.2 * noise_std
    n_external: int = 82
    external_delta: tuple[float, float] = (0.5, 1.5)
    external_len: tuple[int, int] = (20, 100)
    n_anomalies: int = 200
    anomaly_nu: tuple[float, float] = (1.5, 2.0)
    anomaly_len: tuple[int, int] = (10, 50)
    anomaly_size: tuple[int, int] = (4, 12)
    seed: int = 0

    @property
    def effective_base_noise_std(self) -> float:
        if self.base_noise_std is not None:
            return self.base_noise_std
        return 0.2 * self.noise_std

    def validate(self) -> None:
        if not self.regions:
            raise ConfigInvalid("at least one region required")
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ConfigInvalid("region names must be unique")
        for r in self.regions:
            if len(r.polygon) < 3:
                raise ConfigInvalid(f"region {r.name}: polygon needs >= 3 vertices")
            if r.n_points < 1:
                raise ConfigInvalid(f"region {r.name}: n_points must be >= 1")
            if r.min_spacing <= 0:
                raise ConfigInvalid(f"region {r.name}: min_spacing must be positive")
        if self.n_slots < 1:
            raise ConfigInvalid("n_slots must be >= 1")
        if self.sample_step <= 0:
            raise ConfigInvalid("sample_step must be positive")
        if self.noise_std < 0 or self.effective_base_noise_std < 0:
            raise ConfigInvalid("noise levels must be non-negative")
        for lo, hi, label in (
            (*self.external_delta, "external_delta"),
            (*self.anomaly_nu, "anomaly_nu"),
        ):
            if not 0 <= lo <= hi:
                raise ConfigInvalid(f"{label} range must satisfy 0 <= lo <= hi")
        for lo, hi, label in (
            (*self.external_len, "external_len"),
            (*self.anomaly_len, "anomaly_len"),
            (*self.anomaly_size, "anomaly_size"),
        ):
            if not 1 <= lo <= hi:
                raise ConfigInvalid(f"{label} range must satisfy 1 <= lo <= hi")
        if self.n_external < 0 or self.n_anomalies < 0:
            raise ConfigInvalid("counts must be non-negative")
        if self.external_len[0] > self.n_slots or self.anomaly_len[0] > self.n_slots:
            raise ConfigInvalid("interval ranges exceed the number of slots")


@dataclass(frozen=True)
class TruthAnomaly:
    members: tuple[str, ...]
    t_start: int
    t_end: int
    nu: float
    sign: int


@dataclass(frozen=True)
class ExternalInfluence:
    regions: tuple[str, ...]
    t_start: int
    t_end: int
    delta: float


@dataclass(frozen=True)
class GroundTruth:
    anomalies: tuple[TruthAnomaly, ...]
    externals: tuple[ExternalInfluence, ...]
    region_members: dict[str, tuple[str, ...]]
    n_slots: int
    seed: int

    def to_json(self) -> str:
        doc = {
            "n_slots": self.n_slots,
            "seed": self.seed,
            "anomalies": [
                {"members": list(a.members), "t_start": a.t_start, "t_end": a.t_end,
                 "nu": a.nu, "sign": a.sign}
                for a in self.anomalies
            ],
            "externals": [
                {"regions": list(e.regions), "t_start": e.t_start, "t_end": e.t_end,
                 "delta": e.delta}
                for e in self.externals
            ],
            "region_members": {k: list(v) for k, v in self.region_members.items()},
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        doc = json.loads(text)
        anomalies = tuple(
            TruthAnomaly(tuple(a["members"]), int(a["t_start"]), int(a["t_end"]),
                         float(a["nu"]), int(a["sign"]))
            for a in doc["anomalies"]
        )
        externals = tuple(
            ExternalInfluence(tuple(e["regions"]), int(e["t_start"]), int(e["t_end"]),
                              float(e["delta"]))
            for e in doc["externals"]
        )
        members = {k: tuple(v) for k, v in doc.get("region_members", {}).items()}
        return cls(anomalies, externals, members, int(doc["n_slots"]), int(doc.get("seed", 0)))


def _point_in_polygon(x: float, y: float, polygon) -> bool:
    # Even-odd rule; boundary points count as outside, which is fine for sampling.
    inside = False
    n = len(polygon)
    for k in range(n):
        x1, y1 = polygon[k]
        x2, y2 = polygon[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def _scatter_region(spec: RegionSpec, rng: np.random.Generator,
                    taken: list[tuple[float, float]]) -> list[tuple[float, float]]:
    poly = np.asarray(spec.polygon, dtype=float)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    pts: list[tuple[float, float]] = []
    attempts = 0
    limit = 20000 * spec.n_points
    while len(pts) < spec.n_points:
        attempts += 1
        if attempts > limit:
            raise ConfigInvalid(
                f"region {spec.name}: cannot place {spec.n_points} points with "
                f"spacing {spec.min_spacing}; polygon too small"
            )
        x = float(rng.uniform(lo[0], hi[0]))
        y = float(rng.uniform(lo[1], hi[1]))
        if not _point_in_polygon(x, y, spec.polygon):
            continue
        ok = True
        for px, py in pts:
            if (px - x) ** 2 + (py - y) ** 2 < spec.min_spacing ** 2:
                ok = False
                break
        if ok:
            for px, py in taken:
                if (px - x) ** 2 + (py - y) ** 2 < spec.min_spacing ** 2:
                    ok = False
                    break
        if ok:
            pts.append((x, y))
    taken.extend(pts)
    return pts


def _connected_subset(adjacency: dict[str, list[str]], members: list[str], size: int,
                      rng: np.random.Generator) -> tuple[str, ...] | None:
    start = members[int(rng.integers(len(members)))]
    chosen = {start}
    frontier = [start]
    member_set = set(members)
    while frontier and len(chosen) < size:
        cur = frontier.pop(0)
        nbrs = [v for v in adjacency[cur] if v in member_set and v not in chosen]
        for v in rng.permutation(nbrs) if nbrs else []:
            if len(chosen) >= size:
                break
            chosen.add(str(v))
            frontier.append(str(v))
    if len(chosen) < size:
        return None
    return tuple(sorted(chosen))


def generate(config: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Build the benchmark dataset and its ground truth from one seed."""
    config.validate()
    seq = np.random.SeedSequence(config.seed)
    rng_coords, rng_base, rng_external, rng_noise, rng_anomaly = (
        np.random.default_rng(s) for s in seq.spawn(5)
    )

    taken: list[tuple[float, float]] = []
    ids: list[str] = []
    coords: list[tuple[float, float]] = []
    region_of: dict[str, str] = {}
    region_members: dict[str, tuple[str, ...]] = {}
    for spec in config.regions:
        pts = _scatter_region(spec, rng_coords, taken)
        names = tuple(f"{spec.name}-{k:03d}" for k in range(len(pts)))
        ids.extend(names)
        coords.extend(pts)
        region_members[spec.name] = names
        for nm in names:
            region_of[nm] = spec.name

    n_loc = len(ids)
    n_slots = config.n_slots
    x = np.arange(n_slots) * config.sample_step

    base = {}
    g_std = config.effective_base_noise_std
    for spec in config.regions:
        curve = spec.amplitude * np.abs(np.sin(x)) + spec.bias
        if g_std > 0:
            curve = curve + rng_base.normal(0.0, g_std, size=n_slots)
        base[spec.name] = curve

    externals = []
    region_names = tuple(spec.name for spec in config.regions)
    for _ in range(config.n_external):
        length = int(rng_external.integers(config.external_len[0], config.external_len[1] + 1))
        length = min(length, n_slots)
        t0 = int(rng_external.integers(0, n_slots - length + 1))
        magnitude = float(rng_external.uniform(*config.external_delta))
        sign = 1 if rng_external.random() < 0.5 else -1
        delta = sign * magnitude
        for name in region_names:
            base[name][t0:t0 + length] += delta
        externals.append(ExternalInfluence(region_names, t0, t0 + length - 1, delta))

    values = np.empty((n_loc, n_slots))
    for k, nm in enumerate(ids):
        values[k] = base[region_of[nm]]
    if config.noise_std > 0:
        values += rng_noise.normal(0.0, config.noise_std, size=values.shape)

    anomalies: list[TruthAnomaly] = []
    if config.n_anomalies > 0:
        graph = build_delaunay(list(zip(ids, (c[0] for c in coords), (c[1] for c in coords))))
        adjacency = {v: sorted(graph.neighbors(v)) for v in ids}
        row = {nm: k for k, nm in enumerate(ids)}
        occupied: dict[str, list[tuple[int, int]]] = {}
        guard = 1  # slack so separate anomalies cannot chain into one event
        attempts = 0
        limit = 400 * config.n_anomalies
        while len(anomalies) < config.n_anomalies:
            attempts += 1
            if attempts > limit:
                raise ConfigInvalid(
                    "cannot place the requested anomalies without overlap; "
                    "reduce n_anomalies or interval/size ranges"
                )
            spec = config.regions[int(rng_anomaly.integers(len(config.regions)))]
            size = int(rng_anomaly.integers(config.anomaly_size[0], config.anomaly_size[1] + 1))
            members = _connected_subset(adjacency, list(region_members[spec.name]),
                                        min(size, spec.n_points), rng_anomaly)
            if members is None:
                continue
            length = int(rng_anomaly.integers(config.anomaly_len[0], config.anomaly_len[1] + 1))
            length = min(length, n_slots)
            t0 = int(rng_anomaly.integers(0, n_slots - length + 1))
            t1 = t0 + length - 1
            clash = False
            for m in members:
                for (a, b) in occupied.get(m, ()):
                    if t0 - guard <= b and a <= t1 + guard:
                        clash = True
                        break
                if clash:
                    break
            if clash:
                continue
            nu = float(rng_anomaly.uniform(*config.anomaly_nu))
            sign = 1 if rng_anomaly.random() < 0.5 else -1
            rows = [row[m] for m in members]
            values[rows, t0:t1 + 1] += sign * nu
            for m in members:
                occupied.setdefault(m, []).append((t0, t1))
            anomalies.append(TruthAnomaly(members, t0, t1, nu, sign))

    id_tuple = tuple(ids)
    xy = np.asarray(coords, dtype=float)
    slices = tuple(
        TimeSlice(t, id_tuple, xy, values[:, t].copy()) for t in range(n_slots)
    )
    locations = {nm: (float(cx), float(cy)) for nm, (cx, cy) in zip(ids, coords)}
    dataset = Dataset(slices, locations)
    truth = GroundTruth(tuple(anomalies), tuple(externals), region_members, n_slots, config.seed)
    return dataset, truth


def config_from_json(text: str) -> SynthConfig:
    doc = json.loads(text)
    kwargs = {}
    if "regions" in doc:
        kwargs["regions"] = tuple(
            RegionSpec(
                str(r["name"]),
                tuple((float(px), float(py)) for px, py in r["polygon"]),
                int(r["n_points"]), float(r["amplitude"]), float(r["bias"]),
                float(r["min_spacing"]),
            )
            for r in doc["regions"]
        )
    for key in ("n_slots", "n_external", "n_anomalies", "seed"):
        if key in doc:
            kwargs[key] = int(doc[key])
    for key in ("sample_step", "noise_std", "base_noise_std"):
        if key in doc and doc[key] is not None:
            kwargs[key] = float(doc[key])
    for key in ("external_delta", "anomaly_nu"):
        if key in doc:
            kwargs[key] = (float(doc[key][0]), float(doc[key][1]))
    for key in ("external_len", "anomaly_len", "anomaly_size"):
        if key in doc:
            kwargs[key] = (int(doc[key][0]), int(doc[key][1]))
    unknown = set(doc) - {"regions", "n_slots", "sample_step", "noise_std", "base_noise_std",
                          "n_external", "external_delta", "external_len", "n_anomalies",
                          "anomaly_nu", "anomaly_len", "anomaly_size", "seed"}
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {', '.join(sorted(unknown))}")
    return SynthConfig(**kwargs)


def config_to_json(config: SynthConfig) -> str:
    doc = asdict(config)
    doc["regions"] = [
        {"name": r.name, "polygon": [list(p) for p in r.polygon], "n_points": r.n_points,
         "amplitude": r.amplitude, "bias": r.bias, "min_spacing": r.min_spacing}
        for r in config.regions
    ]
    return json.dumps(doc, indent=1)
