"""Observation tables: CSV parsing, per-slot slicing, round-trip serialization.

The on-disk format is a plain CSV with the exact header
``location_id,lon,lat,t,value``.  Slot indices are pre-binned integers;
turning raw timestamps into slots is the caller's job (the CLI exposes a
``--bin`` option for that).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

HEADER = ("location_id", "lon", "lat", "t", "value")


class DataError(ValueError):
    """Base class for observation-table errors."""


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class EmptyDataset(DataError):
    pass


class DuplicateObservation(DataError):
    def __init__(self, location_id: str, t: int):
        self.location_id = location_id
        self.t = t
        super().__init__(f"duplicate observation for {location_id!r} at slot {t}")


class InconsistentCoordinates(DataError):
    def __init__(self, location_id: str):
        self.location_id = location_id
        super().__init__(f"location {location_id!r} appears with two different coordinates")


class MissingSlot(DataError):
    def __init__(self, t: int):
        self.t = t
        super().__init__(f"no observations at slot {t}")


@dataclass(frozen=True)
class Observation:
    location_id: str
    lon: float
    lat: float
    t: int
    value: float


class TimeSlice:
    """All observations sharing one time slot, kept in column arrays."""

    __slots__ = ("t", "ids", "xy", "values")

    def __init__(self, t: int, ids: tuple[str, ...], xy: np.ndarray, values: np.ndarray):
        self.t = t
        self.ids = ids
        self.xy = xy
        self.values = values

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def members(self) -> tuple[Observation, ...]:
        return tuple(
            Observation(i, float(x), float(y), self.t, float(v))
            for i, (x, y), v in zip(self.ids, self.xy, self.values)
        )

    def points(self) -> list[tuple[str, float, float]]:
        return [(i, float(x), float(y)) for i, (x, y) in zip(self.ids, self.xy)]

    def readings(self) -> list[tuple[str, float]]:
        return [(i, float(v)) for i, v in zip(self.ids, self.values)]


@dataclass
class Dataset:
    """Time-ordered slices plus the coordinate table behind them."""

    slices: tuple[TimeSlice, ...]
    locations: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self._by_t = {s.t: s for s in self.slices}

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(s.t for s in self.slices)

    def slice(self, t: int) -> TimeSlice:
        try:
            return self._by_t[t]
        except KeyError:
            raise MissingSlot(t) from None

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(HEADER) + "\n")
        for s in self.slices:
            t = s.t
            for i, (x, y), v in zip(s.ids, s.xy, s.values):
                out.write(f"{i},{float(x)!r},{float(y)!r},{t},{float(v)!r}\n")
        return out.getvalue()


def parse_observations(text: str) -> Dataset:
    """Parse CSV text into a Dataset, validating structure as we go.

    Raises MalformedRow (with a 1-based line number), DuplicateObservation,
    InconsistentCoordinates or EmptyDataset.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("no header row") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise MalformedRow(1, f"expected header {','.join(HEADER)!r}")

    coords: dict[str, tuple[float, float]] = {}
    by_slot: dict[int, list[tuple[str, float, float, float]]] = {}
    seen: set[tuple[str, int]] = set()
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise MalformedRow(line_no, f"expected 5 fields, got {len(row)}")
        loc = row[0]
        if not loc:
            raise MalformedRow(line_no, "empty location_id")
        try:
            lon, lat, value = float(row[1]), float(row[2]), float(row[4])
        except ValueError:
            raise MalformedRow(line_no, "non-numeric coordinate or value") from None
        try:
            t = int(row[3])
        except ValueError:
            raise MalformedRow(line_no, "non-integer slot index") from None
        if not (np.isfinite(lon) and np.isfinite(lat) and np.isfinite(value)):
            raise MalformedRow(line_no, "non-finite coordinate or value")
        key = (loc, t)
        if key in seen:
            raise DuplicateObservation(loc, t)
        seen.add(key)
        if loc in coords:
            if coords[loc] != (lon, lat):
                raise InconsistentCoordinates(loc)
        else:
            coords[loc] = (lon, lat)
        by_slot.setdefault(t, []).append((loc, lon, lat, value))

    if not by_slot:
        raise EmptyDataset("no observation rows")

    slices = []
    for t in sorted(by_slot):
        rows = by_slot[t]
        ids = tuple(r[0] for r in rows)
        xy = np.array([(r[1], r[2]) for r in rows], dtype=float)
        values = np.array([r[3] for r in rows], dtype=float)
        slices.append(TimeSlice(t, ids, xy, values))
    return Dataset(tuple(slices), coords)


def load_csv(path) -> Dataset:
    with open(path, "r", newline="") as fh:
        return parse_observations(fh.read())


def bin_slots(dataset: Dataset, width: int) -> Dataset:
    """Floor-divide slot indices by ``width``; colliding readings are averaged."""
    if width < 1:
        raise ValueError("bin width must be >= 1")
    acc: dict[int, dict[str, list[float]]] = {}
    for s in dataset.slices:
        t = s.t // width
        slot = acc.setdefault(t, {})
        for i, v in zip(s.ids, s.values):
            slot.setdefault(i, []).append(float(v))
    slices = []
    for t in sorted(acc):
        ids = tuple(sorted(acc[t]))
        xy = np.array([dataset.locations[i] for i in ids], dtype=float)
        values = np.array([float(np.mean(acc[t][i])) for i in ids])
        slices.append(TimeSlice(t, ids, xy, values))
    return Dataset(tuple(slices), dict(dataset.locations))
