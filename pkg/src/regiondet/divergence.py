"""Reading-distribution divergence between a region and its context.

Each region's readings become a Gaussian kernel density; divergence is a
Kullback-Leibler estimate taken over the region's own readings.  A region is
scored locally against its whole containing location cluster and globally
against everything else in the slot, blended by a single weight.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .partition import RegionSet

DENSITY_FLOOR = 1e-12


class SingletonSlotWarning(UserWarning):
    """Slot produced one region only, so its global term is pinned to 0."""


@dataclass(frozen=True)
class DensityModel:
    """Gaussian KDE over a 1-D support with a fixed bandwidth."""

    support: np.ndarray
    bandwidth: float

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x[:, None] - self.support[None, :]) / self.bandwidth
        dens = np.exp(-0.5 * z * z).sum(axis=1) / (
            self.support.size * self.bandwidth * np.sqrt(2.0 * np.pi)
        )
        return np.maximum(dens, DENSITY_FLOOR)


def scott_bandwidth(values) -> float:
    """s * n^(-1/5) with s the sample standard deviation.

    Degenerate supports (n = 1 or zero spread) fall back to a floor of
    1e-6 * (1 + |mean|) so downstream evaluation stays finite.
    """
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.size == 0:
        raise ValueError("empty support")
    floor = 1e-6 * (1.0 + abs(float(np.mean(v))))
    if v.size == 1:
        return floor
    s = float(np.std(v, ddof=1))
    bw = s * v.size ** (-0.2)
    return bw if bw > floor else floor


_BANDWIDTH_RULES = {"scott": scott_bandwidth}


def fit_density(values, bandwidth_rule: str = "scott") -> DensityModel:
    try:
        rule = _BANDWIDTH_RULES[bandwidth_rule]
    except KeyError:
        raise ValueError(f"unknown bandwidth rule {bandwidth_rule!r}") from None
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    return DensityModel(v, rule(v))


def kde_eval(model: DensityModel, x) -> float:
    return float(model.evaluate(x)[0])


def kl_divergence(p: DensityModel, q: DensityModel, p_samples) -> float:
    """Monte-Carlo KL estimate: mean of log p - log q over ``p_samples``.

    Both densities are floored at 1e-12 before the logs, which keeps the
    estimate finite for arbitrarily separated supports.
    """
    samples = np.asarray(list(p_samples) if not isinstance(p_samples, np.ndarray) else p_samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples")
    return float(np.mean(np.log(p.evaluate(samples)) - np.log(q.evaluate(samples))))


@dataclass(frozen=True)
class RegionDivergence:
    region_index: int
    local: float
    global_: float
    blended: float


def regional_divergence(regions: RegionSet, blend: float = 1.0,
                        bandwidth_rule: str = "scott") -> list[RegionDivergence]:
    """Local, global and blended divergence for every region of a slot.

    The local term compares a region against its whole containing location
    cluster; the global term against the union of all other regions.  The
    blended score is blend * local + (1 - blend) * global.  A slot with a
    single region has no outside readings: its global term is 0 and a
    SingletonSlotWarning is emitted when the blend actually uses it.
    """
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must lie in [0, 1]")
    out = []
    cluster_models: dict[int, DensityModel] = {}
    for region in regions.regions:
        p = fit_density(region.readings, bandwidth_rule)
        lc = region.location_cluster
        if lc not in cluster_models:
            cluster_models[lc] = fit_density(regions.location_cluster_readings(lc), bandwidth_rule)
        local = kl_divergence(p, cluster_models[lc], region.readings)
        if len(regions) == 1:
            if blend < 1.0:
                warnings.warn(
                    f"slot {regions.t}: single region, global divergence pinned to 0",
                    SingletonSlotWarning,
                    stacklevel=2,
                )
            global_ = 0.0
        else:
            outside = np.concatenate(
                [r.readings for r in regions.regions if r.index != region.index]
            )
            global_ = kl_divergence(p, fit_density(outside, bandwidth_rule), region.readings)
        blended = blend * local + (1.0 - blend) * global_
        out.append(RegionDivergence(region.index, local, global_, blended))
    return out
