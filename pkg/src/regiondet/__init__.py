"""Regional anomaly detection in spatio-temporal point data.

The pipeline partitions each time slot into regions (a density-peak
clustering of locations over the Delaunay triangulation, intersected with a
density-peak clustering of reading values), scores every region's reading
distribution against its context, and flags anomalies either per region
(weighted approach) or per point with graph aggregation (wavy approach).
A Hotelling T-squared baseline, a synthetic benchmark generator and a
cell-IoU evaluator round out the toolkit.
"""

from .data import Dataset, Observation, TimeSlice, load_csv, parse_observations
from .detection import (
    Anomaly,
    AnomalyReport,
    DetectorConfig,
    MomentumState,
    PointDivergenceHistory,
    aggregate_points,
    assign_point_divergences,
    detect,
    hotelling_t2,
    point_weight,
    threshold_weighted,
    wavy_point_anomalies,
    weighted_region_divergence,
)
from .divergence import (
    DensityModel,
    RegionDivergence,
    fit_density,
    kde_eval,
    kl_divergence,
    regional_divergence,
    scott_bandwidth,
)
from .evaluation import external_overlap_ratio, iou, merge_detections, score
from .partition import (
    LocationClustering,
    ReadingClustering,
    Region,
    RegionSet,
    cluster_locations,
    cluster_readings_cfdp,
    compute_deltas,
    intersect,
    location_density,
)
from .synth import GroundTruth, RegionSpec, SynthConfig, generate
from .triangulation import TriangulationGraph, build_delaunay, components, neighbors
from .benchmark import BenchmarkResult, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "Anomaly",
    "AnomalyReport",
    "BenchmarkResult",
    "Dataset",
    "DensityModel",
    "DetectorConfig",
    "GroundTruth",
    "LocationClustering",
    "MomentumState",
    "Observation",
    "PointDivergenceHistory",
    "ReadingClustering",
    "Region",
    "RegionDivergence",
    "RegionSet",
    "RegionSpec",
    "SynthConfig",
    "TimeSlice",
    "TriangulationGraph",
    "aggregate_points",
    "assign_point_divergences",
    "build_delaunay",
    "cluster_locations",
    "cluster_readings_cfdp",
    "components",
    "compute_deltas",
    "detect",
    "external_overlap_ratio",
    "fit_density",
    "generate",
    "hotelling_t2",
    "intersect",
    "iou",
    "kde_eval",
    "kl_divergence",
    "load_csv",
    "location_density",
    "merge_detections",
    "neighbors",
    "parse_observations",
    "point_weight",
    "regional_divergence",
    "run_benchmark",
    "scott_bandwidth",
    "score",
    "threshold_weighted",
    "wavy_point_anomalies",
    "weighted_region_divergence",
]
