"""Command line interface: synth | detect | partition | eval.

Parameter precedence everywhere: explicit flags beat a --profile preset,
which beats the --config file, which beats built-in defaults.  Exit codes:
0 success, 1 pipeline or data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import data as data_mod
from . import synth as synth_mod
from .data import DataError, Dataset, load_csv
from .detection import (
    Anomaly,
    AnomalyReport,
    DetectionError,
    DetectorConfig,
    PipelineError,
    SlotFeatures,
    T2Fold,
    WavyFold,
    WeightedFold,
    _SlotCaches,
    iter_slot_features,
)
from .divergence import regional_divergence
from .evaluation import merge_detections, score
from .partition import PartitionError, cluster_locations, cluster_readings_cfdp, intersect
from .synth import ConfigInvalid, GroundTruth
from .triangulation import GeometryError, build_delaunay

PROFILES = {
    # Single-snapshot spatial detection: finer partition, no temporal state.
    "spatial-snapshot": {
        "location_clusters": 6,
        "reading_clusters": 3,
        "blend": 1.0,
        "window": 1,
        "decay": 0.0,
        "momentum": 0.0,
    },
}

_DETECTOR_KEYS = tuple(f.name for f in dataclasses.fields(DetectorConfig))


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--approach", choices=["weighted", "wavy", "baseline-t2"],
                   help="detector variant (default weighted)")
    p.add_argument("--location-clusters", type=int, metavar="C",
                   help="location clusters per slot (default 4)")
    p.add_argument("--reading-clusters", type=int, metavar="N",
                   help="reading-value clusters per slot (default 2)")
    p.add_argument("--dc", type=float, metavar="X",
                   help="kernel cutoff for reading clustering "
                        "(default: auto, 2nd percentile of pairwise distances)")
    p.add_argument("--blend", type=float, metavar="L",
                   help="mix of local vs global divergence in [0,1] (default 1.0)")
    p.add_argument("--window", type=int, metavar="T",
                   help="per-point divergence history window (default 10)")
    p.add_argument("--decay", type=float, metavar="D",
                   help="per-lag decay of the trend weights in [0,1] (default 1.0)")
    p.add_argument("--momentum", type=float, metavar="M",
                   help="threshold smoothing across slots in [0,1] (default 0.9; "
                        "1.0 freezes the threshold at its initial value)")
    p.add_argument("--bandwidth", dest="bandwidth_rule", choices=["scott"],
                   help="density bandwidth rule (default scott)")
    p.add_argument("--t2-window", type=int, metavar="W",
                   help="trailing window of the baseline detector (default 10)")
    p.add_argument("--t2-alpha", type=float, metavar="A",
                   help="significance level of the baseline detector (default 0.01)")
    p.add_argument("--jitter-duplicates", action="store_true", default=None,
                   help="perturb coincident points instead of rejecting them")


def _detector_config(args, parser: argparse.ArgumentParser) -> DetectorConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as exc:
            parser.exit(2, f"error: cannot read config file: {exc}\n")
        except json.JSONDecodeError as exc:
            parser.exit(2, f"error: config file is not valid JSON: {exc}\n")
        unknown = set(doc) - set(_DETECTOR_KEYS)
        if unknown:
            parser.exit(2, f"error: unknown config keys: {', '.join(sorted(unknown))}\n")
        merged.update(doc)
    profile = getattr(args, "profile", None)
    if profile:
        merged.update(PROFILES[profile])
    for key in _DETECTOR_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        config = DetectorConfig(**merged)
        config.validate()
    except (TypeError, DetectionError) as exc:
        parser.exit(2, f"error: {exc}\n")
    return config


def _load_dataset(args, parser) -> Dataset:
    dataset = load_csv(args.dataset)
    if getattr(args, "bin", None):
        dataset = data_mod.bin_slots(dataset, args.bin)
    return dataset


def _report_to_doc(report: AnomalyReport) -> dict:
    return {
        "t": report.t,
        "anomalies": [
            {"members": list(a.members), "score": a.score, "kind": a.kind}
            for a in report.anomalies
        ],
    }


def _reports_from_jsonl(path) -> list[AnomalyReport]:
    reports = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "summary" in doc:
                continue
            anomalies = tuple(
                Anomaly(tuple(a["members"]), float(a["score"]), str(a.get("kind", "region")))
                for a in doc["anomalies"]
            )
            reports.append(AnomalyReport(int(doc["t"]), anomalies))
    return reports


_PAR: dict = {}


def _par_chunk(bounds: tuple[int, int]) -> list[tuple]:
    lo, hi = bounds
    dataset: Dataset = _PAR["dataset"]
    config: DetectorConfig = _PAR["config"]
    sub = Dataset(dataset.slices[lo:hi], dataset.locations)
    out = []
    for feat in iter_slot_features(sub, config):
        out.append((feat.slice.t, feat.regions, feat.divergences, feat.alphas))
    return out


def _iter_features_parallel(dataset: Dataset, config: DetectorConfig, jobs: int):
    """Fan the stateless per-slot stage over processes, preserving slot order."""
    n = len(dataset.slices)
    chunk = max(1, (n + jobs * 4 - 1) // (jobs * 4))
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    _PAR["dataset"] = dataset
    _PAR["config"] = config
    caches = _SlotCaches(config)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
        for rows in ex.map(_par_chunk, bounds):
            for t, regions, divs, alphas in rows:
                sl = dataset.slice(t)
                yield SlotFeatures(sl, caches.graph(sl), regions, divs, alphas)
    _PAR.clear()


def cmd_synth(args, parser) -> int:
    if args.config:
        try:
            with open(args.config) as fh:
                config = synth_mod.config_from_json(fh.read())
        except OSError as exc:
            parser.exit(2, f"error: cannot read config file: {exc}\n")
        except (json.JSONDecodeError, ConfigInvalid, KeyError, TypeError, ValueError) as exc:
            parser.exit(2, f"error: bad synth config: {exc}\n")
    else:
        config = synth_mod.SynthConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    try:
        config.validate()
    except ConfigInvalid as exc:
        parser.exit(2, f"error: {exc}\n")

    dataset, truth = synth_mod.generate(config)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "dataset.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(dataset.to_csv())
    truth_path = os.path.join(args.out_dir, "truth.json")
    with open(truth_path, "w") as fh:
        fh.write(truth.to_json())
    written = [csv_path, truth_path]
    if args.figures:
        from . import report
        written += report.save_dataset_figures(dataset, truth, args.out_dir)
    for path in written:
        print(path)
    return 0


def cmd_detect(args, parser) -> int:
    config = _detector_config(args, parser)
    if args.jobs is not None and args.jobs < 1:
        parser.exit(2, "error: --jobs must be >= 1\n")
    dataset = _load_dataset(args, parser)

    reports: list[AnomalyReport] = []
    if config.approach == "baseline-t2":
        caches = _SlotCaches(config)
        fold = T2Fold(config)
        for sl in dataset.slices:
            reports.append(fold.step(sl, caches.graph(sl)))
    else:
        fold = WeightedFold(config) if config.approach == "weighted" else WavyFold(config)
        jobs = args.jobs or 1
        feats = (
            _iter_features_parallel(dataset, config, jobs)
            if jobs > 1
            else iter_slot_features(dataset, config)
        )
        for feat in feats:
            reports.append(fold.step(feat))

    total = sum(len(r.anomalies) for r in reports)
    lines = [json.dumps(_report_to_doc(r)) for r in reports]
    lines.append(json.dumps({"summary": {
        "slots": len(reports), "anomalies": total, "approach": config.approach,
    }}))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_partition(args, parser) -> int:
    config = _detector_config(args, parser)
    dataset = _load_dataset(args, parser)
    sl = dataset.slice(args.slot)
    graph = build_delaunay(sl.points(), jitter_duplicates=config.jitter_duplicates)
    loc = cluster_locations(graph, config.location_clusters)
    read = cluster_readings_cfdp(sl.readings(), config.reading_clusters, config.d_c)
    regions = intersect(loc, read, sl.t)
    doc = {
        "t": sl.t,
        "regions": [
            {
                "id": r.index,
                "loc_cluster": r.location_cluster,
                "read_cluster": r.reading_cluster,
                "members": list(r.members),
            }
            for r in regions.regions
        ],
    }
    if args.with_divergence:
        divs = regional_divergence(regions, config.blend, config.bandwidth_rule)
        for row, d in zip(doc["regions"], divs):
            row["divergence"] = {"local": d.local, "global": d.global_, "blended": d.blended}
    if args.dump_graph:
        with open(args.dump_graph, "w") as fh:
            fh.write(graph.to_json())
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args, parser) -> int:
    with open(args.truth) as fh:
        truth = GroundTruth.from_json(fh.read())
    reports = _reports_from_jsonl(args.detections)

    known = {m for members in truth.region_members.values() for m in members}
    for report in reports:
        if not 0 <= report.t < truth.n_slots:
            print(f"error: detections refer to slot {report.t} outside the truth range",
                  file=sys.stderr)
            return 1
        if known:
            for anomaly in report.anomalies:
                stray = [m for m in anomaly.members if m not in known]
                if stray:
                    print(f"error: detections refer to unknown locations: {stray[:3]}",
                          file=sys.stderr)
                    return 1

    metrics = score(reports, truth, args.iou_threshold, args.top_k)
    text = json.dumps(metrics, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    if args.figures:
        from . import report
        path = report.save_metrics_figure(metrics, args.figures)
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regiondet",
        description="Regional anomaly detection in spatio-temporal point data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset",
                       description="Write dataset.csv and truth.json into --out-dir.")
    p.add_argument("--config", metavar="FILE", help="synthesis config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", required=True, metavar="DIR")
    p.add_argument("--figures", action="store_true",
                   help="also render layout and example-series figures")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run a detector over a dataset CSV",
                       description="Write one JSON line per slot plus a summary line.")
    p.add_argument("--dataset", required=True, metavar="FILE")
    p.add_argument("--config", metavar="FILE", help="detector config JSON")
    p.add_argument("--profile", choices=sorted(PROFILES),
                   help="parameter preset; explicit flags still win")
    _add_detector_flags(p)
    p.add_argument("--bin", type=int, metavar="W",
                   help="floor-divide slot indices by W first (values averaged)")
    p.add_argument("--jobs", type=int, metavar="N",
                   help="parallel workers for the per-slot stage (default 1)")
    p.add_argument("--out", metavar="FILE", help="output path (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("partition", help="partition one slot into regions",
                       description="Write the region partition of one slot as JSON.")
    p.add_argument("--dataset", required=True, metavar="FILE")
    p.add_argument("--slot", required=True, type=int, metavar="T")
    p.add_argument("--config", metavar="FILE", help="detector config JSON")
    p.add_argument("--profile", choices=sorted(PROFILES),
                   help="parameter preset; explicit flags still win")
    _add_detector_flags(p)
    p.add_argument("--bin", type=int, metavar="W",
                   help="floor-divide slot indices by W first (values averaged)")
    p.add_argument("--with-divergence", action="store_true",
                   help="include local/global/blended divergence per region")
    p.add_argument("--dump-graph", metavar="FILE",
                   help="also write the slot triangulation as JSON")
    p.add_argument("--out", metavar="FILE", help="output path (default stdout)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("eval", help="score detections against ground truth",
                       description="Write precision/recall/F1 and external overlap as JSON.")
    p.add_argument("--detections", required=True, metavar="FILE",
                   help="JSON-lines output of the detect command")
    p.add_argument("--truth", required=True, metavar="FILE", help="truth.json from synth")
    p.add_argument("--iou-threshold", type=float, default=0.5, metavar="X",
                   help="cell IoU a match must exceed (default 0.5)")
    p.add_argument("--top-k", type=int, metavar="K",
                   help="keep only the K highest-scored events")
    p.add_argument("--out", metavar="FILE", help="output path (default stdout)")
    p.add_argument("--figures", metavar="DIR",
                   help="also render a metrics bar chart into DIR")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ConfigInvalid, DetectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, GeometryError, PartitionError, OSError,
            json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
