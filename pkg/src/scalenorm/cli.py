"""Command-line surface wiring ingestion, analysis, fusion, evaluation,
range search, and the synthetic detector into file-based pipelines."""

from __future__ import annotations

import argparse
import sys

from . import dataio
from .config import AppConfig, apply_override, parse_factors, parse_range
from .evaluation import EvalResult, ap_by_scale_report, evaluate
from .geometry import ScaleRange
from .pyramid import stage_histogram
from .sampling import (
    DEFAULT_SNIP_TABLE,
    IsnPolicy,
    SnipPolicy,
    consistency_overlap,
    isn_partition,
    resized_scale_distributions,
    snip_partition,
)
from .search import ApOracle, greedy_range_search
from .simulate import generate_dataset, simulate_detections, strategy_detections


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.handler(args, cfg)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - single-line reporting contract
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalenorm",
        description=(
            "Scale-consistent sample selection, multi-resolution fusion, "
            "COCO-style evaluation, and scale-range search."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_help: str) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="PATH=VALUE",
            help="override any config field, e.g. --set soft_nms.sigma=0.7",
        )
        p.add_argument("--out", required=True, help=out_help)

    p = sub.add_parser("partition", help="split instances into valid/ignored per resolution")
    common(p, "output JSON path")
    p.add_argument("--annotations", required=True, help="COCO annotation JSON")
    p.add_argument("--policy", choices=("isn", "snip"), default="isn")
    p.add_argument("--snip-table", help="per-resolution range table JSON")
    p.add_argument("--factors", help="comma-separated pyramid factors")
    p.add_argument("--range", dest="scale_range", help="scale range 'lower,upper'")
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("analyze-snip", help="trained/ignored scale distributions and overlap")
    common(p, "output JSON path")
    p.add_argument("--annotations", required=True)
    p.add_argument("--snip-table", help="per-resolution range table JSON")
    p.add_argument("--factors", help="comma-separated pyramid factors")
    p.add_argument("--range", dest="scale_range", help="scale range 'lower,upper'")
    p.add_argument("--csv", help="also write histogram rows as CSV")
    p.set_defaults(handler=_cmd_analyze_snip)

    p = sub.add_parser("fuse", help="gate, project, and merge per-resolution detections")
    common(p, "output JSON path")
    p.add_argument("--dets", required=True, nargs="+", help="tagged detection dumps")
    p.add_argument("--range", dest="scale_range", help="scale range 'lower,upper'")
    p.add_argument("--naive", action="store_true", help="disable range gating")
    p.add_argument("--top-k", type=int, help="cap fused detections per image")
    p.set_defaults(handler=_cmd_fuse)

    p = sub.add_parser("eval", help="COCO-style metrics for detections vs annotations")
    common(p, "output JSON path")
    p.add_argument("--annotations", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--scale-range", help="also evaluate restricted to 'lower,upper'")
    p.add_argument("--csv", help="also write metrics as CSV")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("search", help="greedy coordinate descent over range candidates")
    common(p, "output JSON path")
    p.add_argument("--table", help="range -> metrics lookup JSON")
    p.add_argument("--simulate", action="store_true", help="evaluate ranges end-to-end")
    p.add_argument("--images", type=int, default=50, help="synthetic images for --simulate")
    p.set_defaults(handler=_cmd_search)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and detection dumps")
    common(p, "output annotations JSON path")
    p.add_argument("--out-dets", required=True, help="output tagged detections path")
    p.add_argument("--images", type=int, default=100)
    p.add_argument("--categories", type=int, default=3)
    p.add_argument("--crowd-fraction", type=float, default=0.0)
    p.add_argument("--factors", help="comma-separated pyramid factors")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("stage-hist", help="per-stage valid training-sample counts")
    common(p, "output CSV path")
    p.add_argument("--annotations", required=True)
    p.add_argument("--factors", help="comma-separated pyramid factors")
    p.add_argument("--range", dest="scale_range", help="scale range 'lower,upper'")
    p.add_argument("--json", dest="json_out", help="also write histogram as JSON")
    p.set_defaults(handler=_cmd_stage_hist)
    return parser


def _effective_config(args: argparse.Namespace) -> AppConfig:
    cfg = AppConfig()
    if getattr(args, "config", None):
        cfg = AppConfig.from_dict(dataio.load_json(args.config))
    if getattr(args, "overrides", None):
        data = cfg.to_dict()
        for assignment in args.overrides:
            apply_override(data, assignment)
        cfg = AppConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "factors", None):
        cfg = _replace(cfg, pyramid=parse_factors(args.factors))
    if getattr(args, "scale_range", None):
        cfg = _replace(cfg, scale_range=parse_range(args.scale_range))
    if getattr(args, "top_k", None) is not None:
        cfg = _replace(cfg, fusion_top_k=args.top_k)
    return cfg


def _replace(cfg: AppConfig, **kwargs) -> AppConfig:
    import dataclasses

    return dataclasses.replace(cfg, **kwargs)


def _snip_table(args: argparse.Namespace):
    if getattr(args, "snip_table", None):
        return dataio.load_snip_table(args.snip_table)
    return DEFAULT_SNIP_TABLE


def _cmd_partition(args: argparse.Namespace, cfg: AppConfig) -> int:
    dataset = dataio.load_annotations(args.annotations)
    partitions = []
    if args.policy == "isn":
        for index, factor in enumerate(cfg.pyramid):
            part = isn_partition(dataset.instances, factor, cfg.scale_range, index)
            partitions.append(
                {
                    "resolution_index": index,
                    "scale_factor": factor,
                    "valid_count": len(part.valid),
                    "ignored_count": len(part.ignored),
                    "valid_ids": sorted(i.id for i in part.valid),
                    "ignored_ids": sorted(i.id for i in part.ignored),
                }
            )
    else:
        table = _snip_table(args)
        for index, entry in enumerate(table.entries):
            part = snip_partition(dataset.instances, index, table)
            partitions.append(
                {
                    "resolution_index": index,
                    "resolution": [entry.height, entry.width],
                    "valid_count": len(part.valid),
                    "ignored_count": len(part.ignored),
                    "valid_ids": sorted(i.id for i in part.valid),
                    "ignored_ids": sorted(i.id for i in part.ignored),
                }
            )
    dataio.write_json(
        args.out,
        {"config": cfg.to_dict(), "policy": args.policy, "partitions": partitions},
    )
    return 0


def _histogram_payload(hist) -> dict:
    return {
        "bin_edges": [float(e) for e in hist.edges],
        "mass": [float(m) for m in hist.mass],
        "total_pairs": hist.total,
        "empty": hist.is_empty,
    }


def _cmd_analyze_snip(args: argparse.Namespace, cfg: AppConfig) -> int:
    dataset = dataio.load_annotations(args.annotations)
    sizes = dataset.image_sizes()
    report = {}
    rows = []
    policies = {
        "isn": IsnPolicy(cfg.pyramid, cfg.scale_range),
        "snip": SnipPolicy(_snip_table(args)),
    }
    for name, policy in policies.items():
        trained, ignored = resized_scale_distributions(
            dataset.instances, policy, sizes
        )
        report[name] = {
            "trained": _histogram_payload(trained),
            "ignored": _histogram_payload(ignored),
            "overlap": consistency_overlap(trained, ignored),
        }
        for b in range(len(trained.mass)):
            rows.append(
                (
                    name,
                    float(trained.edges[b]),
                    float(trained.edges[b + 1]),
                    float(trained.mass[b]),
                    float(ignored.mass[b]),
                )
            )
    dataio.write_json(args.out, {"config": cfg.to_dict(), "policies": report})
    if args.csv:
        dataio.write_csv(
            args.csv, ("policy", "bin_lower", "bin_upper", "trained", "ignored"), rows
        )
    return 0


def _cmd_fuse(args: argparse.Namespace, cfg: AppConfig) -> int:
    records = []
    for path in args.dets:
        records.extend(dataio.load_detection_records(path))
    per_resolution = dataio.tagged_detections_from_records(records)
    image_ids = sorted(
        {d.image_id for _, dets in per_resolution for d in dets}
    )
    fused = strategy_detections(
        per_resolution,
        image_ids,
        cfg.scale_range,
        "naive_ms" if args.naive else "isn",
        cfg.soft_nms,
        cfg.fusion_top_k,
    )
    dataio.write_json(
        args.out,
        {"config": cfg.to_dict(), "detections": dataio.detections_to_records(fused)},
    )
    return 0


def _metrics_payload(result: EvalResult) -> dict:
    return result.to_dict()


def _cmd_eval(args: argparse.Namespace, cfg: AppConfig) -> int:
    dataset = dataio.load_annotations(args.annotations)
    dets = dataio.load_detections(args.dets)
    known_images = {img.id for img in dataset.images}
    for det in dets:
        if det.image_id not in known_images:
            raise dataio.DataFormatError(
                f"detection references missing image {det.image_id}"
            )
    categories = dataset.category_ids()
    if args.scale_range:
        restriction = parse_range(args.scale_range)
        unrestricted, restricted = ap_by_scale_report(
            dataset.instances, dets, cfg.eval, restriction, categories
        )
        payload = {
            "config": cfg.to_dict(),
            "scale_range": restriction.to_pair(),
            "unrestricted": _metrics_payload(unrestricted),
            "restricted": _metrics_payload(restricted),
        }
        csv_rows = [
            ("unrestricted/" + c, m, v) for c, m, v in unrestricted.csv_rows()
        ] + [("restricted/" + c, m, v) for c, m, v in restricted.csv_rows()]
    else:
        result = evaluate(dataset.instances, dets, cfg.eval, categories)
        payload = {"config": cfg.to_dict(), "metrics": _metrics_payload(result)}
        csv_rows = result.csv_rows()
    dataio.write_json(args.out, payload)
    if args.csv:
        dataio.write_csv(args.csv, ("category", "metric", "value"), csv_rows)
    return 0


def _cmd_search(args: argparse.Namespace, cfg: AppConfig) -> int:
    if bool(args.table) == bool(args.simulate):
        raise ValueError("search needs exactly one of --table or --simulate")
    if args.table:
        table = {
            key: EvalResult.from_dict(metrics)
            for key, metrics in dataio.load_oracle_table(args.table).items()
        }
        oracle = ApOracle.from_table(table)
    else:
        dataset = generate_dataset(args.images, cfg.seed)
        per_resolution = simulate_detections(dataset, cfg.pyramid, cfg.detector)
        image_ids = sorted(img.id for img in dataset.images)

        def run(rng: ScaleRange) -> EvalResult:
            fused = strategy_detections(
                per_resolution,
                image_ids,
                rng,
                "isn",
                cfg.soft_nms,
                cfg.fusion_top_k,
            )
            return evaluate(dataset.instances, fused, cfg.eval, dataset.category_ids())

        oracle = ApOracle(run)
    best, trace = greedy_range_search(cfg.search, oracle)
    best_ap = next(ap for rng, ap in trace if (rng.lower, rng.upper) == (best.lower, best.upper))
    dataio.write_json(
        args.out,
        {
            "config": cfg.to_dict(),
            "best_range": best.to_pair(),
            "best_ap": best_ap,
            "trace": [{"range": rng.to_pair(), "ap": ap} for rng, ap in trace],
        },
    )
    print(f"best range [{best.lower:g}, {best.upper:g}] ap {best_ap:.6g}")
    return 0


def _cmd_simulate(args: argparse.Namespace, cfg: AppConfig) -> int:
    dataset = generate_dataset(
        args.images,
        cfg.seed,
        num_categories=args.categories,
        crowd_fraction=args.crowd_fraction,
    )
    per_resolution = simulate_detections(dataset, cfg.pyramid, cfg.detector)
    annotations = dataio.dataset_to_dict(dataset)
    annotations["config"] = cfg.to_dict()
    dataio.write_json(args.out, annotations)
    records = []
    for factor, dets in per_resolution:
        records.extend(dataio.detections_to_records(dets, factor))
    dataio.write_json(
        args.out_dets, {"config": cfg.to_dict(), "detections": records}
    )
    return 0


def _cmd_stage_hist(args: argparse.Namespace, cfg: AppConfig) -> int:
    dataset = dataio.load_annotations(args.annotations)
    counts = stage_histogram(dataset.instances, cfg.pyramid, cfg.scale_range, cfg.fpn)
    rows = [(level, counts[level]) for level in sorted(counts)]
    dataio.write_csv(args.out, ("level", "count"), rows)
    if args.json_out:
        dataio.write_json(
            args.json_out,
            {
                "config": cfg.to_dict(),
                "histogram": {str(level): counts[level] for level in sorted(counts)},
            },
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
