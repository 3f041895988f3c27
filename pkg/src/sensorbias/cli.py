"""Command-line interface.

Subcommands:
  audit         histograms, illumination table, coverage
  evaluate      audit plus per-bin mAP from a detection results file
  repeatability point-set precision/recall per scenario
  describe-bins print the fixed bin edges
  fetch         enrich metadata from a remote provider into a sidecar file
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .binning import describe_bins
from .evaluation import repeatability_pr, threshold_pr
from .exceptions import SensorBiasError
from .photometry import EvMode
from .remote import ProviderConfig, RemoteMetadataClient
from .report import AuditConfig, csv_bytes, run_audit, write_outputs


def _ev_mode(value: str) -> EvMode:
    return EvMode.PAPER_VERBATIM if value == "paper" else EvMode.PHOTOMETRIC


def _add_audit_flags(parser: argparse.ArgumentParser, require_detections: bool) -> None:
    parser.add_argument("--annotations", type=Path, required=True,
                        help="annotation document (images/annotations/categories)")
    parser.add_argument("--detections", type=Path, required=require_detections,
                        help="detection results document")
    parser.add_argument("--exif-sidecar", type=Path, action="append", default=[],
                        dest="sidecars", metavar="PATH",
                        help="sidecar metadata document; repeatable, ordered precedence")
    parser.add_argument("--images", type=Path, default=None, dest="images_dir",
                        help="directory holding the image files (embedded EXIF)")
    parser.add_argument("--ev-mode", choices=["photometric", "paper"],
                        default="photometric")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--format", choices=["structured", "csv", "svg", "all"],
                        default="all")
    parser.add_argument("--max-dets", type=int, default=100,
                        help="detections kept per image (default 100)")
    parser.add_argument("--iou", type=float, default=0.5,
                        help="IoU threshold for matching (default 0.5)")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel metadata parsing threads")


def _cmd_audit(args: argparse.Namespace) -> int:
    config = AuditConfig(
        annotations=args.annotations,
        detections=args.detections,
        sidecars=list(args.sidecars),
        images_dir=args.images_dir,
        ev_mode=_ev_mode(args.ev_mode),
        max_dets=args.max_dets,
        iou_threshold=args.iou,
        workers=args.workers,
    )
    report = run_audit(config)
    written = write_outputs(report, args.out, args.format)
    for path in written:
        print(path)
    return 0


def _cmd_repeatability(args: argparse.Namespace) -> int:
    document = json.loads(args.points.read_text(encoding="utf-8"))
    scenarios = document["scenarios"] if isinstance(document, dict) else document
    rows: list[list] = [["scenario", "precision", "recall", "matchable"]]
    results = []
    for scenario in scenarios:
        name = str(scenario.get("name", len(results)))
        target = [tuple(p) for p in scenario["target"]]
        test = [tuple(p) for p in scenario["test"]]
        point = repeatability_pr(target, test, args.tolerance_px)
        if args.floor is not None:
            point = threshold_pr(point, args.floor)
        results.append({"name": name,
                        "precision": point.precision,
                        "recall": point.recall})
        rows.append([
            name,
            "" if point.precision is None else point.precision,
            "" if point.recall is None else point.recall,
            len(target),
        ])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "repeatability.json").write_bytes(
        (json.dumps({"schema_version": 1, "tolerance_px": args.tolerance_px,
                     "floor": args.floor, "scenarios": results},
                    indent=2, sort_keys=True) + "\n").encode("utf-8")
    )
    (args.out / "repeatability.csv").write_bytes(csv_bytes(rows))
    print(args.out / "repeatability.json")
    print(args.out / "repeatability.csv")
    return 0


def _cmd_fetch(args: argparse.Namespace) -> int:
    keys: list[str] = []
    if args.keys is not None:
        keys = [line.strip() for line in args.keys.read_text().splitlines() if line.strip()]
    elif args.annotations is not None:
        from .ingest import load_annotations

        manifest, _, _ = load_annotations(args.annotations.read_text(encoding="utf-8"))
        keys = manifest.image_ids()
    if not keys:
        print("no image keys to fetch (use --keys or --annotations)", file=sys.stderr)
        return 2

    config = ProviderConfig(
        endpoint_template=args.endpoint,
        credential_env=args.credential_env,
        rate_limit_rps=args.rate,
    )
    client = RemoteMetadataClient(config, args.cache)
    from .exif import to_exif_record

    entries = []
    failures = 0
    for key in keys:
        try:
            tags = client.fetch(key)
        except SensorBiasError as exc:
            print(f"{key}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failures += 1
            continue
        record, _ = to_exif_record(tags, key)
        entry: dict = {"id": key}
        if record.exposure_time_s is not None:
            entry["ExposureTime"] = repr(record.exposure_time_s)
        if record.f_number is not None:
            entry["FNumber"] = repr(record.f_number)
        if record.iso is not None:
            entry["ISO"] = str(record.iso)
        entries.append(entry)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"fetched {len(entries)}/{len(keys)} keys "
          f"({client.request_count} requests, {failures} failures) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensorbias",
        description="Audit image datasets for sensor-setting bias and evaluate "
                    "detections per exposure/ISO bin.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="histograms + illumination table")
    _add_audit_flags(audit, require_detections=False)
    audit.set_defaults(func=_cmd_audit)

    evaluate = sub.add_parser("evaluate", help="audit + per-bin mAP")
    _add_audit_flags(evaluate, require_detections=True)
    evaluate.set_defaults(func=_cmd_audit)

    rep = sub.add_parser("repeatability", help="point-set precision/recall")
    rep.add_argument("--points", type=Path, required=True,
                     help="JSON file with per-scenario target/test point lists")
    rep.add_argument("--tolerance-px", type=float, default=5.0)
    rep.add_argument("--floor", type=float, default=None,
                     help="optional display floor applied to precision/recall")
    rep.add_argument("--out", type=Path, required=True)
    rep.set_defaults(func=_cmd_repeatability)

    bins = sub.add_parser("describe-bins", help="print the fixed bin edges")
    bins.set_defaults(func=lambda args: (print(describe_bins()), 0)[1])

    fetch = sub.add_parser("fetch", help="fetch remote metadata into a sidecar file")
    fetch.add_argument("--keys", type=Path, default=None,
                       help="file with one image key per line")
    fetch.add_argument("--annotations", type=Path, default=None,
                       help="take keys from an annotation document instead")
    fetch.add_argument("--endpoint", required=True,
                       help="URL template with a {key} placeholder")
    fetch.add_argument("--credential-env", default=None,
                       help="environment variable holding the provider credential")
    fetch.add_argument("--rate", type=float, default=1.0,
                       help="request ceiling in requests/second")
    fetch.add_argument("--cache", type=Path, required=True,
                       help="directory for verbatim response caching")
    fetch.add_argument("--out", type=Path, required=True,
                       help="sidecar file to write")
    fetch.set_defaults(func=_cmd_fetch)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SensorBiasError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
