"""Command-line surface: dataset tooling, reporting, and the service.

Exit codes: 0 success, 1 validation failure (bad input data), 2 runtime
error. Every run prints its effective configuration, seed included, to
stderr so results are reproducible from the log alone.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from surgscan import __version__
from surgscan.core import SurgScanError
from surgscan.dataset import (
    DatasetManifest,
    IoFailure,
    SplitConfig,
    augment_dataset,
    convert_annotations,
    emit_dataset_config,
    stratified_split,
    validate_layout,
)
from surgscan.imaging import AugmentParams
from surgscan.metrics import export_csv, parse_rows_csv, render_comparison


def _log_config(command: str, values: dict) -> None:
    print(f"{command} config: {json.dumps(values, sort_keys=True, default=str)}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_convert(args: argparse.Namespace) -> int:
    annotations = Path(args.in_dir)
    images = Path(args.images)
    labels = Path(args.out)
    _log_config(
        "convert",
        {"in": annotations, "images": images, "out": labels, "manifest_out": args.manifest_out},
    )
    for name, path in (("--in", annotations), ("--images", images)):
        if not path.is_dir():
            print(f"error: {name} directory {path} does not exist", file=sys.stderr)
            return 1
    result = convert_annotations(annotations, images, labels)
    if args.manifest_out and result.entries:
        manifest = DatasetManifest(entries=result.entries)
        manifest.validate()
        manifest.save(args.manifest_out)
    print(f"converted {len(result.entries)} images, {result.boxes_written} boxes")
    if result.problems:
        for problem in result.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    return 0


def _parse_rotations(raw: str) -> tuple[int, ...]:
    if raw.strip().lower() in ("none", ""):
        return ()
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise SurgScanError(f"--rotations must be comma-separated integers, got {raw!r}") from None


def cmd_augment(args: argparse.Namespace) -> int:
    params = AugmentParams(
        fixed_rotations=_parse_rotations(args.rotations),
        random_rotation_range=args.random_rotation,
        brightness_delta=args.brightness,
        contrast_delta=args.contrast,
        noise_sigma=args.noise_sigma,
        unsharp_radius=args.unsharp_radius,
        unsharp_amount=args.unsharp_amount,
        seed=args.seed,
    )
    _log_config(
        "augment",
        {
            "manifest": args.manifest,
            "out": args.out,
            "out_dir": args.out_dir,
            "workers": args.workers,
            "seed": params.seed,
            "rotations": list(params.fixed_rotations),
            "random_rotation": params.random_rotation_range,
            "brightness": params.brightness_delta,
            "contrast": params.contrast_delta,
            "noise_sigma": params.noise_sigma,
            "unsharp_radius": params.unsharp_radius,
            "unsharp_amount": params.unsharp_amount,
        },
    )
    manifest = DatasetManifest.load(args.manifest)
    before = len(manifest.entries)
    result = augment_dataset(
        manifest,
        params,
        out_dir=Path(args.out_dir) if args.out_dir else None,
        workers=args.workers,
    )
    result.save(args.out)
    print(f"augmented {before} originals into {len(result.entries)} entries -> {args.out}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    cfg = SplitConfig(train_fraction=args.train_fraction, seed=args.seed)
    _log_config(
        "split",
        {
            "manifest": args.manifest,
            "out": args.out,
            "train_fraction": cfg.train_fraction,
            "seed": cfg.seed,
        },
    )
    manifest = DatasetManifest.load(args.manifest)
    result = stratified_split(manifest, cfg)
    result.save(args.out)
    from surgscan.dataset import Split

    train = sum(1 for s in result.split.values() if s is Split.TRAIN)
    val = len(result.split) - train
    print(f"split {len(result.entries)} images: {train} train / {val} val -> {args.out}")
    return 0


def cmd_emit(args: argparse.Namespace) -> int:
    _log_config("emit", {"manifest": args.manifest, "root": args.root})
    manifest = DatasetManifest.load(args.manifest)
    config_path = emit_dataset_config(manifest, args.root)
    print(f"dataset materialized under {args.root} (config: {config_path})")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    _log_config("validate", {"root": args.root})
    report = validate_layout(args.root)
    print(report.summary())
    return 0 if report.ok else 1


def cmd_report(args: argparse.Namespace) -> int:
    _log_config(
        "report",
        {"csv": args.csv, "title": args.title, "out": args.out, "export_csv": args.export_csv},
    )
    try:
        rows = parse_rows_csv(Path(args.csv).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {args.csv}: {exc}") from exc
    except ValueError as exc:
        raise SurgScanError(f"{args.csv}: {exc}") from exc
    if not rows:
        raise SurgScanError(f"{args.csv}: no data rows")
    table = render_comparison(rows, args.title)
    if args.out:
        Path(args.out).write_text(table)
        print(f"wrote {args.out}")
    else:
        print(table, end="")
    if args.export_csv:
        Path(args.export_csv).write_text(export_csv(rows))
        print(f"wrote {args.export_csv}")
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    from surgscan import fixtures

    _log_config(
        "fixtures", {"out": args.out, "kind": args.kind, "per_instrument": args.per_instrument}
    )
    if args.kind == "cascade":
        paths = fixtures.generate_cascade_fixtures(args.out, per_instrument=args.per_instrument)
        print(f"wrote {len(paths)} cascade fixtures under {args.out}")
    else:
        entries = fixtures.generate_annotated_corpus(args.out, per_instrument=args.per_instrument)
        print(
            f"wrote {len(entries)} images with annotations under {args.out} "
            f"(images/ and annotations/)"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from surgscan.service import create_app, load_config

    config = load_config(args.config)
    overrides = {}
    if args.port is not None:
        overrides["port"] = args.port
    if args.data_dir is not None:
        overrides["data_dir"] = Path(args.data_dir)
    if args.backend is not None:
        overrides["backend"] = args.backend
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    _log_config("serve", config.describe())

    app = create_app(config)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, config.port))
    bound_port = sock.getsockname()[1]
    # The bound port goes to stdout so callers that asked for port 0 can
    # discover the real one.
    print(f"listening on http://{args.host}:{bound_port}", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level=args.log_level))
    server.run(sockets=[sock])
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgscan",
        description="Surgical-instrument inspection toolkit: dataset curation, "
        "inference, reporting, and the batch-inspection service.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert XML annotations into label files")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of .xml annotations")
    p.add_argument("--images", required=True, help="directory of the referenced images")
    p.add_argument("--out", required=True, help="output directory for label files")
    p.add_argument("--manifest-out", default=None, help="also write a dataset manifest here")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("augment", help="expand training originals into derivatives")
    p.add_argument("--manifest", required=True, help="input manifest (JSONL)")
    p.add_argument("--out", required=True, help="output manifest path")
    p.add_argument("--out-dir", default=None, help="directory for derivative images")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotations", default="90,180,270", help="comma list or 'none'")
    p.add_argument("--random-rotation", type=float, default=20.0, help="degrees, 0 disables")
    p.add_argument("--brightness", type=float, default=0.20, help="max +/- shift, 0 disables")
    p.add_argument("--contrast", type=float, default=0.20, help="max +/- shift, 0 disables")
    p.add_argument("--noise-sigma", type=float, default=10.0, help="0 disables")
    p.add_argument("--unsharp-radius", type=float, default=2.0)
    p.add_argument("--unsharp-amount", type=float, default=1.0, help="0 disables")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("split", help="assign train/val stratified by instrument and condition")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-fraction", type=float, default=0.80)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("emit", help="materialize images/labels layout and dataset config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("validate", help="audit a materialized dataset tree")
    p.add_argument("--root", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="render a model-comparison table from CSV rows")
    p.add_argument("--csv", required=True, help="input rows (Model,Training Acc.,...)")
    p.add_argument("--title", default="Model comparison")
    p.add_argument("--out", default=None, help="write the table here instead of stdout")
    p.add_argument("--export-csv", default=None, help="also export normalized CSV")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fixtures", help="generate synthetic fixture corpora")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("cascade", "corpus"), default="corpus")
    p.add_argument("--per-instrument", type=int, default=4)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("serve", help="run the batch-inspection service")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None, help="0 picks a free port")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--backend", choices=("stub", "external"), default=None)
    p.add_argument("--log-level", default="warning")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IoFailure, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except (SurgScanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
