"""CLI: export --model NAME --images DIR --manifest FILE --out PREFIX."""

from __future__ import annotations

import argparse
import sys

from .errors import ExporterError, ManifestMismatch, ModelLoadError
from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tta-export",
        description="Write TTAP/TTAL files from a classifier run over policy views.",
    )
    parser.add_argument("--model", required=True,
                        help="stub[:C] | linear:C:SEED | torchvision model name")
    parser.add_argument("--images", required=True,
                        help="directory with one subfolder per class")
    parser.add_argument("--manifest", required=True, help="policy manifest (TSV)")
    parser.add_argument("--out", required=True, help="output prefix for .ttap/.ttal")
    parser.add_argument("--mean", type=float, nargs=3, default=None,
                        help="normalization mean (3 floats)")
    parser.add_argument("--std", type=float, nargs=3, default=None,
                        help="normalization std (3 floats)")
    parser.add_argument("--no-preprocess", action="store_true",
                        help="skip the resize-256 + center-crop step")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kwargs = {}
    if args.mean is not None:
        kwargs["mean"] = tuple(args.mean)
    if args.std is not None:
        kwargs["std"] = tuple(args.std)
    job = ExportJob(
        model=args.model,
        image_dir=args.images,
        manifest_path=args.manifest,
        out_prefix=args.out,
        skip_preprocess=args.no_preprocess,
        **kwargs,
    )
    try:
        result = export(job)
    except ModelLoadError as exc:
        print(f"error: model: {exc}", file=sys.stderr)
        return 4
    except ManifestMismatch as exc:
        print(f"error: manifest: {exc}", file=sys.stderr)
        return 5
    except (ExporterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"wrote {result.predictions_path} (n={result.n}, m={result.m}, "
        f"c={result.c}) and {result.labels_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
