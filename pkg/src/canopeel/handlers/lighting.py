"""This module contains the inspect-lighting command."""

import json
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from canopeel.handlers.common import BaseCommand
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.misc.imaging import read_png_linear
from canopeel.services.analysis.lighting import ExposureReport, exposure_histogram

__all__: tuple[str, ...] = ("LightingCommand", "collect_images")


def collect_images(path: Path) -> list[Path]:
    """
    Finds the images to inspect: a single PNG, a directory of PNGs or a dataset directory.

    :param path: File or directory.
    :return: Sorted image paths.
    :raises InputError: if nothing can be inspected.
    """
    source: Path = Path(path)
    if source.is_file():
        return [source]
    if not source.is_dir():
        raise InputError(f"{source} does not exist")
    if (source / "images").is_dir():
        source = source / "images"
    images: list[Path] = sorted(source.glob("*.png"))
    if not images:
        raise InputError(f"No PNG images in {source}")
    return images


class LightingCommand(BaseCommand):
    """Reports the exposure histogram of every image and flags direct light."""

    name: str = "inspect-lighting"
    summary: str = "flag bimodal exposure histograms caused by direct light"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--input", type=Path, required=True, help="image, image directory or dataset")
        parser.add_argument("--bins", type=int, default=64, help="histogram bins, at least 16")
        parser.add_argument("--out", type=Path, default=None, help="JSON report")

    def run(self, args: Namespace) -> int:
        """
        Builds the histograms and aggregates the fraction of bimodal images.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        images: list[Path] = collect_images(args.input)
        records: list[dict[str, Any]] = []
        with self._timer.phase("histograms"):
            for path in images:
                report: ExposureReport = exposure_histogram(image=read_png_linear(path=path), n_bins=args.bins)
                records.append(
                    {
                        "name": path.name,
                        "bimodal": report.bimodal,
                        "coefficient": report.coefficient,
                        "modes": list(report.modes),
                        "histogram": [int(c) for c in report.histogram],
                    }
                )
        fraction: float = sum(r["bimodal"] for r in records) / len(records)
        summary: dict[str, Any] = {"images": records, "bimodal_fraction": fraction, "bins": args.bins}
        text_path: Path | None = None
        if args.out is not None:
            try:
                Path(args.out).parent.mkdir(parents=True, exist_ok=True)
                Path(args.out).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
            except OSError as exc:
                raise StorageError(f"Cannot write lighting report {args.out}: {exc}") from exc
            text_path = Path(args.out).with_suffix(".txt")
        self._report(tmpl="lighting_report.jinja2", data=summary, path=text_path)
        if args.out is not None:
            self._finish(
                path=Path(args.out).with_name(Path(args.out).stem + ".manifest.json"),
                seed=0 if args.seed is None else args.seed,
                configs={},
                artifacts={"report": args.out, "input": args.input, "bimodal_fraction": fraction},
            )
        return 0
