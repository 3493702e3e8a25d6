"""This module contains the eval command: per-view image metrics against reference images."""

import csv
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from canopeel.handlers.common import BaseCommand
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.misc.imaging import read_float_image, read_png, read_png_linear
from canopeel.services.analysis.metrics import msssim, psnr, target_error

__all__: tuple[str, ...] = ("EvalCommand", "ViewScore", "pair_views", "score_views", "summarize", "write_metrics")


class ViewScore(NamedTuple):
    """
    Metrics of one view.

    :param name: Image file name.
    :param msssim: Multi-scale SSIM.
    :param psnr: PSNR in dB.
    :param target_error: Mean absolute error over target pixels, nan without a target mask.
    """

    name: str
    msssim: float
    psnr: float
    target_error: float


def _read_linear(path: Path) -> NDArray[np.float64]:
    """Prefers the float sidecar of a PNG when it exists."""
    sidecar: Path = path.with_suffix(".cnpf")
    return read_float_image(path=sidecar) if sidecar.is_file() else read_png_linear(path=path)


def pair_views(rendered_dir: Path, oracle_dir: Path) -> list[str]:
    """
    Returns the image names present in both directories.

    :param rendered_dir: Rendered images.
    :param oracle_dir: Reference images.
    :return: Sorted file names.
    :raises InputError: if a directory is missing or empty, or a reference has no rendered counterpart.
    """
    for directory in (rendered_dir, oracle_dir):
        if not Path(directory).is_dir():
            raise InputError(f"{directory} is not a directory")
    references: list[str] = sorted(p.name for p in Path(oracle_dir).glob("*.png"))
    if not references:
        raise InputError(f"No reference images in {oracle_dir}")
    missing: list[str] = [name for name in references if not (Path(rendered_dir) / name).is_file()]
    if missing:
        raise InputError(f"No rendered counterpart in {rendered_dir} for: {', '.join(missing)}")
    return references


def _targets_dir(oracle_dir: Path) -> Path | None:
    for candidate in (Path(oracle_dir) / "targets", Path(oracle_dir).parent / "targets"):
        if candidate.is_dir():
            return candidate
    return None


def score_views(rendered_dir: Path, oracle_dir: Path) -> list[ViewScore]:
    """
    Scores every rendered view against its reference.

    :param rendered_dir: Rendered images.
    :param oracle_dir: Reference images, a sibling or child targets/ directory adds the target error.
    :return: Scores in file name order.
    """
    targets: Path | None = _targets_dir(oracle_dir)
    scores: list[ViewScore] = []
    for name in pair_views(rendered_dir=rendered_dir, oracle_dir=oracle_dir):
        render: NDArray[np.float64] = _read_linear(Path(rendered_dir) / name)
        reference: NDArray[np.float64] = _read_linear(Path(oracle_dir) / name)
        error: float = float("nan")
        if targets is not None and (targets / name).is_file():
            mask: NDArray[np.float64] = read_png(path=targets / name)
            error = target_error(render=render, reference=reference, mask=mask if mask.ndim == 2 else mask[..., 0])
        scores.append(
            ViewScore(name=name, msssim=msssim(render, reference), psnr=psnr(render, reference), target_error=error)
        )
    return scores


def _mean_std(values: list[float]) -> tuple[float, float]:
    data: NDArray[np.float64] = np.asarray(values, dtype=np.float64)
    if np.all(np.isinf(data)):
        return float("inf"), 0.0
    return float(np.mean(data)), float(np.std(data))


def summarize(scores: list[ViewScore]) -> dict[str, float]:
    """
    Returns the mean and standard deviation rows of every metric.

    Metrics without any finite value (target error without masks) are left out.

    :param scores: Per-view scores.
    :return: Row name to value mapping.
    """
    rows: dict[str, float] = {}
    for metric in ("msssim", "psnr", "target_error"):
        values: list[float] = [getattr(s, metric) for s in scores if not np.isnan(getattr(s, metric))]
        if values:
            rows[f"{metric}_mean"], rows[f"{metric}_std"] = _mean_std(values)
    return rows


def write_metrics(path: Path, scores: list[ViewScore]) -> dict[str, float]:
    """
    Writes the name,value CSV: one row per view and metric, then the mean and std rows.

    :param path: Output file.
    :param scores: Per-view scores.
    :return: Summary rows.
    :raises StorageError: if the file cannot be written.
    """
    summary: dict[str, float] = summarize(scores)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream)
            writer.writerow(("name", "value"))
            for score in scores:
                stem: str = Path(score.name).stem
                writer.writerow((f"{stem}.msssim", repr(score.msssim)))
                writer.writerow((f"{stem}.psnr", repr(score.psnr)))
                if not np.isnan(score.target_error):
                    writer.writerow((f"{stem}.target_error", repr(score.target_error)))
            writer.writerows((name, repr(value)) for name, value in summary.items())
    except OSError as exc:
        raise StorageError(f"Cannot write metrics {path}: {exc}") from exc
    return summary


class EvalCommand(BaseCommand):
    """Compares rendered images with reference images."""

    name: str = "eval"
    summary: str = "score rendered views against references with M-SSIM and PSNR"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--rendered", type=Path, required=True, help="directory of rendered images")
        parser.add_argument("--oracle", type=Path, required=True, help="directory of reference images")
        parser.add_argument("--out", type=Path, required=True, help="metrics CSV")

    def run(self, args: Namespace) -> int:
        """
        Scores the views and writes the CSV and the text report.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        with self._timer.phase("score"):
            scores: list[ViewScore] = score_views(rendered_dir=args.rendered, oracle_dir=args.oracle)
        summary: dict[str, float] = write_metrics(path=args.out, scores=scores)
        self._report(
            tmpl="eval_report.jinja2",
            data={"scores": [s._asdict() for s in scores], "summary": summary},
            path=Path(args.out).with_suffix(".txt"),
        )
        self._finish(
            path=Path(args.out).with_name(Path(args.out).stem + ".manifest.json"),
            seed=0 if args.seed is None else args.seed,
            configs={},
            artifacts={"metrics": args.out, "rendered": args.rendered, "oracle": args.oracle, **summary},
        )
        return 0
