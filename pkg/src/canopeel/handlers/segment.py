"""This module contains the segment command: HSV canopy masks for the training images."""

from argparse import ArgumentParser, Namespace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from canopeel.handlers.common import BaseCommand
from canopeel.misc.exceptions import InputError
from canopeel.misc.imaging import write_png
from canopeel.services.analysis.segmentation import DEFAULT_HALF_WIDTHS, HsvBox, hsv_box_segment
from canopeel.services.dataset import Dataset, load_dataset, view_name

__all__: tuple[str, ...] = ("SegmentCommand",)


class SegmentCommand(BaseCommand):
    """Writes seg/ masks derived from a picked canopy color."""

    name: str = "segment"
    summary: str = "derive canopy segmentation masks from a picked color"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--data", type=Path, required=True, help="dataset directory")
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--pick", type=int, nargs=3, metavar=("VIEW", "X", "Y"), help="seed pixel")
        source.add_argument("--color", type=float, nargs=3, metavar=("R", "G", "B"), help="seed linear color")
        parser.add_argument(
            "--half-widths", type=float, nargs=3, default=DEFAULT_HALF_WIDTHS, help="HSV box half-widths"
        )

    @staticmethod
    def seed_color(args: Namespace, dataset: Dataset) -> NDArray[np.float64]:
        """
        Returns the seed color from --color or from the picked pixel.

        :param args: Parsed arguments.
        :param dataset: Dataset.
        :return: Linear RGB.
        :raises InputError: if the picked pixel does not exist.
        """
        if args.color is not None:
            return np.asarray(args.color, dtype=np.float64)
        view, x, y = args.pick
        if not 0 <= view < len(dataset.images):
            raise InputError(f"View {view} does not exist, the dataset has {len(dataset.images)} views")
        image: NDArray[np.float64] = dataset.images[view]
        if not (0 <= x < image.shape[1] and 0 <= y < image.shape[0]):
            raise InputError(f"Pixel ({x}, {y}) is outside the {image.shape[1]}x{image.shape[0]} image")
        return image[y, x]

    def run(self, args: Namespace) -> int:
        """
        Segments every training image and writes the masks.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        with self._timer.phase("load"):
            dataset: Dataset = load_dataset(path=args.data)
        box: HsvBox = HsvBox.from_rgb(rgb=self.seed_color(args, dataset), half_widths=tuple(args.half_widths))
        canopy: list[float] = []
        with self._timer.phase("segment"):
            for index, image in enumerate(dataset.images):
                mask: NDArray[np.float64] = hsv_box_segment(image=image, box=box)
                write_png(path=Path(args.data) / "seg" / view_name(index), image=mask)
                canopy.append(float(1.0 - mask.mean()))
        self._report(
            tmpl="segment_summary.jinja2",
            data={"box": box, "views": len(canopy), "canopy_fraction": float(np.mean(canopy))},
        )
        self._finish(
            path=Path(args.data) / "segment.manifest.json",
            seed=0 if args.seed is None else args.seed,
            configs={},
            artifacts={
                "masks": Path(args.data) / "seg",
                "hsv_box": [box.hue, box.saturation, box.value, *box.half_widths],
            },
        )
        return 0
