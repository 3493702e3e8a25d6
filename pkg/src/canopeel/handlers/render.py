"""This module contains the render command: full, crop and masked views of a trained field."""

from argparse import ArgumentParser, Namespace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from canopeel.handlers.common import BaseCommand
from canopeel.misc.exceptions import InputError
from canopeel.misc.imaging import write_float_image, write_png_linear
from canopeel.services.field import VoxelField, load_checkpoint
from canopeel.services.geometry import Camera, Dtm, load_cameras, load_dtm
from canopeel.services.render import RenderPolicy, render_image

__all__: tuple[str, ...] = ("RenderCommand",)


def _output_name(index: int, image: str) -> str:
    """Keeps the image name of the camera record so renders pair with their references."""
    return Path(image).name if image else f"view_{index:03d}.png"


class RenderCommand(BaseCommand):
    """Renders a checkpoint from the cameras of a camera file."""

    name: str = "render"
    summary: str = "render full, crop (ground-only) or masked views of a checkpoint"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, required=True, help="field checkpoint")
        parser.add_argument("--cameras", type=Path, required=True, help="camera file (cameras.json)")
        parser.add_argument("--out", type=Path, required=True, help="output directory")
        parser.add_argument("--full", action="store_true", help="integrate whole rays (default)")
        parser.add_argument("--crop", action="store_true", help="start integration above the terrain")
        parser.add_argument("--dtm", type=Path, default=None, help="terrain model for --crop (dtm.json)")
        parser.add_argument("--margin", type=float, default=0.3, help="crop height above the terrain in meters")
        parser.add_argument("--mask", action="store_true", help="gate the weights by the learned visibility")
        parser.add_argument("--samples", type=int, default=128, help="samples per ray")
        parser.add_argument("--background", type=float, nargs=3, default=(0.5, 0.5, 0.5), help="background RGB")
        parser.add_argument("--float", dest="float_out", action="store_true", help="also write linear float rasters")

    @staticmethod
    def policy(args: Namespace) -> RenderPolicy:
        """
        Builds the integration policy from the mode flags.

        :param args: Parsed arguments.
        :return: RenderPolicy.
        :raises InputError: if the flags contradict each other or --crop lacks --dtm.
        """
        if args.full and (args.crop or args.mask):
            raise InputError("--full cannot be combined with --crop or --mask")
        if args.crop and args.dtm is None:
            raise InputError("--crop requires --dtm")
        if args.samples < 1:
            raise InputError(f"--samples must be positive, got {args.samples}")
        dtm: Dtm | None = load_dtm(path=args.dtm) if args.crop else None
        return RenderPolicy(dtm=dtm, margin=args.margin, masked=args.mask)

    def run(self, args: Namespace) -> int:
        """
        Renders one PNG per camera, plus a float raster with --float.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        policy: RenderPolicy = self.policy(args)
        with self._timer.phase("load"):
            field: VoxelField = load_checkpoint(path=args.checkpoint)
            cameras: list[tuple[Camera, str]] = load_cameras(path=args.cameras)
        written: list[str] = []
        with self._timer.phase("render"):
            for index, (camera, image_name) in enumerate(cameras):
                image: NDArray[np.float64] = render_image(
                    field=field,
                    camera=camera,
                    policy=policy,
                    n_samples=args.samples,
                    background=tuple(args.background),
                    threads=self._threads(args),
                )
                target: Path = Path(args.out) / _output_name(index=index, image=image_name)
                write_png_linear(path=target, image=image)
                if args.float_out:
                    write_float_image(path=target.with_suffix(".cnpf"), image=image)
                written.append(target.name)
        self._report(
            tmpl="render_summary.jinja2", data={"mode": policy.mode, "count": len(written), "out": str(args.out)}
        )
        self._finish(
            path=Path(args.out) / "manifest.json",
            seed=0 if args.seed is None else args.seed,
            configs={},
            artifacts={
                "checkpoint": args.checkpoint,
                "cameras": args.cameras,
                "mode": policy.mode,
                "margin": args.margin,
                "samples": args.samples,
                "images": written,
            },
        )
        return 0
