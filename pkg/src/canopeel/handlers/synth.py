"""This module contains the synth command: procedural forest and image capture."""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from canopeel.handlers.common import BaseCommand
from canopeel.misc.dataclasses import CaptureConfig, ForestParams
from canopeel.services.dataset import Dataset, save_dataset
from canopeel.services.scene import AnalyticScene
from canopeel.services.scene_synth import generate_capture, generate_forest

__all__: tuple[str, ...] = ("SynthCommand",)


class SynthCommand(BaseCommand):
    """Generates a synthetic forest and writes its capture as a dataset directory."""

    name: str = "synth"
    summary: str = "generate a synthetic forest and capture it as a posed image dataset"
    _tmpl_summary: str = "synth_summary.jinja2"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--scene", type=Path, default=None, help="forest parameters (JSON)")
        parser.add_argument("--capture", type=Path, default=None, help="capture configuration (JSON)")
        parser.add_argument("--out", type=Path, required=True, help="output dataset directory")

    def run(self, args: Namespace) -> int:
        """
        Generates the scene, renders the capture and writes the dataset.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        configs: dict[str, Any] = self._load_configs(
            args=args, files={"forest": (ForestParams, args.scene), "capture": (CaptureConfig, args.capture)}
        )
        if args.seed is not None:
            configs["forest"] = configs["forest"]._replace(seed=args.seed)
            configs["capture"] = configs["capture"]._replace(seed=args.seed)
        forest: ForestParams = configs["forest"]
        capture: CaptureConfig = configs["capture"]
        threads: int = self._threads(args)
        with self._timer.phase("scene"):
            scene: AnalyticScene = generate_forest(params=forest)
        with self._timer.phase("capture"):
            dataset: Dataset = generate_capture(scene=scene, cfg=capture, threads=threads)
        with self._timer.phase("write"):
            save_dataset(path=args.out, dataset=dataset)
        held: int = 0 if dataset.heldout is None else len(dataset.heldout)
        self._report(
            tmpl=self._tmpl_summary,
            data={
                "out": str(args.out),
                "views": len(dataset.train),
                "heldout": held,
                "stems": len(scene.stems),
                "blobs": len(scene.canopy),
                "targets": len(scene.targets),
                "fx": dataset.metadata["fx"],
                "gsd": dataset.metadata["gsd"],
            },
        )
        self._finish(
            path=Path(args.out) / "manifest.json",
            seed=forest.seed,
            configs=configs,
            artifacts={
                "dataset": args.out,
                "views": len(dataset.train),
                "heldout_views": held,
                "fx": dataset.metadata["fx"],
                "gsd": dataset.metadata["gsd"],
            },
        )
        return 0
