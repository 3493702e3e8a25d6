"""This module contains the sweep command: reconstruction quality against the number of views."""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from canopeel.handlers.common import BaseCommand
from canopeel.misc.dataclasses import CaptureConfig, FieldConfig, ForestParams, TrainConfig
from canopeel.services.experiments import VIEW_COUNTS, SweepRow, sampling_sweep, write_sweep
from canopeel.services.scene import AnalyticScene
from canopeel.services.scene_synth import generate_forest

__all__: tuple[str, ...] = ("SweepCommand",)


class SweepCommand(BaseCommand):
    """Runs the sampling-density sweep."""

    name: str = "sweep"
    summary: str = "train with 9, 18 and 36 views and score crop renders on shared held-out views"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--scene", type=Path, default=None, help="forest parameters (JSON)")
        parser.add_argument("--capture", type=Path, default=None, help="base capture configuration (JSON)")
        parser.add_argument("--field", type=Path, default=None, help="field layout (JSON)")
        parser.add_argument("--config", type=Path, default=None, help="training configuration (JSON)")
        parser.add_argument("--views", type=int, nargs="+", default=list(VIEW_COUNTS), help="training view counts")
        parser.add_argument("--margin", type=float, default=0.3, help="crop height above the terrain in meters")
        parser.add_argument("--out", type=Path, required=True, help="output directory")

    def run(self, args: Namespace) -> int:
        """
        Runs the sweep and writes sweep.csv with the text report.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        configs: dict[str, Any] = self._load_configs(
            args=args,
            files={
                "forest": (ForestParams, args.scene),
                "capture": (CaptureConfig, args.capture),
                "field": (FieldConfig, args.field),
                "train": (TrainConfig, args.config),
            },
        )
        if args.seed is not None:
            configs["forest"] = configs["forest"]._replace(seed=args.seed)
            configs["capture"] = configs["capture"]._replace(seed=args.seed)
            configs["train"] = configs["train"]._replace(rng_seed=args.seed)
        with self._timer.phase("scene"):
            scene: AnalyticScene = generate_forest(params=configs["forest"])
        with self._timer.phase("sweep"):
            rows: list[SweepRow] = sampling_sweep(
                scene=scene,
                capture=configs["capture"],
                field_config=configs["field"],
                train_config=configs["train"],
                view_counts=tuple(args.views),
                margin=args.margin,
                threads=self._threads(args),
            )
        out: Path = Path(args.out)
        write_sweep(path=out / "sweep.csv", rows=rows)
        self._report(
            tmpl="sweep_report.jinja2", data={"rows": [r._asdict() for r in rows]}, path=out / "sweep_report.txt"
        )
        self._finish(
            path=out / "manifest.json",
            seed=configs["forest"].seed,
            configs=configs,
            artifacts={"sweep": out / "sweep.csv", "msssim": {str(r.views): r.msssim for r in rows}},
        )
        return 0
