"""This module contains the stems command: tree stem counting on a trained field."""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from canopeel.handlers.common import BaseCommand
from canopeel.misc.dataclasses import StemsConfig
from canopeel.services.analysis.pointcloud import PointCloud
from canopeel.services.analysis.stems import StemReport, run_stem_pipeline
from canopeel.services.field import VoxelField, load_checkpoint
from canopeel.services.geometry import Dtm, load_dtm

__all__: tuple[str, ...] = ("StemsCommand",)


class StemsCommand(BaseCommand):
    """Exports the density field as points and counts the stems."""

    name: str = "stems"
    summary: str = "count tree stems in the exported density field"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, required=True, help="field checkpoint")
        parser.add_argument("--dtm", type=Path, required=True, help="terrain model (dtm.json)")
        parser.add_argument("--config", type=Path, default=None, help="stem pipeline configuration (JSON)")
        parser.add_argument("--out", type=Path, required=True, help="stem report (JSON)")
        parser.add_argument("--keep-stages", action="store_true", help="write the point cloud of every stage")

    def run(self, args: Namespace) -> int:
        """
        Runs the pipeline and writes the JSON report, the text report and the stage clouds.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        configs: dict[str, Any] = self._load_configs(args=args, files={"stems": (StemsConfig, args.config)})
        config: StemsConfig = configs["stems"]
        with self._timer.phase("load"):
            field: VoxelField = load_checkpoint(path=args.checkpoint)
            dtm: Dtm = load_dtm(path=args.dtm)
        stages_dir: Path | None = Path(args.out).parent / "stages" if args.keep_stages else None
        with self._timer.phase("pipeline"):
            report, stages = run_stem_pipeline(voxel_field=field, dtm=dtm, config=config, stages_dir=stages_dir)
        report.save(path=args.out)
        self._write_text(report=report, stages=stages, out=Path(args.out))
        artifacts: dict[str, Any] = {"report": args.out, "stem_count": report.stem_count}
        if stages_dir is not None:
            artifacts["stages"] = [stages_dir / name for name in stages]
        self._finish(
            path=Path(args.out).with_name(Path(args.out).stem + ".manifest.json"),
            seed=0 if args.seed is None else args.seed,
            configs=configs,
            artifacts=artifacts,
        )
        return 0

    def _write_text(self, report: StemReport, stages: dict[str, PointCloud], out: Path) -> None:
        self._report(
            tmpl="stems_report.jinja2",
            data={
                "report": report.to_dict(),
                "stages": {name: len(cloud) for name, cloud in stages.items()},
            },
            path=out.with_suffix(".txt"),
        )
