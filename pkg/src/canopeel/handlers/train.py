"""This module contains the train command."""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from canopeel.handlers.common import BaseCommand
from canopeel.misc.dataclasses import FieldConfig, TrainConfig
from canopeel.services.dataset import Dataset, load_dataset
from canopeel.services.train import LOSS_KINDS, FitResult, fit

__all__: tuple[str, ...] = ("TrainCommand",)


class TrainCommand(BaseCommand):
    """Fits a voxel field to a dataset."""

    name: str = "train"
    summary: str = "reconstruct a radiance field from a dataset"
    _tmpl_summary: str = "train_summary.jinja2"

    def configure(self, parser: ArgumentParser) -> None:
        parser.add_argument("--data", type=Path, required=True, help="dataset directory")
        parser.add_argument("--config", type=Path, default=None, help="training configuration (JSON)")
        parser.add_argument("--field", type=Path, default=None, help="field layout (JSON)")
        parser.add_argument("--out", type=Path, required=True, help="output directory")
        parser.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
        parser.add_argument("--loss", choices=LOSS_KINDS, default=None, help="photometric loss")

    def run(self, args: Namespace) -> int:
        """
        Trains the field and writes the checkpoint, the loss log and the summary.

        :param args: Parsed arguments.
        :return: Exit code.
        """
        configs: dict[str, Any] = self._load_configs(
            args=args, files={"train": (TrainConfig, args.config), "field": (FieldConfig, args.field)}
        )
        if args.seed is not None:
            configs["train"] = configs["train"]._replace(rng_seed=args.seed)
        if args.loss is not None:
            configs["train"] = configs["train"]._replace(loss_kind=args.loss)
        train_config: TrainConfig = configs["train"]
        with self._timer.phase("load"):
            dataset: Dataset = load_dataset(path=args.data)
        with self._timer.phase("train"):
            result: FitResult = fit(
                dataset=dataset,
                field_config=configs["field"],
                train_config=train_config,
                out_dir=args.out,
                resume=args.resume,
                threads=self._threads(args),
            )
        checkpoint: Path = Path(args.out) / "field.cnpl"
        final_loss: float = result.log[-1][1] if result.log else float("nan")
        self._report(
            tmpl=self._tmpl_summary,
            data={
                "checkpoint": str(checkpoint),
                "steps": len(result.log),
                "loss_kind": train_config.loss_kind,
                "first_loss": result.log[0][1] if result.log else float("nan"),
                "final_loss": final_loss,
                "resolution": list(result.field.resolution),
            },
            path=Path(args.out) / "train_summary.txt",
        )
        self._finish(
            path=Path(args.out) / "manifest.json",
            seed=train_config.rng_seed,
            configs=configs,
            artifacts={
                "checkpoint": checkpoint,
                "optimizer": checkpoint.with_name(checkpoint.name + ".opt.npz"),
                "log": Path(args.out) / "train_log.csv",
                "dataset": args.data,
                "resumed_from": args.resume,
                "final_loss": final_loss,
            },
        )
        return 0
