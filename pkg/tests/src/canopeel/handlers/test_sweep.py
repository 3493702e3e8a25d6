"""Unit tests for src/canopeel/handlers/sweep.py"""

import csv
import json
from argparse import Namespace
from pathlib import Path
from unittest.mock import MagicMock

from pytest_mock import MockerFixture

import canopeel
from canopeel.handlers.sweep import SweepCommand
from canopeel.misc.dataclasses import Paths
from canopeel.misc.tmpl_render import TmplRender
from canopeel.services.experiments import SweepRow

__all__: tuple = ()


def test_sweep_command_run(tmp_path: Path, mocker: MockerFixture) -> None:
    """
    Test that the seed reaches every generator and the sweep files are written.

    :param tmp_path: Temporary directory provided by pytest.
    :param mocker: Pytest-mock fixture.
    :return: None
    """
    forest: MagicMock = mocker.patch(target="canopeel.handlers.sweep.generate_forest", return_value=MagicMock())
    sweep: MagicMock = mocker.patch(
        target="canopeel.handlers.sweep.sampling_sweep",
        return_value=[SweepRow(views=4, msssim=0.62, msssim_std=0.03), SweepRow(views=8, msssim=0.71, msssim_std=0.02)],
    )
    config: MagicMock = MagicMock()
    config.threads = 2
    paths: Paths = Paths(logs=tmp_path, tmpl=Path(canopeel.__file__).parent / "templates")
    command: SweepCommand = SweepCommand(config=config, tmpl=TmplRender(paths=paths))
    args: Namespace = Namespace(
        scene=None,
        capture=None,
        field=None,
        config=None,
        views=[4, 8],
        margin=0.4,
        out=tmp_path / "sweep",
        seed=9,
        threads=None,
        overrides={"n_stems": "3", "step_count": "5"},
    )

    code: int = command.run(args)

    assert code == 0
    params = forest.call_args.kwargs["params"]
    assert (params.seed, params.n_stems) == (9, 3)
    kwargs: dict = sweep.call_args.kwargs
    assert kwargs["capture"].seed == 9
    assert kwargs["train_config"].rng_seed == 9
    assert kwargs["train_config"].step_count == 5
    assert kwargs["view_counts"] == (4, 8)
    assert kwargs["margin"] == 0.4
    assert kwargs["threads"] == 2
    with open(tmp_path / "sweep" / "sweep.csv", encoding="utf-8") as stream:
        assert list(csv.reader(stream))[1:] == [["4", "0.62"], ["8", "0.71"]]
    assert "0.7100" in (tmp_path / "sweep" / "sweep_report.txt").read_text(encoding="utf-8")
    manifest: dict = json.loads((tmp_path / "sweep" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 9
    assert manifest["artifacts"]["msssim"] == {"4": 0.62, "8": 0.71}
