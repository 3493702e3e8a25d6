"""Unit tests for src/canopeel/services/scene.py"""

# pylint: disable=redefined-outer-name

from pathlib import Path

import numpy as np
import pytest

from canopeel.misc.exceptions import InputError, StorageError
from canopeel.services.geometry import Dtm
from canopeel.services.scene import (
    AnalyticScene,
    CanopyBlob,
    GroundTexture,
    Stem,
    SunLight,
    Target,
    load_scene,
    save_scene,
)

__all__: tuple = ()


# region Fixtures
@pytest.fixture
def flat_texture() -> GroundTexture:
    """
    Fixture with a noise lattice at 0.5 everywhere, so the albedo equals the color.

    :return: GroundTexture.
    """
    return GroundTexture(origin=(0.0, 0.0), cell=2.0, values=np.full((3, 3), 0.5), color=(0.4, 0.3, 0.2))


@pytest.fixture
def scene(flat_texture: GroundTexture) -> AnalyticScene:
    """
    Fixture with one stem, one blob and one target over flat terrain covering [0, 4] x [0, 4].

    :param flat_texture: Ground texture.
    :return: AnalyticScene.
    """
    return AnalyticScene(
        dtm=Dtm(origin=(0.0, 0.0), cell_size=1.0, heights=np.full((5, 5), 1.0)),
        texture=flat_texture,
        stems=(Stem(base=(1.0, 1.0), base_z=1.0, height=6.0, radius=0.2, albedo=(0.3, 0.3, 0.3)),),
        canopy=(CanopyBlob(center=(1.0, 1.0, 6.5), radii=(1.0, 1.0, 1.5), albedo=(0.1, 0.5, 0.1), opacity=0.7),),
        targets=(Target(center=(3.0, 3.0), half_size=(0.5, 0.5), albedo=(0.9, 0.1, 0.1)),),
        sun=SunLight(elevation_deg=60.0, azimuth_deg=45.0, lit_gain=1.5, shadow_gain=0.2),
    )


# endregion


def test_stem_top_and_coercion() -> None:
    """
    Test that stems store tuples of floats and report their top.

    :return: None
    """
    stem: Stem = Stem(base=np.array([1, 2]), base_z=0.5, height=4.0, radius=0.1, albedo=[0.2, 0.2, 0.2])

    assert stem.base == (1.0, 2.0)
    assert isinstance(stem.albedo, tuple)
    assert stem.top == pytest.approx(4.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"base": (1.0,), "height": 1.0, "radius": 0.1},
        {"base": (1.0, 1.0), "height": 0.0, "radius": 0.1},
        {"base": (1.0, 1.0), "height": 1.0, "radius": -0.1},
    ],
)
def test_stem_rejects(kwargs: dict) -> None:
    """
    Test that malformed stems are rejected.

    :param kwargs: Stem fields.
    :return: None
    """
    with pytest.raises(InputError):
        Stem(base_z=0.0, albedo=(0.1, 0.1, 0.1), **kwargs)


@pytest.mark.parametrize("opacity, radii", [(1.0, (1.0, 1.0, 1.0)), (0.0, (1.0, 1.0, 1.0)), (0.5, (1.0, 0.0, 1.0))])
def test_blob_rejects(opacity: float, radii: tuple) -> None:
    """
    Test that blobs need an opacity in (0, 1) and positive radii.

    :param opacity: Blob opacity.
    :param radii: Blob radii.
    :return: None
    """
    with pytest.raises(InputError):
        CanopyBlob(center=(0.0, 0.0, 5.0), radii=radii, albedo=(0.1, 0.4, 0.1), opacity=opacity)


def test_target_contains_edges() -> None:
    """
    Test that the target rectangle includes its border.

    :return: None
    """
    target: Target = Target(center=(0.0, 0.0), half_size=(1.0, 0.5), albedo=(1.0, 0.0, 0.0))

    inside = target.contains(xs=np.array([0.0, 1.0, 1.01, 0.0]), ys=np.array([0.0, 0.5, 0.0, -0.6]))

    assert inside.tolist() == [True, True, False, False]


def test_sun_direction() -> None:
    """
    Test the unit vector toward the sun.

    :return: None
    """
    zenith: SunLight = SunLight(elevation_deg=90.0, azimuth_deg=30.0, lit_gain=1.0, shadow_gain=0.1)
    low: SunLight = SunLight(elevation_deg=30.0, azimuth_deg=90.0, lit_gain=1.0, shadow_gain=0.1)

    assert np.allclose(zenith.direction, [0.0, 0.0, 1.0])
    assert np.allclose(low.direction, [0.0, np.cos(np.pi / 6.0), 0.5])
    assert np.linalg.norm(low.direction) == pytest.approx(1.0)


@pytest.mark.parametrize("elevation", [0.0, -10.0, 91.0])
def test_sun_rejects_elevation(elevation: float) -> None:
    """
    Test that the sun elevation must lie in (0, 90].

    :param elevation: Elevation in degrees.
    :return: None
    """
    with pytest.raises(InputError):
        SunLight(elevation_deg=elevation, azimuth_deg=0.0, lit_gain=1.0, shadow_gain=0.1)


def test_texture_constant_lattice(flat_texture: GroundTexture) -> None:
    """
    Test that a lattice at 0.5 leaves the mean color unchanged, inside and outside the lattice.

    :param flat_texture: Ground texture.
    :return: None
    """
    albedo = flat_texture.albedo(xs=np.array([0.0, 1.3, 3.9, -5.0, 50.0]), ys=np.array([0.0, 2.2, 0.5, -5.0, 1.0]))

    assert albedo.shape == (5, 3)
    assert np.allclose(albedo, [0.4, 0.3, 0.2])


def test_texture_nodes_and_smoothstep() -> None:
    """
    Test node values, the smoothstep midpoint and the clamp to [0, 1].

    :return: None
    """
    texture: GroundTexture = GroundTexture(
        origin=(0.0, 0.0), cell=1.0, values=np.array([[1.0, 0.0], [1.0, 0.0]]), color=(0.4, 0.8, 0.1)
    )

    albedo = texture.albedo(xs=np.array([0.0, 1.0, 0.5]), ys=np.array([0.0, 1.0, 0.5]))

    assert np.allclose(albedo[0], [0.54, 1.0, 0.135])
    assert np.allclose(albedo[1], [0.26, 0.52, 0.065])
    assert np.allclose(albedo[2], [0.4, 0.8, 0.1])


def test_texture_rejects_small_lattice() -> None:
    """
    Test that the lattice must be at least 2x2.

    :return: None
    """
    with pytest.raises(InputError):
        GroundTexture(origin=(0.0, 0.0), cell=1.0, values=np.zeros((1, 4)), color=(0.5, 0.5, 0.5))


def test_scene_rejects_geometry_outside_footprint(flat_texture: GroundTexture) -> None:
    """
    Test that stems and blobs must stand over the terrain.

    :param flat_texture: Ground texture.
    :return: None
    """
    dtm: Dtm = Dtm(origin=(0.0, 0.0), cell_size=1.0, heights=np.zeros((3, 3)))

    with pytest.raises(InputError, match="Stem"):
        AnalyticScene(
            dtm=dtm,
            texture=flat_texture,
            stems=(Stem(base=(5.0, 1.0), base_z=0.0, height=3.0, radius=0.1, albedo=(0.2, 0.2, 0.2)),),
        )
    with pytest.raises(InputError, match="blob"):
        AnalyticScene(
            dtm=dtm,
            texture=flat_texture,
            canopy=(CanopyBlob(center=(1.0, -1.0, 3.0), radii=(1.0, 1.0, 1.0), albedo=(0.1, 0.4, 0.1), opacity=0.5),),
        )


def test_scene_top(scene: AnalyticScene, flat_texture: GroundTexture) -> None:
    """
    Test that the scene top covers the terrain, the stems and the blobs.

    :param scene: Scene.
    :param flat_texture: Ground texture.
    :return: None
    """
    bare: AnalyticScene = AnalyticScene(dtm=scene.dtm, texture=flat_texture)

    assert scene.top == pytest.approx(8.0)
    assert bare.top == pytest.approx(1.0)


def test_ground_color_paints_targets(scene: AnalyticScene) -> None:
    """
    Test that targets replace the ground albedo only when requested.

    :param scene: Scene.
    :return: None
    """
    xs, ys = np.array([3.0, 1.0]), np.array([3.2, 1.0])

    painted, on_target = scene.ground_color(xs=xs, ys=ys)
    plain, off = scene.ground_color(xs=xs, ys=ys, targets=False)

    assert on_target.tolist() == [True, False]
    assert np.allclose(painted[0], [0.9, 0.1, 0.1])
    assert np.allclose(painted[1], [0.4, 0.3, 0.2])
    assert not off.any()
    assert np.allclose(plain, [0.4, 0.3, 0.2])


def test_base_height(scene: AnalyticScene) -> None:
    """
    Test the terrain height lookup.

    :param scene: Scene.
    :return: None
    """
    assert scene.base_height(x=2.5, y=0.5) == pytest.approx(1.0)


def test_scene_file_round_trip(tmp_path: Path, scene: AnalyticScene) -> None:
    """
    Test that a saved scene reads back with every record intact.

    :param tmp_path: Temporary directory.
    :param scene: Scene.
    :return: None
    """
    path: Path = tmp_path / "nested" / "scene.json"

    save_scene(path=path, scene=scene)
    loaded: AnalyticScene = load_scene(path=path)

    assert loaded.stems == scene.stems
    assert loaded.canopy == scene.canopy
    assert loaded.targets == scene.targets
    assert loaded.sun == scene.sun
    assert loaded.background == scene.background
    assert np.array_equal(loaded.dtm.heights, scene.dtm.heights)
    assert np.array_equal(loaded.texture.values, scene.texture.values)
    assert loaded.texture.color == scene.texture.color


def test_scene_without_sun_round_trip(tmp_path: Path, scene: AnalyticScene) -> None:
    """
    Test that diffuse scenes keep no sun.

    :param tmp_path: Temporary directory.
    :param scene: Scene.
    :return: None
    """
    diffuse: AnalyticScene = AnalyticScene(dtm=scene.dtm, texture=scene.texture, stems=scene.stems)

    save_scene(path=tmp_path / "scene.json", scene=diffuse)

    assert load_scene(path=tmp_path / "scene.json").sun is None


@pytest.mark.parametrize("content", ["{", '{"dtm": {}}', "[]"])
def test_load_scene_rejects(tmp_path: Path, content: str) -> None:
    """
    Test that malformed scene files raise StorageError.

    :param tmp_path: Temporary directory.
    :param content: File content.
    :return: None
    """
    path: Path = tmp_path / "scene.json"
    path.write_text(content, encoding="utf-8")

    with pytest.raises(StorageError):
        load_scene(path=path)


def test_load_scene_missing(tmp_path: Path) -> None:
    """
    Test that a missing scene file raises StorageError.

    :param tmp_path: Temporary directory.
    :return: None
    """
    with pytest.raises(StorageError):
        load_scene(path=tmp_path / "absent.json")
