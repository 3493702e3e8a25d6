"""Unit tests for src/canopeel/services/render.py"""

# pylint: disable=redefined-outer-name

import numpy as np
import pytest
from numpy.typing import NDArray

from canopeel.misc.dataclasses import CaptureConfig, FieldConfig
from canopeel.misc.exceptions import InputError
from canopeel.services.analysis.metrics import msssim
from canopeel.services.dataset import Views
from canopeel.services.field import VoxelField, field_new, inverse_sigmoid, inverse_softplus
from canopeel.services.geometry import Camera, Dtm, Ray, RayBundle, look_at_rotation
from canopeel.services.render import (
    Composite,
    RayRenderOutput,
    RenderBatch,
    RenderBounds,
    RenderPolicy,
    SparseGrad,
    clip_rays_to_field,
    composite,
    render_image,
    render_ray,
    render_ray_backward,
    render_rays,
    render_rays_backward,
    sample_positions,
)
from canopeel.services.scene import AnalyticScene, CanopyBlob, GroundTexture
from canopeel.services.scene_synth import generate_capture, scene_to_field

__all__: tuple = ()

_GROUND: tuple[float, float, float] = (0.8, 0.1, 0.1)
_CANOPY: tuple[float, float, float] = (0.1, 0.7, 0.2)


# region Fixtures
@pytest.fixture
def unit_density() -> VoxelField:
    """
    Fixture with density 1 and color (0.2, 0.4, 0.6) everywhere in [-1, 1] x [-1, 1] x [0, 2].

    :return: VoxelField.
    """
    field: VoxelField = field_new(lower=(-1.0, -1.0, 0.0), upper=(1.0, 1.0, 2.0), resolution=(2, 2, 2))
    field.params[..., 0] = inverse_softplus(1.0)
    field.params[..., 1:4] = inverse_sigmoid(np.array([0.2, 0.4, 0.6]))
    field.params[..., 4] = 40.0
    return field


@pytest.fixture
def random_field() -> VoxelField:
    """
    Fixture with random raw parameters over [0, 3]^3.

    :return: VoxelField.
    """
    params: NDArray[np.float64] = np.random.default_rng(5).normal(0.0, 1.0, size=(3, 3, 3, 5))
    return VoxelField(lower=np.zeros(3), upper=np.full(3, 3.0), params=params)


@pytest.fixture
def forest() -> VoxelField:
    """
    Fixture with a dense red ground layer, empty air and a dense green canopy layer of zero visibility.

    :return: VoxelField over [-2, 2] x [-2, 2] x [0, 4] with 1 m voxels.
    """
    field: VoxelField = field_new(lower=(-2.0, -2.0, 0.0), upper=(2.0, 2.0, 4.0), resolution=(4, 4, 4))
    field.params[..., 0] = -30.0
    field.params[:, :, 0, 0] = 30.0
    field.params[:, :, 0, 1:4] = inverse_sigmoid(np.array(_GROUND))
    field.params[:, :, 0, 4] = 40.0
    field.params[:, :, 3, 0] = 30.0
    field.params[:, :, 3, 1:4] = inverse_sigmoid(np.array(_CANOPY))
    field.params[:, :, 3, 4] = -40.0
    return field


@pytest.fixture
def nadir_camera() -> Camera:
    """
    Fixture with an 8x8 camera 10 m above the origin looking down.

    :return: Camera.
    """
    return Camera(
        fx=20.0,
        fy=20.0,
        cx=4.0,
        cy=4.0,
        width=8,
        height=8,
        rotation=look_at_rotation(eye=np.array([0.0, 0.0, 10.0]), target=np.zeros(3)),
        translation=(0.0, 0.0, 10.0),
    )


def _bundle() -> RayBundle:
    """Three oblique rays through [0, 3]^3."""
    directions: NDArray[np.float64] = np.array([[0.5, 0.6, -1.0], [-0.3, 0.2, -1.0], [0.1, -0.4, -1.0]])
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return RayBundle(
        origins=np.array([[0.2, 0.3, 2.9], [2.5, 1.1, 2.8], [1.4, 2.6, 2.95]]),
        directions=directions,
        t_near=np.zeros(3),
        t_far=np.full(3, 2.5),
    )


def _objective(batch: RenderBatch, up_color: NDArray[np.float64], up_vis: NDArray[np.float64]) -> float:
    """Linear functional of the render that the backward pass differentiates."""
    return float(np.sum(batch.color * up_color) + np.sum(batch.visibility * up_vis))


# endregion


# region Quadrature
def test_sample_positions_cover_the_segment() -> None:
    """
    Midpoint samples sit in the bin centers and the intervals sum to the segment length.

    :return: None
    """
    t, delta = sample_positions(start=np.array([1.0, 2.0]), end=np.array([3.0, 1.0]), jitter=np.full((2, 4), 0.5))

    np.testing.assert_allclose(t[0], [1.25, 1.75, 2.25, 2.75])
    np.testing.assert_allclose(delta[0].sum(), 2.0)
    np.testing.assert_allclose(delta[0], [0.5, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(delta[1], np.zeros(4))


def test_jittered_samples_stay_in_their_bins() -> None:
    """
    Test that each jittered sample lies in its own bin.

    :return: None
    """
    jitter: NDArray[np.float64] = np.random.default_rng(0).random((1, 8))
    t, delta = sample_positions(start=np.array([0.0]), end=np.array([8.0]), jitter=jitter)

    np.testing.assert_array_equal(np.floor(t[0]), np.arange(8.0))
    assert delta.sum() == pytest.approx(8.0)


def test_composite_two_samples() -> None:
    """
    Two half-opaque samples give weights 0.5 and 0.25, the rest is background.

    :return: None
    """
    colors: NDArray[np.float64] = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    result: Composite = composite(alpha=np.array([[0.5, 0.5]]), colors=colors, background=np.array([0.0, 0.0, 1.0]))

    np.testing.assert_allclose(result.weights, [[0.5, 0.25]])
    np.testing.assert_allclose(result.transmittance, [[1.0, 0.5]])
    np.testing.assert_allclose(result.final_transmittance, [0.25])
    np.testing.assert_allclose(result.color, [[0.5, 0.25, 0.25]])


def test_gated_mass_goes_to_the_background() -> None:
    """
    A gate of 0 moves the sample weight to the background.

    :return: None
    """
    colors: NDArray[np.float64] = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    result: Composite = composite(
        alpha=np.array([[0.5, 0.5]]), colors=colors, background=np.array([0.0, 0.0, 1.0]), gate=np.array([[1.0, 0.0]])
    )

    np.testing.assert_allclose(result.background_weight, [0.5])
    np.testing.assert_allclose(result.color, [[0.5, 0.0, 0.5]])


# endregion


# region Single rays
def test_render_bounds() -> None:
    """
    Test the bounds checks, the mode names and the sampling start.

    :return: None
    """
    assert RenderBounds(t1=0.0, t2=1.0).mode == "full"
    assert RenderBounds(t1=0.0, t2=1.0, masked=True).mode == "masked"
    assert RenderBounds(t1=0.0, t2=1.0, t_g=0.4).start == 0.4
    assert RenderBounds(t1=0.0, t2=1.0, t_g=0.4, masked=True).mode == "crop+masked"
    with pytest.raises(InputError):
        RenderBounds(t1=1.0, t2=1.0)
    with pytest.raises(InputError):
        RenderBounds(t1=0.0, t2=1.0, t_g=1.0)
    assert RenderPolicy().mode == "full"
    assert RenderPolicy(dtm=Dtm(origin=(0.0, 0.0), cell_size=1.0, heights=np.zeros((2, 2)))).mode == "crop"


def test_unit_density_over_a_unit_segment(unit_density: VoxelField) -> None:
    """
    Density 1 over 1 m gives opacity 1 - 1/e whatever the sample count.

    :param unit_density: Fixture providing the field.
    :return: None
    """
    ray: Ray = Ray(origin=(0.0, 0.0, 0.5), direction=(0.0, 0.0, 1.0))
    background: NDArray[np.float64] = np.array([1.0, 1.0, 1.0])
    for n_samples in (1, 7, 64):
        out: RayRenderOutput = render_ray(
            field=unit_density, ray=ray, bounds=RenderBounds(t1=0.0, t2=1.0), n_samples=n_samples, background=background
        )
        opacity: float = 1.0 - np.exp(-1.0)
        assert out.opacity == pytest.approx(opacity)
        assert out.weights.sum() + out.background_weight == pytest.approx(1.0)
        np.testing.assert_allclose(out.color, opacity * np.array([0.2, 0.4, 0.6]) + (1.0 - opacity) * background)
        assert 0.0 < out.depth < 1.0
        assert out.visibility == pytest.approx(1.0)


def test_masked_with_full_visibility_equals_full(unit_density: VoxelField) -> None:
    """
    Test that masking is a no-op when every voxel is visible.

    :param unit_density: Fixture providing the field.
    :return: None
    """
    ray: Ray = Ray(origin=(0.3, -0.2, 0.1), direction=(0.0, 0.6, 0.8))
    full: RayRenderOutput = render_ray(field=unit_density, ray=ray, bounds=RenderBounds(t1=0.0, t2=2.0), n_samples=16)
    masked: RayRenderOutput = render_ray(
        field=unit_density, ray=ray, bounds=RenderBounds(t1=0.0, t2=2.0, masked=True), n_samples=16
    )
    np.testing.assert_allclose(masked.color, full.color)


def test_crop_at_t1_equals_full(random_field: VoxelField) -> None:
    """
    Test that a crop starting at t1 does not change the render.

    :param random_field: Fixture providing the field.
    :return: None
    """
    ray: Ray = Ray(origin=(0.5, 0.5, 2.9), direction=(0.0, 0.0, -1.0))
    full: RayRenderOutput = render_ray(field=random_field, ray=ray, bounds=RenderBounds(t1=0.0, t2=2.5), n_samples=32)
    crop: RayRenderOutput = render_ray(
        field=random_field, ray=ray, bounds=RenderBounds(t1=0.0, t2=2.5, t_g=0.0), n_samples=32
    )
    np.testing.assert_array_equal(crop.color, full.color)


def test_empty_segment_gives_the_background(random_field: VoxelField) -> None:
    """
    A crop start at or beyond t_far renders the background with depth at the segment end.

    :param random_field: Fixture providing the field.
    :return: None
    """
    batch: RenderBatch = render_rays(
        field=random_field, rays=_bundle(), n_samples=8, background=(0.1, 0.2, 0.3), starts=np.full(3, 2.5)
    )

    np.testing.assert_allclose(batch.color, np.tile([0.1, 0.2, 0.3], (3, 1)))
    np.testing.assert_array_equal(batch.opacity, np.zeros(3))
    np.testing.assert_array_equal(batch.depth, np.full(3, 2.5))


def test_zero_samples_raise(random_field: VoxelField) -> None:
    """
    Test that at least one sample is required.

    :param random_field: Fixture providing the field.
    :return: None
    """
    with pytest.raises(InputError):
        render_rays(field=random_field, rays=_bundle(), n_samples=0)


# endregion


# region Gradients
@pytest.mark.parametrize("masked, jitter", [(False, False), (True, False), (False, True), (True, True)])
def test_backward_matches_finite_differences(random_field: VoxelField, masked: bool, jitter: bool) -> None:
    """
    The sparse gradient agrees with central differences of the render for every raw parameter.

    :param random_field: Fixture providing the field.
    :param masked: Gate the weights by visibility.
    :param jitter: Jittered sampling.
    :return: None
    """
    rays: RayBundle = _bundle()
    rng: np.random.Generator = np.random.default_rng(9)
    up_color: NDArray[np.float64] = rng.normal(size=(3, 3))
    up_vis: NDArray[np.float64] = rng.normal(size=3)
    options: dict = {"n_samples": 12, "jitter": jitter, "rng_seed": 4, "background": (0.3, 0.5, 0.7), "masked": masked}
    forward: RenderBatch = render_rays(field=random_field, rays=rays, **options)
    batch, grad = render_rays_backward(
        field=random_field, rays=rays, upstream_color=up_color, upstream_visibility=up_vis, **options
    )
    analytic: NDArray[np.float64] = grad.to_dense(random_field.n_voxels)
    flat: NDArray[np.float64] = random_field.flat_params
    step: float = 1e-6

    np.testing.assert_array_equal(batch.color, forward.color)
    assert np.all(np.diff(grad.voxel_ids) > 0)
    for voxel in range(random_field.n_voxels):
        for channel in range(5):
            flat[voxel, channel] += step
            plus: float = _objective(render_rays(field=random_field, rays=rays, **options), up_color, up_vis)
            flat[voxel, channel] -= 2 * step
            minus: float = _objective(render_rays(field=random_field, rays=rays, **options), up_color, up_vis)
            flat[voxel, channel] += step
            numeric: float = (plus - minus) / (2 * step)
            assert analytic[voxel, channel] == pytest.approx(numeric, rel=1e-4, abs=1e-7)


def test_single_ray_backward_matches_the_bundle(random_field: VoxelField) -> None:
    """
    Test that the single-ray gradient equals the bundle gradient of that ray.

    :param random_field: Fixture providing the field.
    :return: None
    """
    ray: Ray = Ray(origin=(0.2, 0.3, 2.9), direction=(0.0, 0.0, -1.0))
    up: NDArray[np.float64] = np.array([0.5, -1.0, 2.0])
    single: SparseGrad = render_ray_backward(
        field=random_field, ray=ray, bounds=RenderBounds(t1=0.0, t2=2.5), n_samples=8, rng_seed=0, upstream_grad=up
    )
    bundle: RayBundle = RayBundle.from_rays([Ray(origin=(0.2, 0.3, 2.9), direction=(0.0, 0.0, -1.0), t_far=2.5)])
    _, grad = render_rays_backward(field=random_field, rays=bundle, n_samples=8, upstream_color=up[None, :])

    np.testing.assert_array_equal(single.voxel_ids, grad.voxel_ids)
    np.testing.assert_allclose(single.values, grad.values)


def test_sparse_grad_reduce_and_merge() -> None:
    """
    Repeated ids are summed, merged gradients stay sorted.

    :return: None
    """
    a: SparseGrad = SparseGrad.reduce(voxel_ids=np.array([3, 1, 3]), values=np.array([[1.0] * 5, [2.0] * 5, [4.0] * 5]))
    b: SparseGrad = SparseGrad(voxel_ids=np.array([0, 3]), values=np.ones((2, 5)))
    merged: SparseGrad = SparseGrad.merge([a, b])

    np.testing.assert_array_equal(a.voxel_ids, [1, 3])
    np.testing.assert_array_equal(a.values[:, 0], [2.0, 5.0])
    np.testing.assert_array_equal(merged.voxel_ids, [0, 1, 3])
    np.testing.assert_array_equal(merged.to_dense(5)[:, 0], [1.0, 2.0, 0.0, 6.0, 0.0])
    assert SparseGrad.merge([]).norm() == 0.0
    assert SparseGrad.empty().to_dense(2).shape == (2, 5)


# endregion


# region Bundles and images
def test_chunking_and_threads_do_not_change_the_result(random_field: VoxelField) -> None:
    """
    Test that results do not depend on the chunk size or the worker count.

    :param random_field: Fixture providing the field.
    :return: None
    """
    one: RenderBatch = render_rays(field=random_field, rays=_bundle(), n_samples=16, jitter=True, rng_seed=3)
    many: RenderBatch = render_rays(
        field=random_field, rays=_bundle(), n_samples=16, jitter=True, rng_seed=3, threads=3, chunk_size=1
    )
    np.testing.assert_allclose(many.color, one.color, rtol=1e-12)
    np.testing.assert_allclose(many.t, one.t, rtol=1e-12)


def test_clip_rays_to_field() -> None:
    """
    Rays are clipped to the box, rays missing it get an empty segment.

    :return: None
    """
    field: VoxelField = field_new(lower=np.zeros(3), upper=np.ones(3), resolution=(2, 2, 2))
    rays: RayBundle = RayBundle(
        origins=np.array([[-1.0, 0.5, 0.5], [0.5, 0.5, 0.5], [-1.0, 5.0, 0.5]]),
        directions=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
        t_near=np.zeros(3),
        t_far=np.full(3, 100.0),
    )
    clipped: RayBundle = clip_rays_to_field(field=field, rays=rays)

    np.testing.assert_allclose(clipped.t_near[:2], [1.0, 0.0])
    np.testing.assert_allclose(clipped.t_far[:2], [2.0, 0.5])
    assert np.isfinite(clipped.t_near[2])
    assert clipped.t_far[2] == clipped.t_near[2]


def test_render_image_modes(forest: VoxelField, nadir_camera: Camera) -> None:
    """
    Full mode sees the canopy, crop mode the ground below it and masked mode the background.

    :param forest: Fixture providing the field.
    :param nadir_camera: Fixture providing the camera.
    :return: None
    """
    dtm: Dtm = Dtm(origin=(-3.0, -3.0), cell_size=1.0, heights=np.zeros((7, 7)))
    background: tuple[float, float, float] = (0.5, 0.5, 0.5)
    full: NDArray[np.float64] = render_image(
        field=forest, camera=nadir_camera, policy=RenderPolicy(), n_samples=64, background=background
    )
    crop: NDArray[np.float64] = render_image(
        field=forest, camera=nadir_camera, policy=RenderPolicy(dtm=dtm), n_samples=64, background=background
    )
    masked: NDArray[np.float64] = render_image(
        field=forest, camera=nadir_camera, policy=RenderPolicy(masked=True), n_samples=64, background=background
    )

    assert full.shape == (8, 8, 3)
    np.testing.assert_allclose(full, np.broadcast_to(_CANOPY, full.shape), atol=1e-3)
    np.testing.assert_allclose(crop, np.broadcast_to(_GROUND, crop.shape), atol=1e-3)
    np.testing.assert_allclose(masked, np.broadcast_to(background, masked.shape), atol=1e-3)


def test_crop_recovers_the_ground_under_a_dense_canopy() -> None:
    """
    Under a 90 % opaque canopy layer, crop renders of held-out views score at least 0.1 higher M-SSIM
    against the canopy-free images than full renders.

    :return: None
    """
    scene: AnalyticScene = AnalyticScene(
        dtm=Dtm(origin=(-6.0, -6.0), cell_size=1.0, heights=np.zeros((13, 13))),
        texture=GroundTexture(
            origin=(-6.0, -6.0), cell=1.0, values=np.random.default_rng(4).random((14, 14)), color=(0.4, 0.3, 0.2)
        ),
        canopy=(CanopyBlob(center=(0.0, 0.0, 4.0), radii=(20.0, 20.0, 0.5), albedo=(0.1, 0.5, 0.1), opacity=0.9),),
    )
    capture: CaptureConfig = CaptureConfig(
        n_x=3, n_y=3, spacing=1.0, altitude=10.0, width=32, height=32, gsd_target=0.25, holdout_views=4
    )
    heldout: Views | None = generate_capture(scene=scene, cfg=capture).heldout
    field: VoxelField = scene_to_field(
        scene=scene, config=FieldConfig(resolution=(48, 48, 16), bounds=(-6.0, -6.0, -1.0, 6.0, 6.0, 7.0))
    )
    assert heldout is not None and heldout.ground is not None
    scores: dict[str, list[float]] = {"full": [], "crop": []}
    for camera, truth in zip(heldout.cameras, heldout.ground):
        for policy in (RenderPolicy(), RenderPolicy(dtm=scene.dtm, margin=0.3)):
            image: NDArray[np.float64] = render_image(field=field, camera=camera, policy=policy, n_samples=128)
            scores[policy.mode].append(msssim(image, truth))
    full: float = float(np.mean(scores["full"]))
    crop: float = float(np.mean(scores["crop"]))

    assert len(scores["crop"]) == 4
    assert crop - full >= 0.10


# endregion
