"""
Ray marching renderer for the voxel field.

Three integration modes are supported: full (the whole ray inside [t1, t2]), crop (sampling
starts at the ray's ground entry t_g) and masked (every sample weight is additionally gated
by the field's visibility channel, the removed mass is composited as background).
Crop and masked may be combined; that combination is experimental.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.exceptions import InputError
from canopeel.misc.parallel import run_chunks
from canopeel.services.field import PointQuery, VoxelField, query_points, sigmoid
from canopeel.services.geometry import Camera, Dtm, Ray, RayBundle, camera_rays, ground_entries

__all__: tuple[str, ...] = (
    "CHUNK_RAYS",
    "Composite",
    "RayRenderOutput",
    "RenderBatch",
    "RenderBounds",
    "RenderPolicy",
    "SparseGrad",
    "clip_rays_to_field",
    "composite",
    "render_image",
    "render_ray",
    "render_ray_backward",
    "render_rays",
    "render_rays_backward",
    "sample_positions",
)

CHUNK_RAYS: int = 512


# region Types
@dataclass(frozen=True)
class RenderBounds:
    """
    Integration bounds of one ray.

    :param t1: Near bound in meters.
    :param t2: Far bound in meters.
    :param t_g: Ground entry, sampling starts here in crop mode.
    :param masked: Gate the sample weights by visibility.
    """

    t1: float
    t2: float
    t_g: float | None = None
    masked: bool = False

    def __post_init__(self) -> None:
        if not self.t1 < self.t2:
            raise InputError(f"Degenerate render bounds: t1={self.t1} must be below t2={self.t2}")
        if self.t_g is not None and not self.t1 <= self.t_g < self.t2:
            raise InputError(f"Crop start t_g={self.t_g} must lie in [{self.t1}, {self.t2})")

    @property
    def mode(self) -> str:
        """
        Returns the mode name: full, crop, masked or crop+masked.

        :return: Mode name.
        """
        if self.t_g is not None:
            return "crop+masked" if self.masked else "crop"
        return "masked" if self.masked else "full"

    @property
    def start(self) -> float:
        """
        Returns the start of the sampled segment.

        :return: t_g in crop mode, t1 otherwise.
        """
        return self.t1 if self.t_g is None else self.t_g


class RayRenderOutput(NamedTuple):
    """
    Result of rendering one ray.

    :param color: Linear RGB.
    :param weights: Per-sample compositing weights.
    :param background_weight: Weight of the background color.
    :param opacity: One minus the final transmittance.
    :param depth: Weight-averaged sample distance, the segment end when nothing is hit.
    :param visibility: Rendered visibility, sum of w_i * v_i plus the final transmittance.
    :param t: Sample distances.
    """

    color: NDArray[np.float64]
    weights: NDArray[np.float64]
    background_weight: float
    opacity: float
    depth: float
    visibility: float
    t: NDArray[np.float64]


class RenderBatch(NamedTuple):
    """Per-ray render outputs stacked over a bundle, fields as in RayRenderOutput."""

    color: NDArray[np.float64]
    weights: NDArray[np.float64]
    background_weight: NDArray[np.float64]
    opacity: NDArray[np.float64]
    depth: NDArray[np.float64]
    visibility: NDArray[np.float64]
    t: NDArray[np.float64]

    def ray(self, index: int) -> RayRenderOutput:
        """
        Returns the output of a single ray.

        :param index: Ray index.
        :return: RayRenderOutput.
        """
        return RayRenderOutput(
            color=self.color[index],
            weights=self.weights[index],
            background_weight=float(self.background_weight[index]),
            opacity=float(self.opacity[index]),
            depth=float(self.depth[index]),
            visibility=float(self.visibility[index]),
            t=self.t[index],
        )

    @classmethod
    def concatenate(cls, parts: list["RenderBatch"]) -> "RenderBatch":
        """
        Joins chunk results in order.

        :param parts: Chunk results.
        :return: RenderBatch.
        """
        return cls(*[np.concatenate([getattr(p, name) for p in parts]) for name in cls._fields])


class SparseGrad(NamedTuple):
    """
    Gradient with respect to the raw parameters of the touched voxels.

    :param voxel_ids: Sorted unique flat voxel ids.
    :param values: Gradients of shape (len(voxel_ids), 5).
    """

    voxel_ids: NDArray[np.int64]
    values: NDArray[np.float64]

    @classmethod
    def empty(cls) -> "SparseGrad":
        """
        Returns a gradient touching no voxel.

        :return: SparseGrad.
        """
        return cls(voxel_ids=np.zeros(0, dtype=np.int64), values=np.zeros((0, 5)))

    @classmethod
    def reduce(cls, voxel_ids: NDArray[np.int64], values: NDArray[np.float64]) -> "SparseGrad":
        """
        Sums the entries per voxel, in the order they are given.

        :param voxel_ids: Flat ids, repeats allowed.
        :param values: Entries of shape (len(voxel_ids), 5).
        :return: SparseGrad.
        """
        if len(voxel_ids) == 0:
            return cls.empty()
        unique, inverse = np.unique(voxel_ids, return_inverse=True)
        summed: NDArray[np.float64] = np.stack(
            [np.bincount(inverse, weights=values[:, ch], minlength=len(unique)) for ch in range(values.shape[1])],
            axis=1,
        )
        return cls(voxel_ids=unique.astype(np.int64), values=summed)

    @classmethod
    def merge(cls, parts: list["SparseGrad"]) -> "SparseGrad":
        """
        Sums gradients, the summation order follows the order of parts.

        :param parts: Gradients.
        :return: SparseGrad.
        """
        if not parts:
            return cls.empty()
        return cls.reduce(
            voxel_ids=np.concatenate([p.voxel_ids for p in parts]),
            values=np.concatenate([p.values for p in parts]),
        )

    def to_dense(self, n_voxels: int) -> NDArray[np.float64]:
        """
        Returns the gradient as a (n_voxels, 5) array.

        :param n_voxels: Voxel count of the field.
        :return: Dense gradient.
        """
        dense: NDArray[np.float64] = np.zeros((n_voxels, 5))
        dense[self.voxel_ids] = self.values
        return dense

    def norm(self) -> float:
        """
        Returns the Euclidean norm over all entries.

        :return: Norm.
        """
        return float(np.linalg.norm(self.values))


class RenderPolicy(NamedTuple):
    """
    How an image is integrated.

    :param dtm: Terrain for crop mode, None integrates the whole ray.
    :param margin: Height above the terrain where crop sampling starts.
    :param masked: Gate the weights by visibility.
    """

    dtm: Dtm | None = None
    margin: float = 0.3
    masked: bool = False

    @property
    def mode(self) -> str:
        """
        Returns the mode name: full, crop, masked or crop+masked.

        :return: Mode name.
        """
        if self.dtm is not None:
            return "crop+masked" if self.masked else "crop"
        return "masked" if self.masked else "full"


class Composite(NamedTuple):
    """
    Front-to-back compositing result.

    :param color: Colors of shape (N, 3).
    :param weights: Weights w_i of shape (N, S).
    :param transmittance: Transmittance in front of every sample, shape (N, S).
    :param background_weight: Background weight per ray.
    :param final_transmittance: Transmittance behind the last sample.
    """

    color: NDArray[np.float64]
    weights: NDArray[np.float64]
    transmittance: NDArray[np.float64]
    background_weight: NDArray[np.float64]
    final_transmittance: NDArray[np.float64]


# endregion


# region Quadrature
def sample_positions(
    start: NDArray[np.float64], end: NDArray[np.float64], jitter: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Places one sample in each of S equal bins of [start, end].

    Sample i stands for the interval between the midpoints to its neighbours, the first and last
    intervals reach start and end, so the intervals cover the segment. Segments with end <= start
    get zero-length intervals.

    :param start: Segment starts (N,).
    :param end: Segment ends (N,).
    :param jitter: Position inside each bin in [0, 1), shape (N, S); 0.5 gives the bin midpoints.
    :return: Sample distances t and interval lengths delta, both (N, S).
    """
    n_samples: int = jitter.shape[1]
    stop: NDArray[np.float64] = np.maximum(end, start)
    width: NDArray[np.float64] = (stop - start) / n_samples
    t: NDArray[np.float64] = start[:, None] + (np.arange(n_samples)[None, :] + jitter) * width[:, None]
    edges: NDArray[np.float64] = np.concatenate(
        [start[:, None], 0.5 * (t[:, 1:] + t[:, :-1]), stop[:, None]], axis=1
    )
    return t, np.diff(edges, axis=1)


def composite(
    alpha: NDArray[np.float64],
    colors: NDArray[np.float64],
    background: NDArray[np.float64],
    gate: NDArray[np.float64] | None = None,
) -> Composite:
    """
    Alpha-composites samples front to back.

    w_i = alpha_i * prod_{j<i} (1 - alpha_j). With a gate, the contribution of sample i is
    w_i * gate_i and the removed mass w_i * (1 - gate_i) goes to the background.

    :param alpha: Sample opacities (N, S).
    :param colors: Sample colors (N, S, 3).
    :param background: Background color.
    :param gate: Optional per-sample gate in [0, 1].
    :return: Composite.
    """
    alpha = np.atleast_2d(alpha)
    survive: NDArray[np.float64] = np.cumprod(1.0 - alpha, axis=1)
    transmittance: NDArray[np.float64] = np.concatenate([np.ones((alpha.shape[0], 1)), survive[:, :-1]], axis=1)
    weights: NDArray[np.float64] = transmittance * alpha
    final: NDArray[np.float64] = survive[:, -1] if alpha.shape[1] else np.ones(alpha.shape[0])
    effective: NDArray[np.float64] = weights if gate is None else weights * gate
    background_weight: NDArray[np.float64] = final if gate is None else final + np.sum(weights - effective, axis=1)
    color: NDArray[np.float64] = (
        np.einsum("ns,nsc->nc", effective, colors) + background_weight[:, None] * np.asarray(background)[None, :]
    )
    return Composite(
        color=color,
        weights=weights,
        transmittance=transmittance,
        background_weight=background_weight,
        final_transmittance=final,
    )


def _march(
    field: VoxelField,
    rays: RayBundle,
    start: NDArray[np.float64],
    jitter: NDArray[np.float64],
    background: NDArray[np.float64],
    masked: bool,
    upstream_color: NDArray[np.float64] | None,
    upstream_visibility: NDArray[np.float64] | None,
) -> tuple[RenderBatch, SparseGrad | None]:
    """
    Renders a chunk of rays and, when upstream gradients are given, back-propagates them.

    :param field: Field.
    :param rays: Rays of the chunk.
    :param start: Segment starts.
    :param jitter: Bin offsets (N, S).
    :param background: Background color.
    :param masked: Gate weights by visibility.
    :param upstream_color: dLoss/dColor per ray (N, 3), None skips the backward pass.
    :param upstream_visibility: dLoss/dVisibility per ray (N,).
    :return: RenderBatch and the gradient (None without upstream gradients).
    """
    count, n_samples = jitter.shape
    t, delta = sample_positions(start=start, end=rays.t_far, jitter=jitter)
    points: NDArray[np.float64] = rays.origins[:, None, :] + t[..., None] * rays.directions[:, None, :]
    query: PointQuery = query_points(field=field, points=points.reshape(-1, 3))
    sigma: NDArray[np.float64] = query.sigma.reshape(count, n_samples)
    color: NDArray[np.float64] = query.color.reshape(count, n_samples, 3)
    vis: NDArray[np.float64] = query.visibility.reshape(count, n_samples)
    tau: NDArray[np.float64] = sigma * delta
    alpha: NDArray[np.float64] = -np.expm1(-tau)
    comp: Composite = composite(alpha=alpha, colors=color, background=background, gate=vis if masked else None)
    total: NDArray[np.float64] = np.sum(comp.weights, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth: NDArray[np.float64] = np.where(
            total > 0, np.sum(comp.weights * t, axis=1) / total, np.maximum(rays.t_far, start)
        )
    batch: RenderBatch = RenderBatch(
        color=comp.color,
        weights=comp.weights,
        background_weight=comp.background_weight,
        opacity=1.0 - comp.final_transmittance,
        depth=depth,
        visibility=np.sum(comp.weights * vis, axis=1) + comp.final_transmittance,
        t=t,
    )
    if upstream_color is None:
        return batch, None

    g_v: NDArray[np.float64] = np.zeros(count) if upstream_visibility is None else upstream_visibility
    shade: NDArray[np.float64] = np.einsum("nsc,nc->ns", color - background, upstream_color)
    gate: NDArray[np.float64] = vis if masked else np.ones_like(vis)
    # Color = bg + sum w_i * gate_i * (c_i - bg), visibility = 1 + sum w_i * (v_i - 1)
    per_weight: NDArray[np.float64] = gate * shade + g_v[:, None] * (vis - 1.0)
    weighted: NDArray[np.float64] = comp.weights * per_weight
    behind: NDArray[np.float64] = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1] - weighted
    d_tau: NDArray[np.float64] = comp.transmittance * (1.0 - alpha) * per_weight - behind
    d_sigma: NDArray[np.float64] = d_tau * delta
    d_color: NDArray[np.float64] = (comp.weights * gate)[..., None] * upstream_color[:, None, :]
    d_vis: NDArray[np.float64] = comp.weights * g_v[:, None]
    if masked:
        d_vis = d_vis + comp.weights * shade

    raw: NDArray[np.float64] = query.raw.reshape(count, n_samples, 5)
    squashed: NDArray[np.float64] = sigmoid(raw[..., 1:])
    d_raw: NDArray[np.float64] = np.concatenate(
        [
            (d_sigma * sigmoid(raw[..., 0]))[..., None],
            d_color * squashed[..., :3] * (1.0 - squashed[..., :3]),
            (d_vis * squashed[..., 3] * (1.0 - squashed[..., 3]))[..., None],
        ],
        axis=2,
    ).reshape(-1, 5)
    keep: NDArray[np.bool_] = query.weights > 0
    contributions: NDArray[np.float64] = query.weights[:, :, None] * d_raw[:, None, :]
    return batch, SparseGrad.reduce(voxel_ids=query.voxel_ids[keep], values=contributions[keep])


def _jitter(count: int, n_samples: int, jitter: bool, rng_seed: int) -> NDArray[np.float64]:
    """
    Returns the bin offsets of a whole bundle, drawn before chunking so chunking never changes them.

    :param count: Ray count.
    :param n_samples: Samples per ray.
    :param jitter: Draw uniform offsets, else use bin midpoints.
    :param rng_seed: Seed.
    :return: Offsets (count, n_samples).
    """
    if n_samples < 1:
        raise InputError(f"n_samples must be at least 1, got {n_samples}")
    if not jitter:
        return np.full((count, n_samples), 0.5)
    return np.random.default_rng(rng_seed).random((count, n_samples))


def _render(
    field: VoxelField,
    rays: RayBundle,
    n_samples: int,
    jitter: bool,
    rng_seed: int,
    background: tuple[float, float, float] | NDArray[np.float64],
    masked: bool,
    starts: NDArray[np.float64] | None,
    upstream_color: NDArray[np.float64] | None,
    upstream_visibility: NDArray[np.float64] | None,
    threads: int,
    chunk_size: int,
) -> tuple[RenderBatch, SparseGrad | None]:
    offsets: NDArray[np.float64] = _jitter(count=len(rays), n_samples=n_samples, jitter=jitter, rng_seed=rng_seed)
    begin: NDArray[np.float64] = rays.t_near if starts is None else np.maximum(np.asarray(starts), rays.t_near)
    bg: NDArray[np.float64] = np.asarray(background, dtype=np.float64).reshape(3)

    def chunk(lo: int, hi: int) -> tuple[RenderBatch, SparseGrad | None]:
        return _march(
            field=field,
            rays=rays.subset(slice(lo, hi)),
            start=begin[lo:hi],
            jitter=offsets[lo:hi],
            background=bg,
            masked=masked,
            upstream_color=None if upstream_color is None else upstream_color[lo:hi],
            upstream_visibility=None if upstream_visibility is None else upstream_visibility[lo:hi],
        )

    if len(rays) == 0:
        empty: NDArray[np.float64] = np.zeros((0, n_samples))
        return (
            RenderBatch(np.zeros((0, 3)), empty, np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), empty),
            None if upstream_color is None else SparseGrad.empty(),
        )
    results: list[tuple[RenderBatch, SparseGrad | None]] = run_chunks(
        func=chunk, total=len(rays), chunk_size=chunk_size, threads=threads
    )
    batch: RenderBatch = RenderBatch.concatenate([r[0] for r in results])
    if upstream_color is None:
        return batch, None
    return batch, SparseGrad.merge([r[1] for r in results if r[1] is not None])


# endregion


# region Operations
def render_rays(
    field: VoxelField,
    rays: RayBundle,
    n_samples: int,
    jitter: bool = False,
    rng_seed: int = 0,
    background: tuple[float, float, float] | NDArray[np.float64] = (0.0, 0.0, 0.0),
    masked: bool = False,
    starts: NDArray[np.float64] | None = None,
    threads: int = 1,
    chunk_size: int = CHUNK_RAYS,
) -> RenderBatch:
    """
    Renders a bundle, every ray integrated over [max(t_near, start), t_far].

    :param field: Field.
    :param rays: Rays with their bounds.
    :param n_samples: Samples per ray.
    :param jitter: Stratified jittered sampling, else bin midpoints.
    :param rng_seed: Seed of the jitter.
    :param background: Background color.
    :param masked: Gate weights by visibility.
    :param starts: Crop starts per ray, starts at or beyond t_far give the background.
    :param threads: Worker count.
    :param chunk_size: Rays per chunk, results do not depend on threads for a fixed chunk size.
    :return: RenderBatch.
    :raises InputError: if n_samples is below 1.
    """
    batch, _ = _render(
        field=field,
        rays=rays,
        n_samples=n_samples,
        jitter=jitter,
        rng_seed=rng_seed,
        background=background,
        masked=masked,
        starts=starts,
        upstream_color=None,
        upstream_visibility=None,
        threads=threads,
        chunk_size=chunk_size,
    )
    return batch


def render_rays_backward(
    field: VoxelField,
    rays: RayBundle,
    n_samples: int,
    upstream_color: NDArray[np.float64],
    upstream_visibility: NDArray[np.float64] | None = None,
    jitter: bool = False,
    rng_seed: int = 0,
    background: tuple[float, float, float] | NDArray[np.float64] = (0.0, 0.0, 0.0),
    masked: bool = False,
    starts: NDArray[np.float64] | None = None,
    threads: int = 1,
    chunk_size: int = CHUNK_RAYS,
) -> tuple[RenderBatch, SparseGrad]:
    """
    Renders a bundle and returns the gradient of sum(upstream_color * color + upstream_visibility * visibility)
    with respect to the raw field parameters.

    The sampling arguments must match the forward pass the upstream gradients came from.

    :param field: Field.
    :param rays: Rays with their bounds.
    :param n_samples: Samples per ray.
    :param upstream_color: dLoss/dColor per ray (N, 3).
    :param upstream_visibility: dLoss/dVisibility per ray (N,).
    :param jitter: Stratified jittered sampling, else bin midpoints.
    :param rng_seed: Seed of the jitter.
    :param background: Background color.
    :param masked: Gate weights by visibility.
    :param starts: Crop starts per ray.
    :param threads: Worker count.
    :param chunk_size: Rays per chunk.
    :return: Forward outputs and the sparse gradient.
    """
    batch, grad = _render(
        field=field,
        rays=rays,
        n_samples=n_samples,
        jitter=jitter,
        rng_seed=rng_seed,
        background=background,
        masked=masked,
        starts=starts,
        upstream_color=np.asarray(upstream_color, dtype=np.float64).reshape(-1, 3),
        upstream_visibility=None if upstream_visibility is None else np.asarray(upstream_visibility, dtype=np.float64),
        threads=threads,
        chunk_size=chunk_size,
    )
    return batch, grad if grad is not None else SparseGrad.empty()


def _single(ray: Ray, bounds: RenderBounds) -> RayBundle:
    return RayBundle(
        origins=ray.origin.reshape(1, 3),
        directions=ray.direction.reshape(1, 3),
        t_near=np.array([bounds.t1]),
        t_far=np.array([bounds.t2]),
    )


def render_ray(
    field: VoxelField,
    ray: Ray,
    bounds: RenderBounds,
    n_samples: int,
    jitter: bool = False,
    rng_seed: int = 0,
    background: tuple[float, float, float] | NDArray[np.float64] = (0.0, 0.0, 0.0),
) -> RayRenderOutput:
    """
    Renders one ray over the given bounds.

    :param field: Field.
    :param ray: Ray, its own t_near and t_far are ignored in favour of bounds.
    :param bounds: Integration bounds and mode.
    :param n_samples: Samples per ray.
    :param jitter: Stratified jittered sampling, else bin midpoints.
    :param rng_seed: Seed of the jitter.
    :param background: Background color.
    :return: RayRenderOutput.
    """
    batch: RenderBatch = render_rays(
        field=field,
        rays=_single(ray=ray, bounds=bounds),
        n_samples=n_samples,
        jitter=jitter,
        rng_seed=rng_seed,
        background=background,
        masked=bounds.masked,
        starts=np.array([bounds.start]),
    )
    return batch.ray(0)


def render_ray_backward(
    field: VoxelField,
    ray: Ray,
    bounds: RenderBounds,
    n_samples: int,
    rng_seed: int,
    upstream_grad: NDArray[np.float64],
    jitter: bool = False,
    background: tuple[float, float, float] | NDArray[np.float64] = (0.0, 0.0, 0.0),
) -> SparseGrad:
    """
    Returns the gradient of dot(upstream_grad, color) with respect to every touched raw parameter.

    :param field: Field.
    :param ray: Ray.
    :param bounds: Integration bounds and mode, as in the forward pass.
    :param n_samples: Samples per ray.
    :param rng_seed: Seed of the jitter.
    :param upstream_grad: dLoss/dColor.
    :param jitter: Stratified jittered sampling, else bin midpoints.
    :param background: Background color.
    :return: SparseGrad.
    """
    _, grad = render_rays_backward(
        field=field,
        rays=_single(ray=ray, bounds=bounds),
        n_samples=n_samples,
        upstream_color=np.asarray(upstream_grad, dtype=np.float64).reshape(1, 3),
        jitter=jitter,
        rng_seed=rng_seed,
        background=background,
        masked=bounds.masked,
        starts=np.array([bounds.start]),
    )
    return grad


def clip_rays_to_field(field: VoxelField, rays: RayBundle) -> RayBundle:
    """
    Shrinks every ray's [t_near, t_far] to the part inside the field box.

    Rays missing the box get t_far == t_near and render as background.

    :param field: Field.
    :param rays: Rays.
    :return: RayBundle.
    """
    o: NDArray[np.float64] = rays.origins
    d: NDArray[np.float64] = rays.directions
    inside: NDArray[np.bool_] = (o >= field.lower) & (o <= field.upper)
    with np.errstate(divide="ignore", invalid="ignore"):
        a: NDArray[np.float64] = (field.lower - o) / d
        b: NDArray[np.float64] = (field.upper - o) / d
    parallel: NDArray[np.bool_] = d == 0
    near: NDArray[np.float64] = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(a, b))
    far: NDArray[np.float64] = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(a, b))
    # Clamping to t_far keeps the segments of missing rays finite
    t_near: NDArray[np.float64] = np.minimum(np.maximum(rays.t_near, near.max(axis=1)), rays.t_far)
    t_far: NDArray[np.float64] = np.maximum(np.minimum(rays.t_far, far.min(axis=1)), t_near)
    return RayBundle(origins=o, directions=d, t_near=t_near, t_far=t_far)


def render_image(
    field: VoxelField,
    camera: Camera,
    policy: RenderPolicy,
    n_samples: int,
    background: tuple[float, float, float] | NDArray[np.float64] = (0.5, 0.5, 0.5),
    threads: int = 1,
) -> NDArray[np.float64]:
    """
    Renders every pixel of a camera with midpoint sampling.

    :param field: Field.
    :param camera: Camera.
    :param policy: Integration mode.
    :param n_samples: Samples per ray.
    :param background: Background color.
    :param threads: Worker count.
    :return: Linear image of shape (height, width, 3).
    """
    if policy.mode == "crop+masked":
        logger.warning("Combined crop and masked rendering is experimental")
    rays: RayBundle = camera_rays(camera=camera)
    starts: NDArray[np.float64] | None = None
    if policy.dtm is not None:
        starts = ground_entries(rays=rays, dtm=policy.dtm, margin=policy.margin)
    clipped: RayBundle = clip_rays_to_field(field=field, rays=rays)
    batch: RenderBatch = render_rays(
        field=field,
        rays=clipped,
        n_samples=n_samples,
        background=background,
        masked=policy.masked,
        starts=starts,
        threads=threads,
    )
    logger.debug(f"Rendered {camera.width}x{camera.height} image in {policy.mode} mode")
    return batch.color.reshape(camera.height, camera.width, 3)


# endregion
