"""
Density-based hierarchical clustering of point clouds.

Core distances at min_samples, a minimum spanning tree over the mutual reachability
distances, a condensed cluster tree and excess-of-mass selection. Edges of equal length
merge their components in one step, so the result only depends on the input order through
the Prim tie-break (lower index wins).
"""

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from canopeel.config import logger
from canopeel.misc.exceptions import InputError

__all__: tuple[str, ...] = (
    "NOISE",
    "CondensedTree",
    "condense",
    "core_distances",
    "hdbscan_cluster",
    "mutual_reachability_mst",
    "select_clusters",
)

NOISE: int = -1


class CondensedTree(NamedTuple):
    """
    Clusters of the condensed hierarchy.

    :param parent: Parent cluster id per cluster, -1 for the root.
    :param birth: Lambda (inverse distance) at which every cluster appears.
    :param stability: Excess of mass per cluster.
    :param point_cluster: Last cluster every point belonged to.
    """

    parent: NDArray[np.int64]
    birth: NDArray[np.float64]
    stability: NDArray[np.float64]
    point_cluster: NDArray[np.int64]


def _as_points(points: NDArray[np.float64]) -> NDArray[np.float64]:
    data: NDArray[np.float64] = np.asarray(points, dtype=np.float64)
    if data.ndim != 2:
        raise InputError(f"Points must have shape (N, D), got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InputError("Point coordinates must be finite")
    return data


def _distances_to(points: NDArray[np.float64], index: int) -> NDArray[np.float64]:
    diff: NDArray[np.float64] = points - points[index]
    return np.sqrt(np.sum(diff * diff, axis=1))


# region Graph
def core_distances(points: NDArray[np.float64], min_samples: int) -> NDArray[np.float64]:
    """
    Returns the distance of every point to its min_samples-th nearest neighbour, the point itself counted.

    :param points: Points of shape (N, D).
    :param min_samples: Neighbour count, clamped to N.
    :return: Core distances of shape (N,).
    :raises InputError: if min_samples < 1.
    """
    if min_samples < 1:
        raise InputError(f"min_samples must be at least 1, got {min_samples}")
    data: NDArray[np.float64] = _as_points(points)
    n: int = len(data)
    k: int = min(min_samples, n)
    if n == 0:
        return np.zeros(0)
    if k == 1:
        return np.zeros(n)
    _, neighbours = cKDTree(data).query(data, k=k)
    # Same formula as the spanning tree, so equal lengths compare equal.
    diff: NDArray[np.float64] = data[:, None, :] - data[np.asarray(neighbours)]
    return np.max(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)


def mutual_reachability_mst(
    points: NDArray[np.float64], core: NDArray[np.float64]
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    """
    Builds the minimum spanning tree of the mutual reachability graph with Prim's algorithm.

    The distance matrix is never stored, one row is computed per added vertex. The tree
    grows from point 0 and the lowest index wins among equally close candidates.

    :param points: Points of shape (N, D).
    :param core: Core distances of shape (N,).
    :return: Edge endpoints (a, b) and weights, in the order the edges were added.
    """
    data: NDArray[np.float64] = _as_points(points)
    n: int = len(data)
    if n < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
    in_tree: NDArray[np.bool_] = np.zeros(n, dtype=bool)
    best: NDArray[np.float64] = np.full(n, np.inf)
    source: NDArray[np.int64] = np.zeros(n, dtype=np.int64)
    a: NDArray[np.int64] = np.zeros(n - 1, dtype=np.int64)
    b: NDArray[np.int64] = np.zeros(n - 1, dtype=np.int64)
    weights: NDArray[np.float64] = np.zeros(n - 1)
    current: int = 0
    for edge in range(n - 1):
        in_tree[current] = True
        reach: NDArray[np.float64] = np.maximum(np.maximum(_distances_to(data, current), core), core[current])
        closer: NDArray[np.bool_] = (reach < best) & ~in_tree
        best[closer] = reach[closer]
        source[closer] = current
        candidates: NDArray[np.float64] = np.where(in_tree, np.inf, best)
        current = int(np.argmin(candidates))
        a[edge], b[edge], weights[edge] = source[current], current, best[current]
    return a, b, weights


# endregion


# region Hierarchy
class _Hierarchy(NamedTuple):
    """Multi-way single linkage tree, leaves are the points and node n + i is the i-th merge."""

    children: list[list[int]]
    distance: NDArray[np.float64]
    size: NDArray[np.int64]
    start: NDArray[np.int64]
    order: NDArray[np.int64]


def _find(parent: NDArray[np.int64], x: int) -> int:
    root: int = x
    while parent[root] != root:
        root = int(parent[root])
    while parent[x] != root:
        parent[x], x = root, int(parent[x])
    return root


def _single_linkage(
    n: int, a: NDArray[np.int64], b: NDArray[np.int64], weights: NDArray[np.float64]
) -> _Hierarchy:
    """Merges components over the sorted edges, all edges of one length form one merge per component."""
    parent: NDArray[np.int64] = np.arange(n, dtype=np.int64)
    node_of: NDArray[np.int64] = np.arange(n, dtype=np.int64)
    children: list[list[int]] = [[] for _ in range(n)]
    distance: list[float] = [0.0] * n
    size: list[int] = [1] * n
    by_length: NDArray[np.int64] = np.argsort(weights, kind="stable")
    i: int = 0
    while i < len(by_length):
        j: int = i
        while j < len(by_length) and weights[by_length[j]] == weights[by_length[i]]:
            j += 1
        group: NDArray[np.int64] = by_length[i:j]
        ends: list[int] = [int(x) for e in group for x in (a[e], b[e])]
        before: list[int] = [int(node_of[_find(parent, x)]) for x in ends]
        for e in group:
            ra, rb = _find(parent, int(a[e])), _find(parent, int(b[e]))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        merged: dict[int, set[int]] = {}
        for x, node in zip(ends, before):
            merged.setdefault(_find(parent, x), set()).add(node)
        for root in sorted(merged):
            kids: list[int] = sorted(merged[root])
            children.append(kids)
            distance.append(float(weights[group[0]]))
            size.append(sum(size[k] for k in kids))
            node_of[root] = len(children) - 1
        i = j
    # Leaf order with every node's points contiguous.
    total: int = len(children)
    start: NDArray[np.int64] = np.zeros(total, dtype=np.int64)
    order: list[int] = []
    stack: list[int] = [total - 1]
    while stack:
        node: int = stack.pop()
        if node < n:
            start[node] = len(order)
            order.append(node)
            continue
        stack.extend(reversed(children[node]))
    # Internal starts are the smallest start of their leaves.
    for node in range(n, total):
        start[node] = min(start[k] for k in children[node])
    return _Hierarchy(
        children=children,
        distance=np.asarray(distance),
        size=np.asarray(size, dtype=np.int64),
        start=start,
        order=np.asarray(order, dtype=np.int64),
    )


def _lambda(distance: float, ceiling: float) -> float:
    return 1.0 / distance if distance > 0.0 else ceiling


def _gain(lam: float, birth: float, count: int) -> float:
    return 0.0 if lam == birth else (lam - birth) * count


def condense(hierarchy: _Hierarchy, min_cluster_size: int) -> CondensedTree:
    """
    Condenses the linkage tree: a merge level only opens new clusters when at least two of
    its parts hold min_cluster_size points, smaller parts fall out of the running cluster.
    Merges at distance 0 take the largest finite lambda of the tree, so stabilities stay finite.

    :param hierarchy: Linkage tree.
    :param min_cluster_size: Smallest cluster.
    :return: CondensedTree, cluster 0 is the root.
    """
    n: int = len(hierarchy.order)
    parent: list[int] = [NOISE]
    birth: list[float] = [0.0]
    stability: list[float] = [0.0]
    point_cluster: NDArray[np.int64] = np.zeros(n, dtype=np.int64)
    merges: NDArray[np.float64] = hierarchy.distance[n:]
    positive: NDArray[np.float64] = merges[merges > 0.0]
    ceiling: float = 1.0 / float(positive.min()) if len(positive) else 0.0

    def fall_out(node: int, cluster: int, lam: float) -> None:
        lo: int = int(hierarchy.start[node])
        members: NDArray[np.int64] = hierarchy.order[lo : lo + int(hierarchy.size[node])]
        point_cluster[members] = cluster
        stability[cluster] += _gain(lam, birth[cluster], len(members))

    stack: list[tuple[int, int]] = [(len(hierarchy.children) - 1, 0)]
    while stack:
        node, cluster = stack.pop()
        if node < n:
            fall_out(node=node, cluster=cluster, lam=birth[cluster])
            continue
        lam: float = _lambda(float(hierarchy.distance[node]), ceiling)
        kids: list[int] = hierarchy.children[node]
        big: list[int] = [k for k in kids if hierarchy.size[k] >= min_cluster_size]
        for k in kids:
            if hierarchy.size[k] < min_cluster_size:
                fall_out(node=k, cluster=cluster, lam=lam)
        if len(big) == 1:
            stack.append((big[0], cluster))
        elif len(big) > 1:
            for k in big:
                stability[cluster] += _gain(lam, birth[cluster], int(hierarchy.size[k]))
                parent.append(cluster)
                birth.append(lam)
                stability.append(0.0)
                stack.append((k, len(parent) - 1))
    return CondensedTree(
        parent=np.asarray(parent, dtype=np.int64),
        birth=np.asarray(birth),
        stability=np.asarray(stability),
        point_cluster=point_cluster,
    )


def select_clusters(tree: CondensedTree) -> NDArray[np.bool_]:
    """
    Excess-of-mass selection, the root is never selected.

    A cluster is kept when its stability is strictly larger than the best total of its
    descendants; otherwise the descendants' selection stands.

    :param tree: Condensed tree.
    :return: Selection flag per cluster.
    """
    count: int = len(tree.parent)
    selected: NDArray[np.bool_] = np.zeros(count, dtype=bool)
    subtree: NDArray[np.float64] = np.zeros(count)
    kids: list[list[int]] = [[] for _ in range(count)]
    for c in range(1, count):
        kids[int(tree.parent[c])].append(c)
    # Children always have larger ids than their parents.
    for c in range(count - 1, 0, -1):
        below: float = float(sum(subtree[k] for k in kids[c]))
        if not kids[c] or tree.stability[c] > below:
            selected[c] = True
            subtree[c] = tree.stability[c]
            stack: list[int] = list(kids[c])
            while stack:
                d: int = stack.pop()
                selected[d] = False
                stack.extend(kids[d])
        else:
            subtree[c] = below
    return selected


def _labels(tree: CondensedTree, selected: NDArray[np.bool_]) -> NDArray[np.int64]:
    count: int = len(tree.parent)
    owner: NDArray[np.int64] = np.full(count, NOISE, dtype=np.int64)
    for c in range(1, count):
        up: int = int(tree.parent[c])
        owner[c] = c if selected[c] else owner[up]
    kept: NDArray[np.int64] = np.flatnonzero(selected)
    relabel: dict[int, int] = {int(c): i for i, c in enumerate(kept)}
    return np.asarray([relabel.get(int(owner[c]), NOISE) for c in tree.point_cluster], dtype=np.int64)


# endregion


def hdbscan_cluster(points: NDArray[np.float64], min_cluster_size: int, min_samples: int) -> NDArray[np.int64]:
    """
    Clusters points with HDBSCAN and excess-of-mass extraction.

    :param points: Points of shape (N, D).
    :param min_cluster_size: Smallest cluster, at least 2.
    :param min_samples: Neighbour count of the core distance, the point itself counted.
    :return: Label per point, clusters numbered from 0 in order of discovery and -1 for noise.
    :raises InputError: if min_cluster_size < 2 or min_samples < 1.
    """
    if min_cluster_size < 2:
        raise InputError(f"min_cluster_size must be at least 2, got {min_cluster_size}")
    data: NDArray[np.float64] = _as_points(points)
    n: int = len(data)
    if n < min_cluster_size:
        logger.debug(f"{n} points is below min_cluster_size {min_cluster_size}, all noise")
        return np.full(n, NOISE, dtype=np.int64)
    core: NDArray[np.float64] = core_distances(points=data, min_samples=min_samples)
    a, b, weights = mutual_reachability_mst(points=data, core=core)
    hierarchy: _Hierarchy = _single_linkage(n=n, a=a, b=b, weights=weights)
    tree: CondensedTree = condense(hierarchy=hierarchy, min_cluster_size=min_cluster_size)
    labels: NDArray[np.int64] = _labels(tree=tree, selected=select_clusters(tree=tree))
    logger.debug(f"HDBSCAN on {n} points: {int(labels.max()) + 1} clusters, {int(np.sum(labels == NOISE))} noise")
    return labels
