"""Feature-space partitioning of score level sets.

Each occupied score bin gets its own partition of feature space, fitted
on the train rows of that bin only and applied to every row.  Three
strategies: a greedy axis-aligned regression tree on squared loss with
a leaf-count cap derived from the region ratio, a single balanced-split
stump, and seeded Lloyd k-means.
"""

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._backend import thread_count
from .binning import BinnedView
from .data import SplitIndex

MIN_SPLIT_GAIN = 1e-12
MIN_SAMPLES_LEAF = 2


@dataclass(frozen=True)
class Tree:
    """Greedy CART partition; leaves capped at n_train_in_bin // region_ratio."""


@dataclass(frozen=True)
class BalancedStump:
    """One split with at least floor(n/2) train samples on each side."""


@dataclass(frozen=True)
class KMeans:
    """Lloyd clustering with k-means++ seeding."""

    k: int = 2
    max_iter: int = 100
    tol: float = 1e-6


def parse_strategy(name: str):
    if name == "tree":
        return Tree()
    if name == "stump":
        return BalancedStump()
    if name == "kmeans":
        return KMeans()
    if name.startswith("kmeans:"):
        return KMeans(k=int(name.split(":", 1)[1]))
    raise ValueError(f"unknown partition strategy: {name!r}")


@dataclass(frozen=True)
class SingleRegion:
    def assign(self, X: np.ndarray) -> np.ndarray:
        return np.zeros(X.shape[0], dtype=np.int64)

    @property
    def n_regions(self) -> int:
        return 1


@dataclass(frozen=True)
class TreeAssigner:
    """Flattened binary tree; feature == -1 marks a leaf node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_region: np.ndarray
    n_regions: int

    def assign(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.int64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if self.feature[node] < 0:
                out[rows] = self.leaf_region[node]
                continue
            mask = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.right[node], rows[~mask]))
            stack.append((self.left[node], rows[mask]))
        return out


@dataclass(frozen=True)
class CenterAssigner:
    centers: np.ndarray

    def assign(self, X: np.ndarray) -> np.ndarray:
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ self.centers.T
            + np.sum(self.centers * self.centers, axis=1)[None, :]
        )
        return np.argmin(d2, axis=1).astype(np.int64)

    @property
    def n_regions(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class PartitionModel:
    strategy: object
    region_ratio: int
    n_bins: int
    assigners: tuple


class _Node:
    __slots__ = ("rows", "feature", "threshold", "left", "right")

    def __init__(self, rows):
        self.rows = rows
        self.feature = -1
        self.threshold = 0.0
        self.left = -1
        self.right = -1


def _grow_tree(X: np.ndarray, y: np.ndarray, max_leaves: int):
    """Best-first CART growth: always take the largest-gain candidate.

    Deterministic tie handling: the split scan keeps the lowest feature
    and threshold, the heap breaks equal gains by node creation order.
    Leaf caps therefore nest, so growing a larger tree only refines a
    smaller one.
    """
    nodes = [_Node(np.arange(X.shape[0], dtype=np.int64))]
    if max_leaves > 1:
        feat, thresh, gain = kernels.best_split(X, y, MIN_SAMPLES_LEAF)
        candidates = []
        if feat >= 0 and gain > MIN_SPLIT_GAIN:
            heapq.heappush(candidates, (-gain, 0, 0, feat, thresh))
        n_leaves = 1
        while n_leaves < max_leaves and candidates:
            _, _, node_id, feat, thresh = heapq.heappop(candidates)
            node = nodes[node_id]
            mask = X[node.rows, feat] <= thresh
            left = _Node(node.rows[mask])
            right = _Node(node.rows[~mask])
            node.feature = feat
            node.threshold = thresh
            node.left = len(nodes)
            nodes.append(left)
            node.right = len(nodes)
            nodes.append(right)
            node.rows = None
            n_leaves += 1
            for child_id in (node.left, node.right):
                child = nodes[child_id]
                f, t, g = kernels.best_split(X[child.rows], y[child.rows], MIN_SAMPLES_LEAF)
                if f >= 0 and g > MIN_SPLIT_GAIN:
                    heapq.heappush(candidates, (-g, child_id, child_id, f, t))
    feature = np.array([n.feature for n in nodes], dtype=np.int64)
    threshold = np.array([n.threshold for n in nodes])
    left = np.array([n.left for n in nodes], dtype=np.int64)
    right = np.array([n.right for n in nodes], dtype=np.int64)
    # preorder leaf numbering keeps region ids contiguous and stable
    leaf_region = np.full(len(nodes), -1, dtype=np.int64)
    stack, next_region = [0], 0
    while stack:
        node = stack.pop()
        if feature[node] < 0:
            leaf_region[node] = next_region
            next_region += 1
        else:
            stack.append(right[node])
            stack.append(left[node])
    return TreeAssigner(feature, threshold, left, right, leaf_region, next_region)


def _fit_stump(X: np.ndarray, y: np.ndarray):
    """Best single split with both sides >= floor(n/2) samples."""
    n = y.shape[0]
    if n < 2:
        return SingleRegion()
    half = n // 2
    left_counts = (half,) if n % 2 == 0 else (half, half + 1)
    best = None
    total = float(y.sum())
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        for l in left_counts:
            if xs[l - 1] == xs[l]:
                continue
            lsum = float(ys[:l].sum())
            rsum = total - lsum
            gain = lsum * lsum / l + rsum * rsum / (n - l)
            if best is None or gain > best[0]:
                best = (gain, f, 0.5 * (xs[l - 1] + xs[l]))
    if best is None:
        return SingleRegion()
    _, f, thresh = best
    feature = np.array([f, -1, -1], dtype=np.int64)
    threshold = np.array([thresh, 0.0, 0.0])
    left = np.array([1, -1, -1], dtype=np.int64)
    right = np.array([2, -1, -1], dtype=np.int64)
    leaf_region = np.array([-1, 0, 1], dtype=np.int64)
    return TreeAssigner(feature, threshold, left, right, leaf_region, 2)


def _fit_kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float):
    n = X.shape[0]
    k = min(k, n)
    if k < 2:
        return SingleRegion()
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = X[rng.integers(n)]
        else:
            centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    for _ in range(max_iter):
        dist2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]
        )
        assign = np.argmin(dist2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = assign == j
            if members.any():
                new_centers[j] = X[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-served point
                worst = int(np.argmax(np.take_along_axis(dist2, assign[:, None], 1)))
                new_centers[j] = X[worst]
        movement = np.sqrt(np.sum((new_centers - centers) ** 2, axis=1)).max()
        centers = new_centers
        if movement < tol:
            break
    return CenterAssigner(centers)


def _fit_bin(strategy, X, y, region_ratio, rng):
    if X.shape[0] < 2:
        return SingleRegion()
    if isinstance(strategy, Tree):
        max_leaves = max(X.shape[0] // region_ratio, 1)
        return _grow_tree(X, y, max_leaves)
    if isinstance(strategy, BalancedStump):
        return _fit_stump(X, y)
    if isinstance(strategy, KMeans):
        return _fit_kmeans(X, strategy.k, rng, strategy.max_iter, strategy.tol)
    raise TypeError(f"unknown strategy: {strategy!r}")


def fit_partition(
    bview: BinnedView,
    features: np.ndarray,
    labels: np.ndarray,
    split: SplitIndex,
    strategy,
    region_ratio: int,
    seed: int,
) -> PartitionModel:
    """Fit one partition per occupied bin on that bin's train rows.

    Bins with fewer than 2 train rows fall back to a single region.
    Per-bin randomness derives from ``(seed, bin_index)``, so fits are
    independent and order-insensitive.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] == 0:
        raise ValueError("partitioning requires a nonempty feature matrix")
    if region_ratio < 1:
        raise ValueError("region_ratio must be >= 1")
    labels = np.asarray(labels, dtype=np.float64)
    train_bins = bview.bin_of[split.train_rows]

    def fit_one(b):
        rows = split.train_rows[train_bins == b]
        rng = np.random.default_rng([seed, b])
        return _fit_bin(strategy, features[rows], labels[rows], region_ratio, rng)

    bins = range(bview.n_bins)
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            assigners = tuple(pool.map(fit_one, bins))
    else:
        assigners = tuple(fit_one(b) for b in bins)
    return PartitionModel(strategy, region_ratio, bview.n_bins, assigners)


def assign_regions(model: PartitionModel, bview: BinnedView, features: np.ndarray) -> np.ndarray:
    """Region index for every row (train and test), within its bin."""
    features = np.asarray(features, dtype=np.float64)
    out = np.zeros(bview.bin_of.shape[0], dtype=np.int64)
    for b in range(model.n_bins):
        rows = np.flatnonzero(bview.bin_of == b)
        if rows.size:
            out[rows] = model.assigners[b].assign(features[rows])
    return out
