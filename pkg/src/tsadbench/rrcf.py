"""Robust random cut forest detector.

Streaming tree maintenance (insert/forget) with collusive-displacement
scoring. Operates either on raw points or on 7-dimensional sliding-window
statistics vectors (min, max, coefficient of variation, mean, variance,
skewness, kurtosis).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ScoreSeries, TimeSeries, expand_window_scores

VAR_EPS = 1e-12


class Leaf:
    __slots__ = ("point", "count", "index", "parent")

    def __init__(self, point, index, count=1, parent=None):
        self.point = point
        self.index = index
        self.count = count
        self.parent = parent


class Branch:
    __slots__ = ("dim", "cut", "left", "right", "count", "bbox", "parent")

    def __init__(self, dim, cut, left, right, count, bbox, parent=None):
        self.dim = dim
        self.cut = cut
        self.left = left
        self.right = right
        self.count = count
        self.bbox = bbox  # (2, d) array: row 0 mins, row 1 maxes
        self.parent = parent


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 51
    tree_size: int = 1001
    mode: str = "points"  # "points" or "sequences"
    window_length: int = 100
    stride: int = 50
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 1 or self.tree_size < 2:
            raise ValueError("need n_trees >= 1 and tree_size >= 2")
        if self.mode not in ("points", "sequences"):
            raise ValueError(f"unknown mode {self.mode!r}")


class RcTree:
    """One random cut tree with streaming insert/forget.

    Cuts pick a dimension with probability proportional to the bounding-box
    range in that dimension (box enlarged by the incoming point) and a cut
    value uniform in that range.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.root = None
        self.leaves: dict[int, Leaf] = {}

    def __len__(self):
        return self.root.count if self.root is not None else 0

    # -- structure helpers ------------------------------------------------

    @staticmethod
    def _leaf_bbox(point):
        return np.vstack([point, point])

    def _node_bbox(self, node):
        if isinstance(node, Leaf):
            return self._leaf_bbox(node.point)
        return node.bbox

    def _update_path(self, node, delta):
        while node is not None:
            node.count += delta
            node = node.parent

    def _refresh_boxes(self, node):
        while node is not None:
            if isinstance(node, Branch):
                lb = self._node_bbox(node.left)
                rb = self._node_bbox(node.right)
                new = np.vstack([
                    np.minimum(lb[0], rb[0]),
                    np.maximum(lb[1], rb[1]),
                ])
                if np.array_equal(new, node.bbox):
                    break  # ancestors' boxes cannot have changed either
                node.bbox = new
            node = node.parent

    # -- operations -------------------------------------------------------

    def insert(self, point, index):
        point = np.asarray(point, dtype=float)
        if not np.all(np.isfinite(point)):
            raise ValueError("point has non-finite coordinates")
        if index in self.leaves:
            raise KeyError(f"index {index} already present")
        if self.root is None:
            leaf = Leaf(point, index)
            self.root = leaf
            self.leaves[index] = leaf
            return

        node = self.root
        parent = None
        side = None
        while True:
            bbox = self._node_bbox(node)
            merged_min = np.minimum(bbox[0], point)
            merged_max = np.maximum(bbox[1], point)
            spans = merged_max - merged_min
            total = spans.sum()
            if total <= 0:
                # Point duplicates an existing leaf exactly.
                if isinstance(node, Leaf):
                    node.count += 1
                    self.leaves[index] = node
                    self._update_path(node.parent, 1)
                    return
                # Degenerate box (all points identical) but point differs in
                # no dimension cannot happen for a Branch; fall through.
            r = self.rng.uniform(0, total)
            cum = np.cumsum(spans)
            dim = int(np.searchsorted(cum, r, side="right"))
            dim = min(dim, len(spans) - 1)
            cut = merged_max[dim] - (cum[dim] - r)
            if cut < bbox[0, dim] or cut >= bbox[1, dim]:
                # The cut separates the new point from the whole subtree.
                leaf = Leaf(point, index)
                if point[dim] <= cut:
                    branch = Branch(dim, cut, leaf, node,
                                    node.count + 1,
                                    np.vstack([merged_min, merged_max]))
                else:
                    branch = Branch(dim, cut, node, leaf,
                                    node.count + 1,
                                    np.vstack([merged_min, merged_max]))
                leaf.parent = branch
                node.parent = branch
                branch.parent = parent
                if parent is None:
                    self.root = branch
                elif side == "left":
                    parent.left = branch
                else:
                    parent.right = branch
                self.leaves[index] = leaf
                self._update_path(parent, 1)
                self._refresh_boxes(parent)
                return
            if isinstance(node, Leaf):
                # Identical point handled above; a non-separating cut at a
                # leaf means the point coincides with the leaf's point.
                node.count += 1
                self.leaves[index] = node
                self._update_path(node.parent, 1)
                return
            parent = node
            if point[node.dim] <= node.cut:
                node, side = node.left, "left"
            else:
                node, side = node.right, "right"

    def forget(self, index):
        leaf = self.leaves.pop(index, None)
        if leaf is None:
            raise KeyError(f"index {index} not in tree")
        if leaf.count > 1:
            leaf.count -= 1
            self._update_path(leaf.parent, -1)
            return
        parent = leaf.parent
        if parent is None:
            self.root = None
            return
        sibling = parent.right if parent.left is leaf else parent.left
        grand = parent.parent
        sibling.parent = grand
        if grand is None:
            self.root = sibling
        elif grand.left is parent:
            grand.left = sibling
        else:
            grand.right = sibling
        self._update_path(grand, -1)
        self._refresh_boxes(grand)

    def codisp(self, index) -> float:
        """Collusive displacement: max over ancestors of sibling size over
        the size of the colluder set on the query's side."""
        leaf = self.leaves.get(index)
        if leaf is None:
            raise KeyError(f"index {index} not in tree")
        node = leaf
        best = 0.0
        while node.parent is not None:
            parent = node.parent
            sibling = parent.right if parent.left is node else parent.left
            best = max(best, sibling.count / node.count)
            node = parent
        return best


def window_features(window: np.ndarray) -> np.ndarray:
    """Statistics vector (min, max, CV, mean, variance, skewness, kurtosis).

    Degenerate moments are defined as 0 on flat windows so features stay
    finite.
    """
    window = np.asarray(window, dtype=float)
    mean = window.mean()
    var = window.var()
    if var < VAR_EPS:
        cv = skew = kurt = 0.0
        var = 0.0
    else:
        std = np.sqrt(var)
        cv = std / mean if abs(mean) >= VAR_EPS else 0.0
        z = (window - mean) / std
        skew = float(np.mean(z ** 3))
        kurt = float(np.mean(z ** 4))
    return np.array([window.min(), window.max(), cv, mean, var, skew, kurt])


def _stream_scores(points: np.ndarray, cfg: ForestConfig) -> np.ndarray:
    """Stream points through the forest with sliding occupancy tree_size."""
    rng = np.random.default_rng(cfg.seed)
    trees = [RcTree(np.random.default_rng(rng.integers(2 ** 63)))
             for _ in range(cfg.n_trees)]
    scores = np.zeros(len(points))
    for i, p in enumerate(points):
        total = 0.0
        for tree in trees:
            if len(tree) >= cfg.tree_size:
                tree.forget(i - cfg.tree_size)
            tree.insert(p, i)
            if len(tree) >= 2:
                total += tree.codisp(i)
        scores[i] = total / cfg.n_trees
    return scores


def score_series(series: TimeSeries, cfg: ForestConfig) -> ScoreSeries:
    """Score a series in points mode (raw scalars) or sequences mode
    (sliding-window statistics vectors)."""
    values = series.values
    if cfg.mode == "points":
        scores = _stream_scores(values.reshape(-1, 1), cfg)
        return ScoreSeries(scores, "rrcf@points")
    if len(values) < cfg.window_length:
        raise ValueError("series shorter than window_length")
    n_windows = (len(values) - cfg.window_length) // cfg.stride + 1
    feats = np.stack([
        window_features(values[k * cfg.stride:k * cfg.stride + cfg.window_length])
        for k in range(n_windows)
    ])
    window_scores = _stream_scores(feats, cfg)
    expanded = expand_window_scores(window_scores, cfg.window_length,
                                    cfg.stride, len(values), "rrcf@sequences")
    return expanded
