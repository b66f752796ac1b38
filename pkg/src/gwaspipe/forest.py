"""Entropy decision trees and a bagged random forest.

Columns are either real (split ``X <= a``) or categorical (split ``X in a``
for a set of symbol codes). A sample is a matrix ``X`` plus 0/1 labels
``y``; categorical columns hold integer symbol codes.

Determinism rules:

* real thresholds are midpoints between consecutive distinct values;
* categorical subsets never contain the smallest observed symbol, so each
  bipartition is tried once;
* equal gains keep the lower feature index, then the smaller threshold or
  the lexicographically smaller subset;
* a node splits only when its best gain is strictly above ``min_gain``;
* tied leaf counts and tied forest votes resolve to label 0 (leaves) or are
  decided by ``>=`` against the vote threshold (forests).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Union

import numpy as np

ALL = "all"
SQRT = "sqrt"
# gains closer than this count as tied
_GAIN_EPS = 1e-12


def entropy(counts) -> float:
    """Binary entropy in bits of a two-class count pair (``0 log 0 = 0``)."""
    c0, c1 = counts
    if c0 < 0 or c1 < 0:
        raise ValueError(f"counts must be non-negative, got {counts}")
    n = c0 + c1
    if n == 0:
        raise ValueError("entropy of an empty set is undefined")
    h = 0.0
    for c in (c0, c1):
        if c:
            f = c / n
            h -= f * math.log2(f)
    return h


def _entropy_vec(c0, c1):
    n = c0 + c1
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = np.where(n > 0, c0 / n, 0.0)
        f1 = np.where(n > 0, c1 / n, 0.0)
        h0 = np.where(f0 > 0, -f0 * np.log2(np.where(f0 > 0, f0, 1.0)), 0.0)
        h1 = np.where(f1 > 0, -f1 * np.log2(np.where(f1 > 0, f1, 1.0)), 0.0)
    return h0 + h1


def information_gain(labels, left_mask) -> float:
    """Parent entropy minus size-weighted entropies of the two sides."""
    labels = np.asarray(labels).astype(np.int64)
    left_mask = np.asarray(left_mask, dtype=bool)
    if labels.shape != left_mask.shape:
        raise ValueError("labels and split mask differ in length")
    n = labels.size
    nl = int(left_mask.sum())
    if nl == 0 or nl == n:
        raise ValueError("both sides of a split must be nonempty")
    l1 = int(labels[left_mask].sum())
    r1 = int(labels[~left_mask].sum())
    parent = entropy((n - l1 - r1, l1 + r1))
    left = entropy((nl - l1, l1))
    right = entropy((n - nl - r1, r1))
    return parent - (nl / n) * left - ((n - nl) / n) * right


@dataclass(frozen=True)
class SplitRule:
    """``X[feature] <= threshold`` or ``X[feature] in subset`` routes left."""

    feature: int
    threshold: Optional[float] = None
    subset: Optional[frozenset] = None

    def __post_init__(self):
        if (self.threshold is None) == (self.subset is None):
            raise ValueError("a rule needs exactly one of threshold or subset")
        if self.subset is not None:
            if not self.subset:
                raise ValueError("category subset must be nonempty")
            object.__setattr__(self, "subset", frozenset(int(s) for s in self.subset))

    @property
    def categorical(self):
        return self.subset is not None

    def goes_left(self, value) -> bool:
        if self.subset is not None:
            return int(value) in self.subset
        return value <= self.threshold

    def sort_key(self):
        if self.subset is not None:
            return (self.feature, 1, tuple(sorted(self.subset)))
        return (self.feature, 0, (self.threshold,))


@dataclass
class Leaf:
    label: int
    counts: tuple


@dataclass
class Node:
    rule: SplitRule
    left: Union["Node", Leaf, None] = None
    right: Union["Node", Leaf, None] = None


TreeNode = Union[Node, Leaf]


@dataclass(frozen=True)
class TreeConfig:
    """``min_gain`` is the split threshold; ``z`` is ``"all"``, ``"sqrt"`` or a count."""

    min_gain: float = 0.0
    z: Union[int, str] = ALL
    seed: int = 0

    def __post_init__(self):
        if self.min_gain < 0:
            raise ValueError(f"min_gain must be non-negative, got {self.min_gain}")
        if isinstance(self.z, str):
            if self.z not in (ALL, SQRT):
                raise ValueError(f"z must be 'all', 'sqrt' or a positive count, got {self.z!r}")
        elif int(self.z) < 1:
            raise ValueError(f"z must be positive, got {self.z}")

    def features_per_node(self, m):
        if self.z == ALL:
            return m
        if self.z == SQRT:
            return max(1, math.ceil(math.sqrt(m)))
        z = int(self.z)
        if z > m:
            raise ValueError(f"z={z} exceeds the number of features m={m}")
        return z


def _leaf(c0, c1):
    return Leaf(1 if c1 > c0 else 0, (int(c0), int(c1)))


def _categorical_mask(categorical, m):
    if isinstance(categorical, (bool, np.bool_)):
        return np.full(m, bool(categorical))
    mask = np.asarray(categorical, dtype=bool)
    if mask.shape != (m,):
        raise ValueError(f"categorical mask must have {m} entries")
    return mask


def _best_real(v, y, parent_h):
    order = np.argsort(v, kind="stable")
    vs, ys = v[order], y[order]
    n = vs.size
    cuts = np.flatnonzero(vs[:-1] < vs[1:])
    if cuts.size == 0:
        return None
    ones = np.cumsum(ys)
    nl = cuts + 1
    l1 = ones[cuts]
    r1 = ones[-1] - l1
    nr = n - nl
    gain = parent_h - (nl / n) * _entropy_vec(nl - l1, l1) - (nr / n) * _entropy_vec(nr - r1, r1)
    best = int(np.argmax(gain))
    i = cuts[best]
    a = (vs[i] + vs[i + 1]) / 2.0
    if not (vs[i] <= a < vs[i + 1]):
        a = vs[i]
    return float(gain[best]), a


def _subsets(observed):
    rest = observed[1:]
    subs = [c for r in range(1, len(rest) + 1) for c in combinations(rest, r)]
    return sorted(subs)


def _best_categorical(v, y, parent_h):
    v = v.astype(np.int64)
    w = int(v.max()) + 1
    counts = np.bincount(v * 2 + y, minlength=2 * w).reshape(w, 2)
    observed = [s for s in range(w) if counts[s].sum() > 0]
    if len(observed) < 2:
        return None
    n = v.size
    best = None
    for sub in _subsets(observed):
        lc = counts[list(sub)].sum(axis=0)
        nl = int(lc.sum())
        rc = counts.sum(axis=0) - lc
        nr = n - nl
        g = parent_h - (nl / n) * entropy(lc) - (nr / n) * entropy(rc)
        if best is None or g > best[0] + _GAIN_EPS:
            best = (g, frozenset(sub))
    return best


def best_split(X, y, candidate_features, categorical=False):
    """Best rule over ``candidate_features`` as ``(SplitRule, gain)``, or None.

    None means no candidate split exists, or the node is pure and nothing
    gains.
    """
    X = np.asarray(X)
    y = np.asarray(y).astype(np.int64)
    n = y.size
    if n == 0:
        return None
    mask = _categorical_mask(categorical, X.shape[1] if X.ndim == 2 else 0)
    ones = int(y.sum())
    parent_h = entropy((n - ones, ones))
    best = None
    for j in sorted(int(j) for j in candidate_features):
        col = X[:, j]
        if mask[j]:
            found = _best_categorical(col, y, parent_h)
            if found is None:
                continue
            rule = SplitRule(j, subset=found[1])
        else:
            found = _best_real(col.astype(np.float64), y, parent_h)
            if found is None:
                continue
            rule = SplitRule(j, threshold=found[1])
        if best is None or found[0] > best[1] + _GAIN_EPS:
            best = (rule, max(0.0, float(found[0])))
    if best is None:
        return None
    if best[1] <= 0 and (ones == 0 or ones == n):
        return None
    return best


def _rule_mask(rule, col):
    if rule.subset is not None:
        return np.isin(col.astype(np.int64), list(rule.subset))
    return col <= rule.threshold


def _grow(X, y, rows, config, mask, rng):
    m = X.shape[1]
    z = config.features_per_node(m)
    every = np.arange(m)
    root_holder = [None]
    # (row indices, parent node, side) ; explicit stack keeps deep trees off the C stack
    stack = [(rows, None, None)]
    while stack:
        idx, parent, side = stack.pop()
        yy = y[idx]
        c1 = int(yy.sum())
        c0 = idx.size - c1
        node = None
        if c0 and c1:
            cand = every if z == m else np.sort(rng.choice(m, size=z, replace=False))
            found = best_split(X[idx], yy, cand, mask)
            if found is not None and found[1] > config.min_gain:
                rule = found[0]
                go_left = _rule_mask(rule, X[idx, rule.feature])
                node = Node(rule)
                # push right first so the left subtree is grown (and draws randomness) first
                stack.append((idx[~go_left], node, "right"))
                stack.append((idx[go_left], node, "left"))
        if node is None:
            node = _leaf(c0, c1)
        if parent is None:
            root_holder[0] = node
        else:
            setattr(parent, side, node)
    return root_holder[0]


def _prepare(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"X must be (n, m) with n={y.size} labels, got {X.shape}")
    if y.size == 0:
        raise ValueError("cannot fit on an empty sample")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    return X, y


def fit_tree(X, y, config: TreeConfig = TreeConfig(), categorical=False) -> TreeNode:
    X, y = _prepare(X, y)
    mask = _categorical_mask(categorical, X.shape[1])
    rng = np.random.default_rng(config.seed)
    return _grow(X, y, np.arange(y.size), config, mask, rng)


# ---------------------------------------------------------------------------
# prediction


@dataclass
class FlatTree:
    """Array form of a tree for vectorized routing."""

    feature: np.ndarray
    threshold: np.ndarray
    is_cat: np.ndarray
    table: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    @classmethod
    def compile(cls, root: TreeNode):
        nodes = []
        order = [root]
        while order:
            node = order.pop()
            nodes.append(node)
            if isinstance(node, Node):
                order.append(node.right)
                order.append(node.left)
        pos = {id(nd): i for i, nd in enumerate(nodes)}
        k = len(nodes)
        width = 1
        for nd in nodes:
            if isinstance(nd, Node) and nd.rule.subset is not None:
                width = max(width, max(nd.rule.subset) + 1)
        feature = np.zeros(k, dtype=np.intp)
        threshold = np.zeros(k)
        is_cat = np.zeros(k, dtype=bool)
        table = np.zeros((k, width), dtype=bool)
        left = np.full(k, -1, dtype=np.intp)
        right = np.full(k, -1, dtype=np.intp)
        label = np.full(k, -1, dtype=np.int8)
        for i, nd in enumerate(nodes):
            if isinstance(nd, Leaf):
                label[i] = nd.label
                continue
            feature[i] = nd.rule.feature
            left[i] = pos[id(nd.left)]
            right[i] = pos[id(nd.right)]
            if nd.rule.subset is not None:
                is_cat[i] = True
                table[i, list(nd.rule.subset)] = True
            else:
                threshold[i] = nd.rule.threshold
        return cls(feature, threshold, is_cat, table, left, right, label)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        at = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.label[at] < 0)
        width = self.table.shape[1]
        while active.size:
            nd = at[active]
            vals = X[active, self.feature[nd]]
            sym = vals.astype(np.int64)
            seen = (sym >= 0) & (sym < width) & (sym == vals)
            in_set = np.zeros(active.size, dtype=bool)
            in_set[seen] = self.table[nd[seen], sym[seen]]
            go_left = np.where(self.is_cat[nd], in_set, vals <= self.threshold[nd])
            at[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.label[at[active]] < 0]
        return self.label[at].astype(np.int8)


def predict_tree(t: TreeNode, x) -> int:
    """Route one row down the tree; unseen categories go right."""
    x = np.asarray(x, dtype=np.float64)
    node = t
    while isinstance(node, Node):
        if node.rule.feature >= x.size:
            raise ValueError(f"row has {x.size} features, tree uses feature {node.rule.feature}")
        node = node.left if node.rule.goes_left(x[node.rule.feature]) else node.right
    return node.label


def predict_tree_batch(t: TreeNode, X):
    return FlatTree.compile(t).predict(X)


def tree_size(t: TreeNode):
    count, stack = 0, [t]
    while stack:
        nd = stack.pop()
        count += 1
        if isinstance(nd, Node):
            stack.extend((nd.left, nd.right))
    return count


def dump_tree(t: TreeNode, feature_names=None, alphabet=None, indent="  ") -> str:
    """Indented text, one node per line (left child printed first)."""
    lines = []
    stack = [(t, 0)]
    while stack:
        nd, depth = stack.pop()
        pad = indent * depth
        if isinstance(nd, Leaf):
            lines.append(f"{pad}leaf {nd.label} ({nd.counts[0]},{nd.counts[1]})")
            continue
        j = nd.rule.feature
        name = feature_names[j] if feature_names is not None else str(j)
        if nd.rule.subset is not None:
            syms = sorted(nd.rule.subset)
            shown = ",".join(alphabet[s] if alphabet is not None else str(s) for s in syms)
            lines.append(f"{pad}feature {name} in {{{shown}}}")
        else:
            lines.append(f"{pad}feature {name} <= {nd.rule.threshold:.10g}")
        stack.append((nd.right, depth + 1))
        stack.append((nd.left, depth + 1))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# forest


@dataclass(eq=False)
class ForestModel:
    trees: list
    vote_threshold: float = 0.5
    _flat: list = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("a forest needs at least one tree")
        _check_threshold(self.vote_threshold)

    @property
    def t(self):
        return len(self.trees)

    def flat(self):
        if self._flat is None:
            self._flat = [FlatTree.compile(tr) for tr in self.trees]
        return self._flat


def _check_threshold(alpha):
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"vote threshold must lie in [0, 1], got {alpha}")


def _tree_seed(seed, i):
    return np.random.SeedSequence([int(seed), int(i)])


def _fit_one(args):
    X, y, i, config, bootstrap, mask = args
    rng = np.random.default_rng(_tree_seed(config.seed, i))
    n = y.size
    rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    return _grow(X[rows], y[rows], np.arange(n), config, mask, rng)


def fit_forest(X, y, t: int = 500, config: TreeConfig = None, bootstrap=True,
               categorical=False, workers: int = 1) -> ForestModel:
    """Grow ``t`` trees, tree ``i`` seeded from ``(config.seed, i)``.

    The default config samples ``ceil(sqrt(m))`` features per node. Results
    are identical for every ``workers`` value.
    """
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    X, y = _prepare(X, y)
    config = TreeConfig(z=SQRT) if config is None else config
    config.features_per_node(X.shape[1])
    mask = _categorical_mask(categorical, X.shape[1])
    jobs = [(X, y, i, config, bootstrap, mask) for i in range(t)]
    if workers > 1 and t > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(_fit_one, jobs, chunksize=max(1, t // (4 * workers))))
    else:
        trees = [_fit_one(job) for job in jobs]
    return ForestModel(trees)


def vote_fraction_forest_batch(f: ForestModel, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    votes = np.zeros(X.shape[0], dtype=np.int64)
    for ft in f.flat():
        votes += ft.predict(X)
    return votes / f.t


def predict_forest_batch(f: ForestModel, X, alpha_vote=None):
    alpha = f.vote_threshold if alpha_vote is None else alpha_vote
    _check_threshold(alpha)
    return (vote_fraction_forest_batch(f, X) >= alpha).astype(np.int8)


def vote_fraction_forest(f: ForestModel, x) -> float:
    return float(vote_fraction_forest_batch(f, x)[0])


def predict_forest(f: ForestModel, x, alpha_vote=None) -> int:
    return int(predict_forest_batch(f, x, alpha_vote)[0])
