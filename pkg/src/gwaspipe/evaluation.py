"""Confusion-matrix metrics, threshold-sweep ROC curves and t-fold CV.

Metrics with a zero denominator return ``None`` rather than 0, so an
undefined precision never masquerades as a bad one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

DEFAULT_GRID = 101


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def _labels(a, name):
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a 1-D label vector")
    if np.any((a != 0) & (a != 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(bool)


def confusion(pred, truth) -> ConfusionMatrix:
    p = _labels(pred, "pred")
    t = _labels(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} labels")
    return ConfusionMatrix(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
        tn=int(np.sum(~p & ~t)),
    )


def _ratio(num, den) -> Optional[float]:
    return num / den if den else None


def accuracy(c: ConfusionMatrix):
    return _ratio(c.tp + c.tn, c.total)


def precision(c: ConfusionMatrix):
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionMatrix):
    return _ratio(c.tp, c.tp + c.fn)


def f_measure(c: ConfusionMatrix):
    return _ratio(2 * c.tp, 2 * c.tp + c.fn + c.fp)


def false_positive_rate(c: ConfusionMatrix):
    return _ratio(c.fp, c.fp + c.tn)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """One ``(alpha, fpr, tpr)`` row per threshold, thresholds increasing."""

    alpha: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "fpr", "tpr"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.alpha.shape == self.fpr.shape == self.tpr.shape) or self.alpha.ndim != 1:
            raise ValueError("alpha, fpr and tpr must be equal-length vectors")
        if self.alpha.size > 1 and np.any(np.diff(self.alpha) <= 0):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def grid_size(self):
        return self.alpha.size

    @property
    def points(self):
        return list(zip(self.alpha.tolist(), self.fpr.tolist(), self.tpr.tolist()))

    @classmethod
    def from_rates(cls, fpr, tpr):
        """Curve whose thresholds are just the point order (for hand-built examples)."""
        return cls(np.arange(len(fpr), dtype=np.float64), fpr, tpr)


def roc_curve(scores, truth, w: int = DEFAULT_GRID) -> RocCurve:
    """Sweep ``w`` equally spaced thresholds over ``[0, 1]``; predict 1 iff ``score >= alpha``."""
    s = np.asarray(scores, dtype=np.float64)
    t = _labels(truth, "truth")
    if w < 2:
        raise ValueError(f"grid size must be at least 2, got {w}")
    if s.size == 0:
        raise ValueError("empty scores")
    if s.shape != t.shape:
        raise ValueError(f"length mismatch: {s.size} scores, {t.size} labels")
    if np.any(~np.isfinite(s)) or np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0, 1]")
    pos = int(t.sum())
    neg = t.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC rates are undefined when the truth has a single class")
    # i / (w - 1) is correctly rounded, so a vote fraction equal to a grid value compares equal
    alpha = np.arange(w) / (w - 1)
    called = s[None, :] >= alpha[:, None]
    tp = (called & t[None, :]).sum(axis=1)
    fp = (called & ~t[None, :]).sum(axis=1)
    return RocCurve(alpha, fp / neg, tp / pos)


def auc(c: RocCurve) -> float:
    """Rectangle rule ``|sum_i (fpr_i - fpr_{i+1}) * tpr_{i+1}|``."""
    if c.fpr.size < 2:
        raise ValueError("an ROC curve needs at least 2 points")
    return float(abs(np.sum((c.fpr[:-1] - c.fpr[1:]) * c.tpr[1:])))


def write_roc(c: RocCurve, path):
    lines = ["alpha,fpr,tpr"]
    for a, f, t in zip(c.alpha, c.fpr, c.tpr):
        lines.append(f"{a:.10g},{f:.10g},{t:.10g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# cross validation


@dataclass(frozen=True, eq=False)
class FoldPlan:
    t: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.intp, copy=True)
        if a.ndim != 1:
            raise ValueError("assignment must be a vector")
        if a.size and (a.min() < 0 or a.max() >= self.t):
            raise ValueError(f"fold indices must lie in [0, {self.t})")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self):
        return self.assignment.size

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.t)

    def test_rows(self, i):
        return np.flatnonzero(self.assignment == i)

    def train_rows(self, i):
        return np.flatnonzero(self.assignment != i)


def kfold_plan(n: int, t: int, seed: int) -> FoldPlan:
    """Shuffle ``n`` rows and cut them into ``t`` contiguous groups of near-equal size."""
    if not (2 <= t <= n):
        raise ValueError(f"fold count must satisfy 2 <= t <= n={n}, got {t}")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.intp)
    for i, rows in enumerate(np.array_split(perm, t)):
        assignment[rows] = i
    return FoldPlan(t, assignment)


class FoldError(RuntimeError):
    def __init__(self, fold, stage, cause):
        super().__init__(f"fold {fold}: {stage} failed: {cause}")
        self.fold = fold
        self.stage = stage


class CrossValidation(NamedTuple):
    mean: float
    per_fold: list


def cross_validate(trainer: Callable, scorer: Callable, d, plan: FoldPlan, workers: int = 1):
    """Train on all folds but ``i``, score on fold ``i``; mean of the fold scores."""
    if plan.n != d.rows:
        raise ValueError(f"plan covers {plan.n} rows, dataset has {d.rows}")

    def run(i):
        train = d.take(plan.train_rows(i))
        test = d.take(plan.test_rows(i))
        try:
            model = trainer(train)
        except Exception as exc:
            raise FoldError(i, "training", exc) from exc
        try:
            return float(scorer(model, test))
        except Exception as exc:
            raise FoldError(i, "scoring", exc) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(run, range(plan.t)))
    else:
        scores = [run(i) for i in range(plan.t)]
    return CrossValidation(float(np.mean(scores)), scores)
