"""The two experimental approaches and the cross-validation runner.

Approach 1: random projection of the real-valued data, then k-NN.
Approach 2: MTD feature selection on the categorical data, then a forest.

All label-dependent fitting (MTD scoring, model training) sees only the
training rows of the split or fold it is evaluated on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import evaluation as ev
from . import forest as rf
from . import knn
from . import mtd
from .dataset import AnyDataset, RealDataset, as_categorical, as_real, holdout_split
from .projection import make_block_plan, project_blocked, recommended_dim

log = logging.getLogger(__name__)

# holdout proportions of the original study: 2880 of 3907 rows for training
DEFAULT_TRAIN_FRACTION = 2880 / 3907


def default_train_rows(n):
    return min(n - 1, max(2, int(round(DEFAULT_TRAIN_FRACTION * n))))


def subseeds(seed, count):
    """Independent integer seeds for the stages of one run."""
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(count, dtype=np.uint64)]


@dataclass
class Metrics:
    confusion: ev.ConfusionMatrix
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f_measure: Optional[float]
    auc: Optional[float]
    roc: Optional[ev.RocCurve] = field(default=None, repr=False)

    @classmethod
    def compute(cls, pred, scores, truth, grid=ev.DEFAULT_GRID):
        c = ev.confusion(pred, truth)
        curve = area = None
        if 0 < int(np.sum(truth)) < len(truth):
            curve = ev.roc_curve(scores, truth, grid)
            area = ev.auc(curve)
        return cls(c, ev.accuracy(c), ev.precision(c), ev.recall(c), ev.f_measure(c), area, curve)


def _split(data, train_rows, seed):
    n_train = default_train_rows(data.rows) if train_rows is None else int(train_rows)
    return holdout_split(data, n_train, seed)


# ---------------------------------------------------------------------------
# approach 1


@dataclass
class ProjectionSettings:
    mprime: Optional[int] = None
    epsilon: float = 0.25
    jl_c: float = 4.0
    blocks: int = 1

    def target_dim(self, n):
        if self.mprime is not None:
            if self.mprime < 1:
                raise ValueError(f"mprime must be positive, got {self.mprime}")
            return int(self.mprime)
        return recommended_dim(max(n, 2), self.epsilon, self.jl_c)


def project_dataset(d: RealDataset, settings: ProjectionSettings, seed, workers=1, warn=True):
    m_prime = settings.target_dim(d.rows)
    if warn and m_prime >= d.cols:
        log.warning("target dimension %d is not below the input dimension %d", m_prime, d.cols)
    plan = make_block_plan(d.cols, min(settings.blocks, d.cols), seed)
    return project_blocked(d, m_prime, plan, workers)


@dataclass
class KnnRow:
    k: int
    norm: knn.Norm
    metrics: Metrics


@dataclass
class Approach1Result:
    m_prime: int
    n_train: int
    n_test: int
    rows: list


def run_approach1(data: AnyDataset, *, ks=(1, 3, 5, 7, 9, 11, 13, 15, 17, 19), norms=("l1", "l2"),
                  projection=None, train_rows=None, seed=0, workers=1, grid=ev.DEFAULT_GRID):
    real = as_real(data)
    projection = projection or ProjectionSettings()
    norms = [knn.Norm.parse(s) for s in norms]
    split_seed, proj_seed = subseeds(seed, 2)
    train, test = _split(real, train_rows, split_seed)
    for k in ks:
        if not (1 <= k <= train.rows):
            raise ValueError(f"k={k} outside [1, {train.rows}] training rows")
    # the projection is label-free, so one matrix serves both sides of the split
    # and its dimension is fixed by the training size, never the test size
    fixed = ProjectionSettings(projection.target_dim(train.rows), projection.epsilon,
                               projection.jl_c, projection.blocks)
    ptrain = project_dataset(train, fixed, proj_seed, workers)
    ptest = project_dataset(test, fixed, proj_seed, workers, warn=False)
    rows = []
    for norm in norms:
        for k in ks:
            model = knn.fit(ptrain, k, norm)
            frac = knn.vote_fraction_batch(model, ptest.cells, workers)
            pred = (2 * np.rint(frac * k) > k).astype(np.int8)
            rows.append(KnnRow(k, norm, Metrics.compute(pred, frac, test.labels, grid)))
            log.info("approach1 k=%d norm=%s accuracy=%s", k, norm.value, rows[-1].metrics.accuracy)
    return Approach1Result(ptrain.cols, train.rows, test.rows, rows)


# ---------------------------------------------------------------------------
# approach 2


@dataclass
class ForestSettings:
    trees: int = 500
    z: object = rf.SQRT
    min_gain: float = 0.0


@dataclass
class AlphaRow:
    alpha: float
    selected: list
    metrics: Metrics


@dataclass
class Approach2Result:
    scores: mtd.FeatureScores
    n_train: int
    n_test: int
    rows: list


class NoFeaturesError(ValueError):
    pass


def _forest_config(settings: ForestSettings, seed):
    return rf.TreeConfig(min_gain=settings.min_gain, z=settings.z, seed=seed)


def run_approach2(data: AnyDataset, *, alphas=(0.2, 0.3, 0.4, 0.5), forest=None, train_rows=None,
                  seed=0, workers=1, grid=ev.DEFAULT_GRID):
    cat = as_categorical(data)
    forest = forest or ForestSettings()
    split_seed, forest_seed = subseeds(seed, 2)
    train, test = _split(cat, train_rows, split_seed)
    scores = mtd.score_all(train)
    selections = []
    for a in alphas:
        J = mtd.select_features(scores, a)
        if not J:
            raise NoFeaturesError(
                f"no features selected at alpha={a} (max training score {scores.scores.max():.6g})"
            )
        selections.append((a, J))
    rows = []
    for a, J in selections:
        model = rf.fit_forest(
            train.cells[:, J], train.labels, forest.trees, _forest_config(forest, forest_seed),
            bootstrap=True, categorical=True, workers=workers,
        )
        frac = rf.vote_fraction_forest_batch(model, test.cells[:, J])
        pred = (frac >= model.vote_threshold).astype(np.int8)
        rows.append(AlphaRow(float(a), J, Metrics.compute(pred, frac, test.labels, grid)))
        log.info("approach2 alpha=%s selected=%d accuracy=%s", a, len(J), rows[-1].metrics.accuracy)
    return Approach2Result(scores, train.rows, test.rows, rows)


# ---------------------------------------------------------------------------
# cross validation


@dataclass
class FoldRow:
    fold: int
    n_test: int
    metrics: Metrics


@dataclass
class CrossvalResult:
    classifier: str
    mean_accuracy: float
    rows: list
    coverage_ok: bool


@dataclass
class _KnnFoldModel:
    model: knn.KnnModel


@dataclass
class _ForestFoldModel:
    columns: list
    model: rf.ForestModel


def run_crossval(data: AnyDataset, *, classifier="knn", folds=5, seed=0, k=5, norm="l2",
                 projection=None, alpha=0.3, forest=None, workers=1, grid=ev.DEFAULT_GRID):
    plan_seed, proj_seed, forest_seed = subseeds(seed, 3)
    if classifier == "knn":
        d = as_real(data)
        if projection is not None:
            d = project_dataset(d, projection, proj_seed, workers)
        norm = knn.Norm.parse(norm)

        def trainer(train):
            return _KnnFoldModel(knn.fit(train, k, norm))

        def predict(model, test):
            frac = knn.vote_fraction_batch(model.model, test.cells, workers)
            return (2 * np.rint(frac * k) > k).astype(np.int8), frac

    elif classifier == "forest":
        d = as_categorical(data)
        forest = forest or ForestSettings()
        config = _forest_config(forest, forest_seed)

        def trainer(train):
            # feature selection belongs to the training fold only
            J = mtd.select_features(mtd.score_all(train), alpha)
            if not J:
                raise NoFeaturesError(f"no features selected at alpha={alpha}")
            model = rf.fit_forest(train.cells[:, J], train.labels, forest.trees, config,
                                  bootstrap=True, categorical=True, workers=workers)
            return _ForestFoldModel(J, model)

        def predict(model, test):
            frac = rf.vote_fraction_forest_batch(model.model, test.cells[:, model.columns])
            return (frac >= model.model.vote_threshold).astype(np.int8), frac

    else:
        raise ValueError(f"unknown classifier {classifier!r}; expected knn or forest")

    plan = ev.kfold_plan(d.rows, folds, plan_seed)
    rows = []
    tested = np.zeros(d.rows, dtype=np.int64)

    def scorer(model, test):
        # folds run serially, so the next fold index is len(rows)
        i = len(rows)
        pred, frac = predict(model, test)
        tested[plan.test_rows(i)] += len(pred) == len(plan.test_rows(i))
        m = Metrics.compute(pred, frac, test.labels, grid)
        rows.append(FoldRow(i, test.rows, m))
        return m.accuracy

    result = ev.cross_validate(trainer, scorer, d, plan, workers=1)
    coverage_ok = bool(np.all(tested == 1))
    return CrossvalResult(classifier, result.mean, rows, coverage_ok)


def fmt(x):
    if x is None:
        return "undefined"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.10g}"
