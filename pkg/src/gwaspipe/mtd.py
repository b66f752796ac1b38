"""Mass Transportation Distance feature scoring for categorical data.

Under the discrete 0/1 metric the production score of a feature is the l1
distance between its two class-conditional symbol frequencies. Counts are
integers, so the score is kept as an exact rational ``numerator / (n0 * n1)``
and thresholds such as ``0.5`` compare without rounding trouble.

The exact transport solver, the 1-D CDF formula and the Kantorovich witness
check are small-instance oracles for that score, not part of the scoring
path.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.optimize import linprog

from .dataset import CategoricalDataset

MAX_EXACT_ALPHABET = 64
_TOL = 1e-9


class EmptyClassError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Probability weights over ``alphabet_size`` points.

    ``support`` optionally places the points on the real line (used by
    :func:`transport_cost_1d`).
    """

    weights: np.ndarray
    support: np.ndarray = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > _TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.support is not None:
            s = np.array(self.support, dtype=np.float64, copy=True)
            if s.shape != w.shape:
                raise ValueError("support and weights differ in length")
            s.setflags(write=False)
            object.__setattr__(self, "support", s)

    @property
    def alphabet_size(self):
        return self.weights.size

    @classmethod
    def from_counts(cls, counts, support=None):
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise EmptyClassError("cannot normalize zero counts")
        return cls(counts / total, support)

    @classmethod
    def delta(cls, i, size):
        w = np.zeros(size)
        w[i] = 1.0
        return cls(w)


@dataclass(frozen=True, eq=False)
class FeatureScores:
    """Per-feature scores, exact when built from counts.

    ``numerators`` and ``denominator`` hold ``score[j] = numerators[j] / denominator``.
    """

    scores: np.ndarray
    feature_names: tuple
    numerators: np.ndarray = None
    denominator: int = None

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64, copy=True)
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(self.feature_names) != s.size:
            raise ValueError("one feature name per score required")

    def __len__(self):
        return self.scores.size

    def exact(self, j):
        if self.numerators is None:
            return Fraction(self.scores[j])
        return Fraction(int(self.numerators[j]), int(self.denominator))

    def ranking(self):
        """Feature indices by descending score, ties by ascending index."""
        key = -self.numerators if self.numerators is not None else -self.scores
        return np.lexsort((np.arange(len(self)), key))

    def top(self, count):
        return [int(j) for j in self.ranking()[:count]]


def _class_counts(d: CategoricalDataset):
    n1 = int(d.labels.sum())
    n0 = d.rows - n1
    if n0 == 0:
        raise EmptyClassError("class 0 empty")
    if n1 == 0:
        raise EmptyClassError("class 1 empty")
    return n0, n1


def symbol_counts(d: CategoricalDataset, j=None):
    """Counts of each symbol per class, shape ``(2, w)`` or ``(m, 2, w)``."""
    w = len(d.alphabet)
    cols = d.cells if j is None else d.cells[:, [j]]
    m = cols.shape[1]
    code = cols.astype(np.int64) * 2 + d.labels[:, None]
    code += (np.arange(m) * 2 * w)[None, :]
    counts = np.bincount(code.ravel(), minlength=2 * w * m).reshape(m, w, 2)
    counts = counts.transpose(0, 2, 1)
    return counts[0] if j is not None else counts


def class_conditional_measures(d: CategoricalDataset, j: int):
    if not (0 <= j < d.cols):
        raise IndexError(f"feature index {j} outside [0, {d.cols})")
    _class_counts(d)
    c = symbol_counts(d, j)
    return EmpiricalMeasure.from_counts(c[0]), EmpiricalMeasure.from_counts(c[1])


def mtd_score(mu0: EmpiricalMeasure, mu1: EmpiricalMeasure) -> float:
    if mu0.alphabet_size != mu1.alphabet_size:
        raise ValueError(f"alphabet sizes differ: {mu0.alphabet_size} vs {mu1.alphabet_size}")
    return float(np.abs(mu0.weights - mu1.weights).sum())


def score_all(d: CategoricalDataset) -> FeatureScores:
    """l1 MTD score of every column, computed exactly from counts."""
    n0, n1 = _class_counts(d)
    counts = symbol_counts(d).astype(np.int64)
    # |c0/n0 - c1/n1| = |c0*n1 - c1*n0| / (n0*n1)
    num = np.abs(counts[:, 0, :] * n1 - counts[:, 1, :] * n0).sum(axis=1)
    den = n0 * n1
    return FeatureScores(num / den, d.feature_names, num, den)


def _as_fraction(alpha):
    if isinstance(alpha, Rational):
        return Fraction(alpha)
    if isinstance(alpha, str):
        return Fraction(alpha)
    # shortest repr keeps decimal thresholds such as 0.3 exact
    return Fraction(repr(float(alpha)))


def select_features(s: FeatureScores, alpha) -> list:
    """Indices with ``score >= alpha`` in ascending order."""
    a = _as_fraction(alpha)
    if a < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if s.numerators is not None:
        # num/den >= p/q  <=>  num*q >= p*den
        keep = [j for j, num in enumerate(s.numerators) if int(num) * a.denominator >= a.numerator * s.denominator]
    else:
        keep = [j for j, v in enumerate(s.scores) if Fraction(v) >= a]
    return keep


def reduce_columns(d: CategoricalDataset, J) -> CategoricalDataset:
    J = sorted(int(j) for j in J)
    for j in J:
        if not (0 <= j < d.cols):
            raise IndexError(f"feature index {j} outside [0, {d.cols})")
    return d.select_columns(J)


# ---------------------------------------------------------------------------
# verification oracles


def discrete_metric(w: int) -> np.ndarray:
    return 1.0 - np.eye(w)


def line_metric(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    return np.abs(p[:, None] - p[None, :])


def check_metric(D, tol=1e-12):
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if np.any(np.abs(np.diag(D)) > tol):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(D < -tol):
        raise ValueError("distances must be non-negative")
    if np.any(np.abs(D - D.T) > tol):
        raise ValueError("distance matrix must be symmetric")
    # D[i,k] <= D[i,j] + D[j,k] for all i, j, k
    if np.any(D[:, None, :] > D[:, :, None] + D[None, :, :] + tol):
        raise ValueError("distance matrix violates the triangle inequality")
    return D


@dataclass(frozen=True)
class TransportSolution:
    cost: float
    plan: np.ndarray
    potential: np.ndarray


def solve_transport(mu: EmpiricalMeasure, nu: EmpiricalMeasure, D) -> TransportSolution:
    """Exact discrete transport LP; also returns a 1-Lipschitz optimal potential.

    The potential is the c-transform ``f_i = min_j (D[i,j] - v_j)`` of the
    LP's column duals, which is 1-Lipschitz for a metric ``D`` and attains
    ``sum f (mu - nu) = cost``.
    """
    w = mu.alphabet_size
    if nu.alphabet_size != w:
        raise ValueError(f"alphabet sizes differ: {w} vs {nu.alphabet_size}")
    D = check_metric(D)
    if D.shape[0] != w:
        raise ValueError(f"distance matrix is {D.shape[0]}x{D.shape[0]}, measures have {w} points")
    if w > MAX_EXACT_ALPHABET:
        raise ValueError(f"exact solver is limited to {MAX_EXACT_ALPHABET} points, got {w}")

    A = np.zeros((2 * w, w * w))
    for i in range(w):
        A[i, i * w:(i + 1) * w] = 1.0
        A[w + i, i::w] = 1.0
    b = np.concatenate([mu.weights, nu.weights])
    # one marginal constraint is redundant; drop it to keep the system full rank
    res = linprog(D.ravel(), A_eq=A[:-1], b_eq=b[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(w, w), 0.0, None)
    cost = float((plan * D).sum())
    y = np.concatenate([res.eqlin.marginals, [0.0]])
    v = y[w:]
    f = np.min(D - v[None, :], axis=1)
    return TransportSolution(cost, plan, f)


def exact_transport_cost(mu: EmpiricalMeasure, nu: EmpiricalMeasure, D) -> float:
    return solve_transport(mu, nu, D).cost


def transport_cost_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """``integral |F_mu - F_nu| dx`` over the merged support."""
    for name, meas in (("mu", mu), ("nu", nu)):
        if meas.support is None:
            raise ValueError(f"{name} has no real support points")
    pts = np.concatenate([mu.support, nu.support])
    mass = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(pts, kind="stable")
    pts, mass = pts[order], mass[order]
    diff = np.cumsum(mass)[:-1]
    gaps = np.diff(pts)
    return float(np.abs(diff) @ gaps)


def is_lipschitz(f, D, tol=_TOL) -> bool:
    f = np.asarray(f, dtype=np.float64)
    return bool(np.all(np.abs(f[:, None] - f[None, :]) <= np.asarray(D) + tol))


def duality_witness_check(mu, nu, D, f) -> bool:
    """Weak duality: ``sum f (mu - nu) <= transport cost`` for 1-Lipschitz ``f``."""
    f = np.asarray(f, dtype=np.float64)
    D = check_metric(D)
    if f.shape != (mu.alphabet_size,):
        raise ValueError(f"witness needs {mu.alphabet_size} values, got {f.shape}")
    if not is_lipschitz(f, D):
        raise ValueError("witness is not 1-Lipschitz with respect to D")
    lower = float(f @ (mu.weights - nu.weights))
    return lower <= exact_transport_cost(mu, nu, D) + _TOL


def write_scores(s: FeatureScores, path):
    """CSV ``feature_name,score`` by descending score, 10 significant digits."""
    lines = ["feature_name,score"]
    for j in s.ranking():
        lines.append(f"{s.feature_names[j]},{s.scores[j]:.10g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
