"""Independent reference implementations used only by the tests.

Each oracle is written from the definitions with plain Python or a
different numerical route than the library, so agreement is evidence
rather than tautology.
"""

import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np


# ---------------------------------------------------------------------------
# transport: brute-force LP vertex enumeration


@lru_cache(maxsize=None)
def _transport_bases(w):
    """All bases of the w x w transportation LP with their inverse matrices.

    A basis is a set of 2w-1 cells whose columns in the (redundant row
    dropped) constraint matrix are linearly independent.
    """
    cells = [(i, j) for i in range(w) for j in range(w)]
    A = np.zeros((2 * w - 1, w * w))
    for c, (i, j) in enumerate(cells):
        A[i, c] = 1.0
        if w + j < 2 * w - 1:
            A[w + j, c] = 1.0
    subsets = np.array(list(combinations(range(w * w), 2 * w - 1)))
    mats = A[:, subsets].transpose(1, 0, 2)
    keep = np.abs(np.linalg.det(mats)) > 0.5
    return subsets[keep], np.linalg.inv(mats[keep])


def brute_force_transport(mu, nu, D):
    """Minimum cost over every basic feasible solution of the coupling LP."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    D = np.asarray(D, dtype=float)
    w = mu.size
    if w == 1:
        return 0.0
    subsets, inv = _transport_bases(w)
    b = np.concatenate([mu, nu[:-1]])
    x = inv @ b
    feasible = np.all(x >= -1e-12, axis=1)
    costs = np.sum(x * D.ravel()[subsets], axis=1)
    return float(costs[feasible].min())


def l1(p, q):
    return sum(abs(a - b) for a, b in zip(p, q))


def cdf_transport(points, p, q):
    """Integral of |F_p - F_q| with a plain loop over sorted support points."""
    pairs = sorted(zip(points, p, q))
    total, fp, fq = 0.0, 0.0, 0.0
    for (x0, a, b), (x1, _, _) in zip(pairs, pairs[1:]):
        fp += a
        fq += b
        total += abs(fp - fq) * (x1 - x0)
    return total


def fraction_scores(rows, labels, alphabet):
    """Per-column l1 distance of class-conditional frequencies, exact."""
    n1 = sum(labels)
    n0 = len(labels) - n1
    out = []
    for j in range(len(rows[0])):
        total = Fraction(0)
        for s in alphabet:
            c0 = sum(1 for r, y in zip(rows, labels) if r[j] == s and y == 0)
            c1 = sum(1 for r, y in zip(rows, labels) if r[j] == s and y == 1)
            total += abs(Fraction(c0, n0) - Fraction(c1, n1))
        out.append(total)
    return out


# ---------------------------------------------------------------------------
# k-NN


def _dist(a, b, norm):
    diffs = [abs(x - y) for x, y in zip(a, b)]
    if norm == "l1":
        return sum(diffs)
    if norm == "l2":
        return math.sqrt(sum(d * d for d in diffs))
    return max(diffs)


def knn_predict(train_x, train_y, x, k, norm):
    """Full sort by (distance, index) then the explicit mode; ties go to 0."""
    order = sorted(range(len(train_x)), key=lambda i: (_dist(train_x[i], x, norm), i))
    votes = Counter(train_y[i] for i in order[:k])
    return 1 if votes[1] > votes[0] else 0


def knn_order(train_x, x, norm):
    return sorted(range(len(train_x)), key=lambda i: (_dist(train_x[i], x, norm), i))


# ---------------------------------------------------------------------------
# trees


def entropy2(c0, c1):
    n = c0 + c1
    return -sum((c / n) * math.log2(c / n) for c in (c0, c1) if c)


def gain_of_partition(labels, left):
    n = len(labels)
    lab_l = [y for y, g in zip(labels, left) if g]
    lab_r = [y for y, g in zip(labels, left) if not g]
    h = entropy2(labels.count(0), labels.count(1))
    hl = entropy2(lab_l.count(0), lab_l.count(1))
    hr = entropy2(lab_r.count(0), lab_r.count(1))
    return h - len(lab_l) / n * hl - len(lab_r) / n * hr


def best_gain_exhaustive(X, y, categorical):
    """Largest gain over every nontrivial partition a single rule can make."""
    X = [list(r) for r in X]
    y = list(y)
    best = None
    for j in range(len(X[0])):
        col = [r[j] for r in X]
        values = sorted(set(col))
        if categorical:
            rules = [set(s) for r in range(1, len(values)) for s in combinations(values, r)]
            masks = [[v in s for v in col] for s in rules]
        else:
            masks = [[v <= a for v in col] for a in values[:-1]]
        for mask in masks:
            g = gain_of_partition(y, mask)
            if best is None or g > best:
                best = g
    return best


# ---------------------------------------------------------------------------
# evaluation


def roc_points(scores, truth, w):
    pos = sum(truth)
    neg = len(truth) - pos
    out = []
    for i in range(w):
        a = i / (w - 1)
        tp = sum(1 for s, t in zip(scores, truth) if s >= a and t == 1)
        fp = sum(1 for s, t in zip(scores, truth) if s >= a and t == 0)
        out.append((fp / neg, tp / pos))
    return out


def rectangle_auc(points):
    return abs(sum((points[i][0] - points[i + 1][0]) * points[i + 1][1] for i in range(len(points) - 1)))
