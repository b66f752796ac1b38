"""Data containers, CSV ingestion, discretization and a synthetic generator.

Three dataset kinds share one row-selection interface (``take``):

* :class:`GenotypeDataset` -- per-SNP probability triples ``(p, q, r)``.
* :class:`CategoricalDataset` -- symbol indices into a finite alphabet.
* :class:`RealDataset` -- real-valued feature matrix.

All arrays are made read-only on construction so datasets can be shared
between workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

GENOTYPES = ("HM", "He", "Hm")
SUM_TOLERANCE = 1e-6
DECIMALS = 6
# slack for float rounding on top of the declared tolerance
_FLOAT_SLACK = 1e-12


class DatasetError(ValueError):
    """Invalid dataset content, optionally located at a row/column."""

    def __init__(self, message, row=None, col=None):
        if row is not None:
            where = f"({row},{col})" if col is not None else f"(row {row})"
            message = f"{message} at {where}"
        super().__init__(message)
        self.row = row
        self.col = col


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_labels(labels, rows):
    labels = np.asarray(labels)
    if labels.shape != (rows,):
        raise DatasetError(f"expected {rows} labels, got shape {labels.shape}")
    bad = np.flatnonzero((labels != 0) & (labels != 1))
    if bad.size:
        raise DatasetError(f"label {labels[bad[0]]!r} outside {{0,1}}", row=int(bad[0]))
    return _frozen(labels, np.int8)


def _names(feature_names, cols, prefix):
    if feature_names is None:
        return tuple(f"{prefix}{j + 1}" for j in range(cols))
    names = tuple(str(s) for s in feature_names)
    if len(names) != cols:
        raise DatasetError(f"expected {cols} feature names, got {len(names)}")
    return names


@dataclass(frozen=True, eq=False)
class GenotypeDataset:
    """``n x m`` genotype probability triples with binary labels.

    ``cells`` has shape ``(n, m, 3)``; the last axis holds the probabilities
    of homozygous-major, heterozygous and homozygous-minor.
    """

    cells: np.ndarray
    labels: np.ndarray
    feature_names: tuple = None

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.ndim != 3 or cells.shape[2] != 3:
            raise DatasetError(f"genotype cells must have shape (n, m, 3), got {cells.shape}")
        n, m, _ = cells.shape
        if not np.all(np.isfinite(cells)):
            r, c = np.argwhere(~np.isfinite(cells).all(axis=2))[0]
            raise DatasetError("non-finite probability", row=int(r), col=int(c))
        out = (cells < 0) | (cells > 1)
        if out.any():
            r, c, _ = np.argwhere(out)[0]
            raise DatasetError("probability outside [0, 1]", row=int(r), col=int(c))
        sums = cells.sum(axis=2)
        bad = np.abs(sums - 1.0) > SUM_TOLERANCE + _FLOAT_SLACK
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DatasetError(
                f"triple sum {sums[r, c]:.6g} exceeds tolerance", row=int(r), col=int(c)
            )
        object.__setattr__(self, "cells", _frozen(cells, np.float64))
        object.__setattr__(self, "labels", _check_labels(self.labels, n))
        object.__setattr__(self, "feature_names", _names(self.feature_names, m, "snp"))

    @property
    def rows(self):
        return self.cells.shape[0]

    @property
    def cols(self):
        return self.cells.shape[1]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return GenotypeDataset(self.cells[idx], self.labels[idx], self.feature_names)

    def flatten(self):
        """Real view with ``3m`` columns ``p_1, q_1, r_1, ..., p_m, q_m, r_m``."""
        names = [f"{s}.{g}" for s in self.feature_names for g in ("p", "q", "r")]
        return RealDataset(self.cells.reshape(self.rows, 3 * self.cols), self.labels, names)


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """``n x m`` matrix of indices into ``alphabet`` with binary labels."""

    cells: np.ndarray
    labels: np.ndarray
    alphabet: tuple = GENOTYPES
    feature_names: tuple = None

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise DatasetError(f"categorical cells must be 2-D, got shape {cells.shape}")
        alphabet = tuple(str(s) for s in self.alphabet)
        if not alphabet or len(set(alphabet)) != len(alphabet):
            raise DatasetError(f"alphabet must be nonempty with distinct symbols: {alphabet}")
        if cells.size and not np.issubdtype(cells.dtype, np.integer):
            raise DatasetError("categorical cells must be integer symbol indices")
        bad = (cells < 0) | (cells >= len(alphabet))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DatasetError(f"symbol index {cells[r, c]} outside alphabet", row=int(r), col=int(c))
        dtype = np.int8 if len(alphabet) <= 127 else np.int32
        object.__setattr__(self, "cells", _frozen(cells, dtype))
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "labels", _check_labels(self.labels, cells.shape[0]))
        object.__setattr__(self, "feature_names", _names(self.feature_names, cells.shape[1], "f"))

    @property
    def rows(self):
        return self.cells.shape[0]

    @property
    def cols(self):
        return self.cells.shape[1]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return CategoricalDataset(self.cells[idx], self.labels[idx], self.alphabet, self.feature_names)

    def select_columns(self, cols):
        cols = np.asarray(cols, dtype=np.intp)
        names = [self.feature_names[j] for j in cols]
        return CategoricalDataset(self.cells[:, cols], self.labels, self.alphabet, names)


@dataclass(frozen=True, eq=False)
class RealDataset:
    """``n x m`` real matrix with binary labels; every cell must be finite."""

    cells: np.ndarray
    labels: np.ndarray
    feature_names: tuple = None

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.ndim != 2:
            raise DatasetError(f"real cells must be 2-D, got shape {cells.shape}")
        if not np.all(np.isfinite(cells)):
            r, c = np.argwhere(~np.isfinite(cells))[0]
            raise DatasetError("non-finite value", row=int(r), col=int(c))
        object.__setattr__(self, "cells", _frozen(cells, np.float64))
        object.__setattr__(self, "labels", _check_labels(self.labels, cells.shape[0]))
        object.__setattr__(self, "feature_names", _names(self.feature_names, cells.shape[1], "x"))

    @property
    def rows(self):
        return self.cells.shape[0]

    @property
    def cols(self):
        return self.cells.shape[1]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return RealDataset(self.cells[idx], self.labels[idx], self.feature_names)


AnyDataset = Union[GenotypeDataset, CategoricalDataset, RealDataset]


@dataclass(frozen=True)
class PlantedTruth:
    informative_indices: tuple
    effect_size: float
    seed: int = 0
    minor_allele_freqs: tuple = field(default=(), repr=False)

    def to_json(self):
        return json.dumps(
            {
                "informative_indices": list(self.informative_indices),
                "effect_size": self.effect_size,
                "seed": self.seed,
                "minor_allele_freqs": list(self.minor_allele_freqs),
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            tuple(d["informative_indices"]),
            float(d["effect_size"]),
            int(d.get("seed", 0)),
            tuple(d.get("minor_allele_freqs", ())),
        )


# ---------------------------------------------------------------------------
# discretization and splitting


def discretize(g: GenotypeDataset) -> CategoricalDataset:
    """Assign each SNP to its most probable genotype.

    Ties go to the earlier genotype in ``HM > He > Hm`` order, which is what
    ``argmax`` does with the first maximum.
    """
    cells = np.argmax(g.cells, axis=2).astype(np.int8)
    return CategoricalDataset(cells, g.labels, GENOTYPES, g.feature_names)


def holdout_split(d, n_train: int, seed: int):
    """Shuffle rows with ``seed`` and cut them into ``(train, test)``."""
    n = d.rows
    if not (1 < n_train < n):
        raise ValueError(f"n_train must satisfy 1 < n_train < {n}, got {n_train}")
    perm = np.random.default_rng(seed).permutation(n)
    return d.take(perm[:n_train]), d.take(perm[n_train:])


# ---------------------------------------------------------------------------
# synthetic data


def _hwe(f):
    """Hardy-Weinberg genotype frequencies for minor allele frequency ``f``."""
    f = np.asarray(f, dtype=np.float64)
    return np.stack([(1 - f) ** 2, 2 * f * (1 - f), f**2], axis=-1)


def synthesize_gwas(n, m, k_informative, effect, balance=0.5, seed=0, max_noise=0.4):
    """Generate a genotype dataset with a planted class signal.

    Every SNP gets a minor allele frequency ``f ~ U(0.05, 0.3)`` and a
    Hardy-Weinberg genotype profile ``h = ((1-f)^2, 2f(1-f), f^2)``. Class 0
    always draws genotypes from ``h``. For the ``k_informative`` planted SNPs
    class 1 draws from ``(1 - effect) * h + effect * reversed(h)``, so the
    l1 gap between the class profiles is ``2 * effect * |1 - 2f|``
    (at least ``0.8 * effect``). Noise SNPs use ``h`` for both classes.

    A called genotype ``g`` becomes a soft probability triple
    ``(1 - c) * onehot(g) + c * dirichlet(1, 1, 1)`` with ``c ~ U(0, max_noise)``;
    ``max_noise < 0.5`` keeps ``g`` the unique argmax. Triples are quantized
    to 6 decimals with an exact decimal sum of one.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if not (0 <= k_informative <= m):
        raise ValueError(f"k_informative must be in [0, m={m}], got {k_informative}")
    if not (0.0 <= effect <= 1.0):
        raise ValueError(f"effect must be in [0, 1], got {effect}")
    if not (0.0 < balance < 1.0):
        raise ValueError(f"balance must be in (0, 1), got {balance}")
    if not (0.0 <= max_noise < 0.5):
        raise ValueError(f"max_noise must be in [0, 0.5), got {max_noise}")

    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < balance).astype(np.int8)
    maf = rng.uniform(0.05, 0.3, size=m)
    informative = np.sort(rng.choice(m, size=k_informative, replace=False))

    profile0 = _hwe(maf)
    profile1 = profile0.copy()
    profile1[informative] = (1 - effect) * profile0[informative] + effect * profile0[informative, ::-1]

    profiles = np.where(labels[:, None, None] == 1, profile1[None], profile0[None])
    cum = np.cumsum(profiles, axis=2)
    u = rng.random((n, m, 1))
    called = np.minimum((u > cum[:, :, :2]).sum(axis=2), 2)

    c = rng.uniform(0.0, max_noise, size=(n, m, 1))
    noise = rng.dirichlet(np.ones(3), size=(n, m))
    soft = (1 - c) * np.eye(3)[called] + c * noise

    scale = 10**DECIMALS
    p = np.rint(soft[:, :, 0] * scale).astype(np.int64)
    q = np.rint(soft[:, :, 1] * scale).astype(np.int64)
    q = np.minimum(q, scale - p)
    r = scale - p - q
    cells = np.stack([p, q, r], axis=2) / scale

    truth = PlantedTruth(
        tuple(int(j) for j in informative),
        float(effect),
        int(seed),
        tuple(round(float(f), 12) for f in maf),
    )
    return GenotypeDataset(cells, labels), truth


# ---------------------------------------------------------------------------
# CSV formats

PathLike = Union[str, Path]


def _fmt(x):
    return f"{x:.{DECIMALS}f}"


def _names_line(names):
    return "label," + ",".join(names)


def write_genotype_matrix(g: GenotypeDataset, path: PathLike, names=True):
    lines = [f"{g.rows},{g.cols}"]
    if names:
        lines.append(_names_line(g.feature_names))
    for i in range(g.rows):
        vals = ",".join(_fmt(v) for v in g.cells[i].ravel())
        lines.append(f"{int(g.labels[i])},{vals}" if g.cols else f"{int(g.labels[i])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_categorical_matrix(d: CategoricalDataset, path: PathLike, names=True):
    lines = [f"{d.rows},{d.cols},alphabet={'|'.join(d.alphabet)}"]
    if names:
        lines.append(_names_line(d.feature_names))
    for i in range(d.rows):
        syms = ",".join(d.alphabet[s] for s in d.cells[i])
        lines.append(f"{int(d.labels[i])},{syms}" if d.cols else f"{int(d.labels[i])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_real_matrix(d: RealDataset, path: PathLike, names=True):
    lines = [f"{d.rows},{d.cols}"]
    if names:
        lines.append(_names_line(d.feature_names))
    for i in range(d.rows):
        vals = ",".join(repr(float(v)) for v in d.cells[i])
        lines.append(f"{int(d.labels[i])},{vals}" if d.cols else f"{int(d.labels[i])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line, path):
    parts = [s.strip() for s in line.strip().split(",")]
    alphabet = None
    if len(parts) == 3 and parts[2].startswith("alphabet="):
        alphabet = tuple(parts[2][len("alphabet="):].split("|"))
        parts = parts[:2]
    if len(parts) != 2:
        raise DatasetError(f"{path}: header must be 'n,m' or 'n,m,alphabet=...', got {line.strip()!r}")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise DatasetError(f"{path}: non-integer header {line.strip()!r}") from None
    if n < 0 or m < 0:
        raise DatasetError(f"{path}: negative dimensions in header")
    return n, m, alphabet


def _read_body(path):
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    n, m, alphabet = _parse_header(lines[0], path)
    body = [ln.strip().split(",") for ln in lines[1:]]
    names = None
    if body and body[0][0].strip() not in ("0", "1"):
        first = [s.strip() for s in body[0]]
        names = first[1:] if len(first) == m + 1 else first
        if len(names) != m:
            raise DatasetError(f"{path}: feature-name line has {len(names)} names, expected {m}")
        body = body[1:]
    if len(body) != n:
        raise DatasetError(f"{path}: header declares {n} rows, found {len(body)}")
    return n, m, alphabet, names, body


def _parse_label(tok, i):
    tok = tok.strip()
    if tok not in ("0", "1"):
        raise DatasetError(f"label {tok!r} outside {{0,1}}", row=i)
    return int(tok)


def _parse_float(tok, i, j):
    try:
        v = float(tok)
    except ValueError:
        raise DatasetError(f"malformed number {tok.strip()!r}", row=i, col=j) from None
    return v


def load_genotype_matrix(path: PathLike) -> GenotypeDataset:
    n, m, alphabet, names, body = _read_body(path)
    if alphabet is not None:
        raise DatasetError(f"{path}: categorical header in a genotype file")
    cells = np.empty((n, m, 3))
    labels = np.empty(n, dtype=np.int8)
    for i, toks in enumerate(body):
        if len(toks) != 1 + 3 * m:
            raise DatasetError(f"expected {1 + 3 * m} fields, got {len(toks)}", row=i)
        labels[i] = _parse_label(toks[0], i)
        for c in range(m):
            trip = [_parse_float(toks[1 + 3 * c + t], i, c) for t in range(3)]
            s = math.fsum(trip)
            if abs(s - 1.0) > SUM_TOLERANCE + _FLOAT_SLACK:
                raise DatasetError(f"triple sum {s:.6g} exceeds tolerance", row=i, col=c)
            cells[i, c] = trip
    return GenotypeDataset(cells, labels, names)


def load_categorical_matrix(path: PathLike) -> CategoricalDataset:
    n, m, alphabet, names, body = _read_body(path)
    if alphabet is None:
        raise DatasetError(f"{path}: categorical header must carry 'alphabet=...'")
    index = {s: k for k, s in enumerate(alphabet)}
    cells = np.empty((n, m), dtype=np.int32)
    labels = np.empty(n, dtype=np.int8)
    for i, toks in enumerate(body):
        if len(toks) != 1 + m:
            raise DatasetError(f"expected {1 + m} fields, got {len(toks)}", row=i)
        labels[i] = _parse_label(toks[0], i)
        for j, tok in enumerate(toks[1:]):
            sym = tok.strip()
            if sym not in index:
                raise DatasetError(f"unknown symbol {sym!r}", row=i, col=j)
            cells[i, j] = index[sym]
    return CategoricalDataset(cells, labels, alphabet, names)


def load_real_matrix(path: PathLike) -> RealDataset:
    n, m, alphabet, names, body = _read_body(path)
    if alphabet is not None:
        raise DatasetError(f"{path}: categorical header in a real-matrix file")
    cells = np.empty((n, m))
    labels = np.empty(n, dtype=np.int8)
    for i, toks in enumerate(body):
        if len(toks) != 1 + m:
            raise DatasetError(f"expected {1 + m} fields, got {len(toks)}", row=i)
        labels[i] = _parse_label(toks[0], i)
        cells[i] = [_parse_float(t, i, j) for j, t in enumerate(toks[1:])]
    return RealDataset(cells, labels, names)


def sniff_kind(path: PathLike) -> str:
    """Return ``"genotype"``, ``"categorical"`` or ``"real"`` for a CSV file."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        n, m, alphabet = _parse_header(header, path)
        if alphabet is not None:
            return "categorical"
        for line in fh:
            toks = line.strip().split(",")
            if not line.strip():
                continue
            if toks[0].strip() not in ("0", "1"):
                continue  # feature-name line
            if m > 0 and len(toks) == 1 + 3 * m:
                return "genotype"
            return "real"
    return "real"


def load_dataset(path: PathLike) -> AnyDataset:
    kind = sniff_kind(path)
    loader = {
        "genotype": load_genotype_matrix,
        "categorical": load_categorical_matrix,
        "real": load_real_matrix,
    }[kind]
    return loader(path)


def write_dataset(d: AnyDataset, path: PathLike, names=True):
    if isinstance(d, GenotypeDataset):
        write_genotype_matrix(d, path, names)
    elif isinstance(d, CategoricalDataset):
        write_categorical_matrix(d, path, names)
    elif isinstance(d, RealDataset):
        write_real_matrix(d, path, names)
    else:
        raise TypeError(f"not a dataset: {type(d).__name__}")


def same_dataset(a: AnyDataset, b: AnyDataset) -> bool:
    """Field-by-field equality (datasets compare by identity otherwise)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, CategoricalDataset) and a.alphabet != b.alphabet:
        return False
    return (
        a.feature_names == b.feature_names
        and np.array_equal(a.labels, b.labels)
        and a.cells.shape == b.cells.shape
        and np.array_equal(a.cells, b.cells)
    )


def as_categorical(d: AnyDataset) -> CategoricalDataset:
    if isinstance(d, GenotypeDataset):
        return discretize(d)
    if isinstance(d, CategoricalDataset):
        return d
    raise DatasetError("expected genotype or categorical data, got a real matrix")


def as_real(d: AnyDataset) -> RealDataset:
    if isinstance(d, GenotypeDataset):
        return d.flatten()
    if isinstance(d, RealDataset):
        return d
    raise DatasetError("expected genotype or real-valued data, got a categorical matrix")

