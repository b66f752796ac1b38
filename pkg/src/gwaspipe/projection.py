"""Johnson-Lindenstrauss random projections with +-1 entries.

Row ``j`` of the ``m x m'`` sign matrix (the weights applied to input column
``j``) comes from its own Philox stream keyed by ``(seed, j)``. Any column
partition therefore regenerates exactly the same matrix, which is what makes
the blocked product equal to the serial one.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .dataset import RealDataset

# int8 entries held in memory before switching to on-the-fly regeneration
DEFAULT_MEMORY_BUDGET = 1 << 27
_MAX_SEED = (1 << 64) - 1


def recommended_dim(n: int, epsilon: float, C: float = 4.0) -> int:
    """Target dimension ``ceil(C * ln(n) / epsilon**2)``."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not (0.0 < epsilon < 0.5):
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    return math.ceil(C * math.log(n) / epsilon**2)


def _check_seed(seed):
    if not (0 <= int(seed) <= _MAX_SEED):
        raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")
    return int(seed)


def column_signs(seed: int, col: int, m_prime: int) -> np.ndarray:
    """Unscaled +-1 weights of input column ``col`` (length ``m_prime``)."""
    bits = np.random.Generator(np.random.Philox(key=[seed, col])).integers(
        0, 2, size=m_prime, dtype=np.int8
    )
    return (2 * bits - 1).astype(np.int8)


def sign_block(seed: int, start: int, stop: int, m_prime: int) -> np.ndarray:
    """Rows ``start:stop`` of the unscaled sign matrix."""
    out = np.empty((stop - start, m_prime), dtype=np.int8)
    for j in range(start, stop):
        out[j - start] = column_signs(seed, j, m_prime)
    return out


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """Seeded ``in_dim x out_dim`` sign matrix, scaled by ``1/sqrt(out_dim)``.

    ``entries`` is materialized only when the matrix fits in
    ``memory_budget`` int8 cells; otherwise :func:`project` regenerates
    column strips from the seed.
    """

    in_dim: int
    out_dim: int
    seed: int
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"dimensions must be positive, got {self.in_dim}x{self.out_dim}")
        object.__setattr__(self, "seed", _check_seed(self.seed))
        entries = None
        if self.in_dim * self.out_dim <= self.memory_budget:
            entries = sign_block(self.seed, 0, self.in_dim, self.out_dim)
            entries.setflags(write=False)
        object.__setattr__(self, "_entries", entries)

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.out_dim)

    @property
    def materialized(self):
        return self._entries is not None

    @property
    def entries(self):
        if self._entries is not None:
            return self._entries
        return sign_block(self.seed, 0, self.in_dim, self.out_dim)

    def rows(self, start, stop):
        if self._entries is not None:
            return self._entries[start:stop]
        return sign_block(self.seed, start, stop, self.out_dim)


def generate_projection(m: int, m_prime: int, seed: int, memory_budget=DEFAULT_MEMORY_BUDGET):
    return ProjectionMatrix(int(m), int(m_prime), seed, memory_budget)


def project(d: RealDataset, P: ProjectionMatrix) -> RealDataset:
    if d.cols != P.in_dim:
        raise ValueError(f"dataset has {d.cols} columns, projection expects {P.in_dim}")
    X = d.cells
    if P.materialized:
        out = X @ P.entries.astype(np.float64)
    else:
        out = np.zeros((d.rows, P.out_dim))
        strip = max(1, P.memory_budget // P.out_dim)
        for a in range(0, P.in_dim, strip):
            b = min(P.in_dim, a + strip)
            out += X[:, a:b] @ P.rows(a, b).astype(np.float64)
    return RealDataset(out * P.scale, d.labels)


@dataclass(frozen=True)
class BlockPlan:
    """Column partition of the input into ``z`` near-equal blocks.

    ``block_seeds[i]`` keys the sign streams of block ``i``. Every block uses
    the master seed, because the entry schedule is keyed per column.
    """

    boundaries: tuple
    block_seeds: tuple

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError(f"boundaries must start at 0 and strictly increase: {b}")
        widths = [y - x for x, y in zip(b, b[1:])]
        if max(widths) - min(widths) > 1:
            raise ValueError(f"block widths differ by more than 1: {widths}")
        if len(self.block_seeds) != len(b) - 1:
            raise ValueError("need one seed per block")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "block_seeds", tuple(_check_seed(s) for s in self.block_seeds))

    @property
    def z(self):
        return len(self.boundaries) - 1

    @property
    def m(self):
        return self.boundaries[-1]

    def blocks(self):
        return list(zip(self.boundaries, self.boundaries[1:], self.block_seeds))


def make_block_plan(m: int, z: int, seed: int) -> BlockPlan:
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if not (1 <= z <= m):
        raise ValueError(f"z must lie in [1, m={m}], got {z}")
    base, extra = divmod(m, z)
    bounds = [0]
    for i in range(z):
        bounds.append(bounds[-1] + base + (1 if i < extra else 0))
    seed = _check_seed(seed)
    return BlockPlan(tuple(bounds), (seed,) * z)


def project_blocked(d: RealDataset, m_prime: int, plan: BlockPlan, workers: int = 1) -> RealDataset:
    """Sum of per-block products ``M_i @ R_i``, scaled by ``1/sqrt(m')``.

    Blocks run on up to ``workers`` threads; partial products are summed in
    ascending block order once all are done, so the result does not depend
    on scheduling.
    """
    if m_prime < 1:
        raise ValueError(f"m_prime must be positive, got {m_prime}")
    if plan.m != d.cols:
        raise ValueError(f"plan covers {plan.m} columns, dataset has {d.cols}")
    X = d.cells

    def block_product(block):
        a, b, seed = block
        return X[:, a:b] @ sign_block(seed, a, b, m_prime).astype(np.float64)

    blocks = plan.blocks()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(block_product, blocks))
    else:
        partials = [block_product(b) for b in blocks]

    out = np.zeros((d.rows, m_prime))
    for part in partials:
        out += part
    return RealDataset(out * (1.0 / math.sqrt(m_prime)), d.labels)


def random_projection(d: RealDataset, m_prime: int, seed: int, z: int = 1, workers: int = 1):
    """Convenience wrapper: plan ``z`` blocks over ``d`` and project."""
    if m_prime >= d.cols:
        warnings.warn(
            f"target dimension {m_prime} is not below the input dimension {d.cols}",
            stacklevel=2,
        )
    return project_blocked(d, m_prime, make_block_plan(d.cols, z, seed), workers)


@dataclass(frozen=True)
class DistortionReport:
    epsilon: float
    pairs_checked: int
    pairs_within: int
    worst_ratio: float

    @property
    def fraction_within(self):
        return self.pairs_within / self.pairs_checked if self.pairs_checked else 1.0


def distortion_audit(original: RealDataset, projected: RealDataset, epsilon: float) -> DistortionReport:
    """Check every unordered row pair for ``(1 +- epsilon)`` distance distortion.

    ``worst_ratio`` is ``max |proj/orig - 1|`` over pairs at nonzero original
    distance; coincident rows always count as within.
    """
    if original.rows != projected.rows:
        raise ValueError(f"row counts differ: {original.rows} vs {projected.rows}")
    if not (0.0 < epsilon < 0.5):
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if original.rows < 2:
        return DistortionReport(epsilon, 0, 0, 0.0)
    d0 = pdist(original.cells)
    d1 = pdist(projected.cells)
    zero = d0 == 0
    within = zero | ((d1 >= (1 - epsilon) * d0) & (d1 <= (1 + epsilon) * d0))
    pos = ~zero
    worst = float(np.max(np.abs(d1[pos] / d0[pos] - 1))) if pos.any() else 0.0
    return DistortionReport(epsilon, int(d0.size), int(within.sum()), worst)
