import math
import warnings

import numpy as np
import pytest

from gwaspipe.dataset import RealDataset
from gwaspipe.projection import (
    BlockPlan,
    column_signs,
    distortion_audit,
    generate_projection,
    make_block_plan,
    project,
    project_blocked,
    random_projection,
    recommended_dim,
)


def _data(n, m, seed=0):
    rng = np.random.default_rng(seed)
    return RealDataset(rng.normal(size=(n, m)), rng.integers(0, 2, n))


def test_recommended_dim_formula():
    assert recommended_dim(100, 0.25, 4) == 295
    assert recommended_dim(100, 0.25, 4) == math.ceil(4 * math.log(100) / 0.0625)


@pytest.mark.parametrize("eps", [0.5, 0.0, -0.1, 0.7])
def test_recommended_dim_rejects_epsilon(eps):
    with pytest.raises(ValueError):
        recommended_dim(int(math.e**2), eps, 4)


def test_recommended_dim_monotone_in_n():
    dims = [recommended_dim(n, 0.3, 2.0) for n in range(2, 500)]
    assert all(b >= a for a, b in zip(dims, dims[1:]))


def test_entries_are_signs_and_deterministic():
    P = generate_projection(300, 40, seed=5)
    Q = generate_projection(300, 40, seed=5)
    assert set(np.unique(P.entries).tolist()) == {-1, 1}
    assert np.array_equal(P.entries, Q.entries)
    assert not np.array_equal(P.entries, generate_projection(300, 40, seed=6).entries)


def test_entry_mean_concentrates():
    m, mp = 1000, 100
    P = generate_projection(m, mp, seed=1)
    assert abs(P.entries.mean()) < 4 / math.sqrt(m * mp)


def test_zero_dimension_rejected():
    with pytest.raises(ValueError):
        generate_projection(0, 5, 1)
    with pytest.raises(ValueError):
        generate_projection(5, 0, 1)


def test_unmaterialized_matches_materialized():
    d = _data(7, 50)
    full = generate_projection(50, 30, seed=2)
    lazy = generate_projection(50, 30, seed=2, memory_budget=100)
    assert full.materialized and not lazy.materialized
    assert np.array_equal(full.entries, lazy.entries)
    assert np.allclose(project(d, full).cells, project(d, lazy).cells, atol=1e-9)


def test_project_simple_cases():
    P = generate_projection(1, 1, seed=0)
    sign = int(P.entries[0, 0])
    out = project(RealDataset(np.array([[3.0]]), [1]), P)
    assert out.cells[0, 0] == 3.0 * sign
    assert P.scale == 1.0
    z = project(RealDataset(np.zeros((2, 10)), [0, 1]), generate_projection(10, 4, 3))
    assert np.all(z.cells == 0)
    assert z.labels.tolist() == [0, 1]


def test_project_matches_definition():
    d = _data(5, 20, seed=4)
    P = generate_projection(20, 8, seed=9)
    ref = d.cells @ P.entries.astype(float) / math.sqrt(8)
    assert np.allclose(project(d, P).cells, ref, atol=1e-12)


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        project(_data(3, 5), generate_projection(6, 2, 0))


def test_project_is_linear():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=(2, 40))
    a, b = 1.7, -0.3
    P = generate_projection(40, 25, seed=3)
    rows = RealDataset(np.vstack([x, y, a * x + b * y]), [0, 0, 0])
    px, py, pc = project(rows, P).cells
    assert np.allclose(pc, a * px + b * py, atol=1e-9)


def test_block_plan_shape():
    plan = make_block_plan(10, 3, seed=4)
    assert plan.boundaries == (0, 4, 7, 10)
    assert plan.z == 3 and len(plan.block_seeds) == 3
    with pytest.raises(ValueError):
        make_block_plan(5, 6, 0)
    with pytest.raises(ValueError):
        BlockPlan((0, 1, 5), (0, 0))
    with pytest.raises(ValueError):
        BlockPlan((0, 3, 3, 6), (0, 0, 0))


def test_blocked_single_block_equals_project():
    d = _data(6, 30)
    P = generate_projection(30, 12, seed=7)
    out = project_blocked(d, 12, make_block_plan(30, 1, 7))
    assert np.array_equal(out.cells, project(d, P).cells)


@pytest.mark.parametrize("z", [2, 4, 7, 30])
def test_blocked_equals_serial(z):
    d = _data(9, 30, seed=z)
    serial = project_blocked(d, 11, make_block_plan(30, 1, 3))
    blocked = project_blocked(d, 11, make_block_plan(30, z, 3))
    assert np.max(np.abs(serial.cells - blocked.cells)) < 1e-9


def test_blocked_worker_count_is_byte_identical():
    d = _data(20, 64, seed=1)
    plan = make_block_plan(64, 8, 5)
    ref = project_blocked(d, 16, plan, workers=1).cells.tobytes()
    for w in (2, 3, 8):
        assert project_blocked(d, 16, plan, workers=w).cells.tobytes() == ref


def test_blocked_empty_dataset():
    d = RealDataset(np.zeros((0, 5)), np.zeros(0, dtype=int))
    out = project_blocked(d, 3, make_block_plan(5, 2, 0))
    assert out.cells.shape == (0, 3)


def test_blocked_plan_mismatch():
    with pytest.raises(ValueError):
        project_blocked(_data(2, 5), 3, make_block_plan(6, 2, 0))


def test_column_streams_ignore_blocking():
    # column j's signs depend only on (seed, j)
    assert np.array_equal(column_signs(3, 17, 9), generate_projection(20, 9, 3).entries[17])


def test_random_projection_warns_when_not_reducing():
    d = _data(4, 5)
    with pytest.warns(UserWarning, match="not below"):
        out = random_projection(d, 6, seed=1)
    assert out.cols == 6
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        random_projection(d, 3, seed=1)


def test_audit_identity_and_scale_invariance():
    d = _data(12, 6, seed=2)
    rep = distortion_audit(d, d, 0.1)
    assert rep.pairs_checked == 66 and rep.pairs_within == 66 and rep.worst_ratio == 0.0
    p = random_projection(d, 4, seed=0)
    base = distortion_audit(d, p, 0.3)
    scaled = distortion_audit(
        RealDataset(d.cells * 3.5, d.labels), RealDataset(p.cells * 3.5, p.labels), 0.3
    )
    assert (base.pairs_within, base.pairs_checked) == (scaled.pairs_within, scaled.pairs_checked)
    assert base.worst_ratio == pytest.approx(scaled.worst_ratio, rel=1e-12)
    assert base.pairs_within <= base.pairs_checked


def test_audit_counts_coincident_rows_as_within():
    d = RealDataset(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]), [0, 1, 0])
    p = RealDataset(np.array([[5.0], [5.0], [0.0]]), [0, 1, 0])
    rep = distortion_audit(d, p, 0.1)
    assert rep.pairs_checked == 3
    assert rep.pairs_within == 1


def test_audit_errors():
    with pytest.raises(ValueError):
        distortion_audit(_data(3, 2), _data(4, 2), 0.2)
    with pytest.raises(ValueError):
        distortion_audit(_data(3, 2), _data(3, 2), 0.5)


def test_expected_squared_norm_preserved():
    rng = np.random.default_rng(0)
    x = rng.normal(size=200)
    x /= np.linalg.norm(x)
    d = RealDataset(x[None, :], [0])
    sq = [float(np.sum(project(d, generate_projection(200, 100, s)).cells ** 2)) for s in range(200)]
    assert 0.9 <= np.mean(sq) <= 1.1
