import numpy as np
import pytest

from gwaspipe.dataset import (
    GENOTYPES,
    CategoricalDataset,
    DatasetError,
    GenotypeDataset,
    PlantedTruth,
    RealDataset,
    as_categorical,
    as_real,
    discretize,
    holdout_split,
    load_categorical_matrix,
    load_dataset,
    load_genotype_matrix,
    load_real_matrix,
    same_dataset,
    sniff_kind,
    synthesize_gwas,
    write_categorical_matrix,
    write_genotype_matrix,
    write_real_matrix,
)
from gwaspipe.mtd import score_all


def _triples(rows):
    return np.array(rows, dtype=float)


def test_load_degenerate_triples(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("2,1\n0,1,0,0\n1,0,0,1\n")
    g = load_genotype_matrix(p)
    assert (g.rows, g.cols) == (2, 1)
    assert g.labels.tolist() == [0, 1]
    assert discretize(g).cells[:, 0].tolist() == [0, 2]


def test_load_rejects_bad_sum_with_location(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("2,1\n0,1,0,0\n1,0.5,0.3,0.3\n")
    with pytest.raises(DatasetError, match=r"triple sum 1\.1 exceeds tolerance at \(1,0\)"):
        load_genotype_matrix(p)


@pytest.mark.parametrize(
    "body, pattern",
    [
        ("2,1\n0,1,0,0\n1,0,1\n", "arity|fields"),
        ("2,1\n0,1,0,0\n2,0,0,1\n", r"label .*outside"),
        ("2,1\n0,1,0,0\n", "rows"),
        ("2,1\n0,1,0,0\n1,x,0,1\n", "malformed"),
        ("two,1\n", "header"),
    ],
)
def test_load_errors(tmp_path, body, pattern):
    p = tmp_path / "g.csv"
    p.write_text(body)
    with pytest.raises(DatasetError, match=pattern):
        load_genotype_matrix(p)


def test_sum_tolerance_boundary():
    ok = _triples([[[0.5, 0.3, 0.2000005]]])
    GenotypeDataset(ok, [1])
    with pytest.raises(DatasetError):
        GenotypeDataset(_triples([[[0.5, 0.3, 0.20001]]]), [1])


@pytest.mark.parametrize(
    "triple, symbol",
    [((0.7, 0.2, 0.1), "HM"), ((0.1, 0.2, 0.7), "Hm"), ((0.4, 0.4, 0.2), "HM"),
     ((0.2, 0.4, 0.4), "He"), ((1 / 3, 1 / 3, 1 / 3), "HM"), ((0.3, 0.6, 0.1), "He")],
)
def test_discretize_argmax_and_precedence(triple, symbol):
    g = GenotypeDataset(np.array([[triple]]), [0])
    d = discretize(g)
    assert d.alphabet == GENOTYPES
    assert d.alphabet[d.cells[0, 0]] == symbol


def test_discretize_recovers_degenerate_encoding():
    rng = np.random.default_rng(3)
    codes = rng.integers(0, 3, size=(20, 7))
    g = GenotypeDataset(np.eye(3)[codes], rng.integers(0, 2, 20))
    d = discretize(g)
    assert np.array_equal(d.cells, codes)
    assert d.feature_names == g.feature_names
    assert np.array_equal(d.labels, g.labels)


def test_datasets_are_read_only():
    g, _ = synthesize_gwas(10, 3, 1, 0.5, seed=1)
    with pytest.raises(ValueError):
        g.cells[0, 0, 0] = 0.5
    with pytest.raises(ValueError):
        g.labels[0] = 1


def test_real_dataset_rejects_nonfinite():
    with pytest.raises(DatasetError, match="finite"):
        RealDataset(np.array([[1.0, np.nan]]), [0])


def test_categorical_rejects_out_of_alphabet():
    with pytest.raises(DatasetError):
        CategoricalDataset(np.array([[0, 3]]), [0], GENOTYPES)


def test_holdout_sizes_from_study():
    d = RealDataset(np.arange(3907.0)[:, None], np.zeros(3907, dtype=int))
    train, test = holdout_split(d, 2880, seed=0)
    assert (train.rows, test.rows) == (2880, 1027)


def test_holdout_boundary_and_errors():
    d = RealDataset(np.arange(10.0)[:, None], np.zeros(10, dtype=int))
    assert holdout_split(d, 9, 0)[1].rows == 1
    for bad in (0, 1, 10, 11):
        with pytest.raises(ValueError):
            holdout_split(d, bad, 0)


@pytest.mark.parametrize("seed", range(5))
def test_holdout_is_a_multiset_partition(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 60))
    x = rng.integers(0, 4, size=(n, 2)).astype(float)
    d = RealDataset(x, rng.integers(0, 2, n))
    n_train = int(rng.integers(2, n))
    train, test = holdout_split(d, n_train, seed)
    original = sorted(map(tuple, np.column_stack([d.cells, d.labels]).tolist()))
    joined = sorted(
        map(tuple, np.vstack([np.column_stack([s.cells, s.labels]) for s in (train, test)]).tolist())
    )
    assert joined == original


def test_synthesize_deterministic_and_valid():
    a, ta = synthesize_gwas(80, 12, 3, 0.7, 0.4, seed=11)
    b, tb = synthesize_gwas(80, 12, 3, 0.7, 0.4, seed=11)
    assert same_dataset(a, b) and ta == tb
    assert len(ta.informative_indices) == 3
    assert all(0 <= j < 12 for j in ta.informative_indices)
    # every triple sums to one exactly in its 6-decimal form
    micro = np.rint(a.cells * 1e6).astype(np.int64)
    assert np.all(micro.sum(axis=2) == 1_000_000)


def test_synthesize_errors():
    with pytest.raises(ValueError):
        synthesize_gwas(50, 5, 6, 0.5)
    with pytest.raises(ValueError):
        synthesize_gwas(1, 5, 1, 0.5)
    with pytest.raises(ValueError):
        synthesize_gwas(50, 5, 1, 1.5)


def test_synthesize_balance():
    g, _ = synthesize_gwas(4000, 2, 0, 0.0, balance=0.3, seed=2)
    assert abs(g.labels.mean() - 0.3) < 0.03


def test_planted_features_score_highest():
    g, truth = synthesize_gwas(2000, 50, 5, 0.8, seed=7)
    s = score_all(discretize(g))
    assert set(s.top(5)) == set(truth.informative_indices)


def test_no_effect_scores_shrink_with_n():
    means = []
    for n in (200, 3200):
        g, _ = synthesize_gwas(n, 30, 5, 0.0, seed=5)
        means.append(score_all(discretize(g)).scores.mean())
    assert means[1] < means[0] / 2
    assert means[1] < 0.1


def test_planted_truth_json_round_trip():
    _, t = synthesize_gwas(20, 6, 2, 0.3, seed=4)
    assert PlantedTruth.from_json(t.to_json()) == t


@pytest.mark.parametrize("names", [True, False])
def test_genotype_round_trip(tmp_path, names):
    g, _ = synthesize_gwas(30, 8, 2, 0.6, seed=9)
    p = tmp_path / "g.csv"
    write_genotype_matrix(g, p, names=names)
    back = load_genotype_matrix(p)
    assert np.array_equal(back.cells, g.cells)
    assert np.array_equal(back.labels, g.labels)
    assert back.feature_names == g.feature_names
    assert sniff_kind(p) == "genotype"


def test_categorical_round_trip(tmp_path):
    g, _ = synthesize_gwas(30, 8, 2, 0.6, seed=9)
    d = discretize(g)
    p = tmp_path / "c.csv"
    write_categorical_matrix(d, p)
    assert p.read_text().splitlines()[0] == "30,8,alphabet=HM|He|Hm"
    back = load_categorical_matrix(p)
    assert same_dataset(back, d)
    assert sniff_kind(p) == "categorical"


def test_categorical_rejects_misspelled_symbol(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("1,2,alphabet=HM|He|Hm\n0,HM,hm\n")
    with pytest.raises(DatasetError, match=r"\(0,1\)"):
        load_categorical_matrix(p)


def test_real_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = RealDataset(rng.normal(size=(15, 4)), rng.integers(0, 2, 15))
    p = tmp_path / "r.csv"
    write_real_matrix(d, p)
    back = load_real_matrix(p)
    assert np.array_equal(back.cells, d.cells)
    assert sniff_kind(p) == "real"
    assert same_dataset(load_dataset(p), d)


def test_conversions():
    g, _ = synthesize_gwas(10, 4, 1, 0.5, seed=1)
    r = as_real(g)
    assert r.cols == 12
    assert np.array_equal(r.cells[:, 3:6], g.cells[:, 1, :])
    assert as_categorical(g).alphabet == GENOTYPES
    with pytest.raises(DatasetError):
        as_real(discretize(g))
    with pytest.raises(DatasetError):
        as_categorical(r)
