import io

import numpy as np
import pytest
from scipy import stats

from whimp.errors import ValidationError
from whimp.matrix import SparseColumnMatrix
from whimp.wedges import (
    build_row_sampler,
    build_row_samplers,
    row_rng,
    sample,
    wedge_weight,
    wedge_weights,
    write_wedge_weights,
)


def test_singleton_row():
    s = build_row_sampler([(7, 0.5)])
    assert s.l1_norm == 0.5
    rng = np.random.default_rng(0)
    assert {sample(s, rng) for _ in range(50)} == {7}


def test_two_column_ratio():
    s = build_row_sampler([(1, 1.0), (2, 3.0)])
    draws = s.sample_many(np.random.default_rng(1), 100_000)
    freq = np.mean(draws == 2)
    assert abs(freq - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / 100_000)
    assert set(np.unique(draws).tolist()) == {1, 2}


def test_uniform_row_chi_square():
    s = build_row_sampler([(c, 0.3) for c in range(10)])
    draws = s.sample_many(np.random.default_rng(2), 100_000)
    counts = np.bincount(draws, minlength=10)
    assert stats.chisquare(counts).pvalue > 0.01


def test_empty_row_is_inert():
    s = build_row_sampler([])
    assert s.inert and s.l1_norm == 0.0
    with pytest.raises(ValidationError):
        sample(s, np.random.default_rng(0))


def test_non_positive_weights_rejected():
    with pytest.raises(ValidationError):
        build_row_sampler([(0, 1.0), (1, 0.0)])


def test_fixed_seed_reproducible():
    s = build_row_sampler([(c, c + 1.0) for c in range(6)])
    a = s.sample_many(row_rng(5, 3, 17), 1000)
    b = s.sample_many(row_rng(5, 3, 17), 1000)
    np.testing.assert_array_equal(a, b)
    c = s.sample_many(row_rng(5, 3, 18), 1000)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("k", [1, 2, 5, 17, 32])
def test_alias_total_variation(k):
    rng = np.random.default_rng(k)
    weights = rng.pareto(1.5, size=k) + 1e-3
    s = build_row_sampler(list(zip(range(100, 100 + k), weights)))
    assert np.all((s.prob >= 0) & (s.prob <= 1))
    draws = s.sample_many(np.random.default_rng(1000 + k), 1_000_000)
    emp = np.bincount(draws - 100, minlength=k) / len(draws)
    target = weights / weights.sum()
    assert 0.5 * np.abs(emp - target).sum() < 0.005


def test_alias_table_encodes_distribution_exactly():
    # Probability mass implied by the table equals the target (no sampling).
    weights = np.array([0.1, 2.0, 0.7, 0.7, 5.5, 1e-6])
    s = build_row_sampler(list(zip(range(6), weights)))
    k = len(weights)
    mass = s.prob / k
    np.add.at(mass, s.alias, (1 - s.prob) / k)
    np.testing.assert_allclose(mass, weights / weights.sum(), atol=1e-12)


def test_wedge_weight_identity_like():
    A = SparseColumnMatrix.from_dense(np.eye(2))
    assert [wedge_weight(r, A) for r in range(2)] == [1.0, 1.0]
    assert wedge_weights(A).sum() == 2.0


def test_wedge_weight_zero_on_empty_row():
    A = SparseColumnMatrix.from_dense([[1.0, 1.0], [0.0, 0.0]])
    assert wedge_weight(1, A) == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_wedge_weights_sum_to_product_l1(seed):
    rng = np.random.default_rng(seed)
    dense = rng.random((20, 20)) * (rng.random((20, 20)) < 0.5)
    A = SparseColumnMatrix.from_dense(dense)
    brute = (A.to_dense().T @ A.to_dense()).sum()
    assert wedge_weights(A).sum() == pytest.approx(brute, rel=1e-9)


def test_row_samplers_cover_nonempty_rows():
    A = SparseColumnMatrix.from_dense([[1.0, 2.0], [0.0, 0.0], [0.0, 3.0]])
    samplers = build_row_samplers(A)
    assert sorted(samplers) == [0, 2]
    assert samplers[0].l1_norm == pytest.approx(A.row_l1_norms[0])


def test_weight_dump():
    A = SparseColumnMatrix.from_dense([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    buf = io.StringIO()
    write_wedge_weights(buf, A)
    assert buf.getvalue() == "0\t1.0\t1.0\t1.0\n1\t1.0\t1.0\t1.0\n"
