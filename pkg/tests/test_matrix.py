import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from whimp.errors import DomainError, IngestError, ParseError
from whimp.matrix import (
    RawGraph,
    SparseColumnMatrix,
    build_column_matrix,
    clean_degree_cap,
    ingest_edge_list,
    read_id_dictionary,
    write_id_dictionary,
)


def lines(text):
    return io.StringIO(text)


def test_ingest_three_edges():
    g = ingest_edge_list(lines("0\t1\n0\t2\n1\t2\n"))
    assert g.n_vertices == 3
    assert g.n_edges == 3
    assert g.ids == ["0", "1", "2"]


def test_ingest_empty_stream():
    g = ingest_edge_list(lines(""))
    assert (g.n_vertices, g.n_edges) == (0, 0)


def test_ingest_negative_weight_is_domain_error():
    with pytest.raises(DomainError):
        ingest_edge_list(lines("a\tb\t-1\n"))


def test_ingest_first_seen_ids_and_weights():
    g = ingest_edge_list(lines("x\ty\t2.5\ny\tz\t1\n"))
    assert g.ids == ["x", "y", "z"]
    assert g.index == {"x": 0, "y": 1, "z": 2}
    np.testing.assert_array_equal(g.weight, [2.5, 1.0])


def test_ingest_drops_zero_weights_and_counts_them():
    g = ingest_edge_list(lines("a\tb\t0\na\tc\t1.0\n"))
    assert g.n_edges == 1
    assert g.dropped_zero == 1


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError) as info:
        ingest_edge_list(lines("a\tb\n# comment\nbroken line\n"))
    assert info.value.lineno == 3


def test_non_numeric_and_non_finite_weights():
    with pytest.raises(ParseError):
        ingest_edge_list(lines("a\tb\theavy\n"))
    with pytest.raises(ParseError):
        ingest_edge_list(lines("a\tb\tinf\n"))


def test_format_is_enforced():
    with pytest.raises(ParseError):
        ingest_edge_list(lines("a\tb\t1\n"), format="pair")
    with pytest.raises(ParseError):
        ingest_edge_list(lines("a\tb\n"), format="weighted_triple")


def test_duplicate_edge_is_ingest_error():
    with pytest.raises(IngestError, match="line 3"):
        ingest_edge_list(lines("a\tb\nb\tc\na\tb\n"))


def star(center_degree):
    text = "".join(f"hub\tleaf{i}\n" for i in range(center_degree))
    return ingest_edge_list(lines(text))


def test_cap_removes_all_edges_of_over_cap_vertex_keeps_vertex():
    g = ingest_edge_list(lines("".join(f"v\tu{i}\n" for i in range(11)) + "u0\tu1\n"))
    out = clean_degree_cap(g, 10)
    assert out.n_edges == 1
    assert "v" in out.index
    assert out.n_vertices == g.n_vertices


def test_cap_noop_when_under_cap():
    g = ingest_edge_list(lines("0\t1\n0\t2\n1\t2\n"))
    out = clean_degree_cap(g, 2)
    np.testing.assert_array_equal(out.src, g.src)
    np.testing.assert_array_equal(out.dst, g.dst)


def test_star_graph_is_emptied():
    g = star(20)
    assert g.n_vertices == 21
    assert clean_degree_cap(g, 10).n_edges == 0


def test_cap_must_be_positive():
    with pytest.raises(DomainError):
        clean_degree_cap(star(3), 0)


@st.composite
def random_graphs(draw):
    n = draw(st.integers(1, 12))
    pairs = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))
    pairs = sorted(pairs)
    return RawGraph(
        ids=[str(i) for i in range(n)],
        src=np.array([p[0] for p in pairs], dtype=np.int64),
        dst=np.array([p[1] for p in pairs], dtype=np.int64),
        weight=np.ones(len(pairs)),
    )


@given(random_graphs(), st.integers(1, 8))
def test_cap_is_idempotent_and_bounds_outdegree(g, cap):
    once = clean_degree_cap(g, cap)
    twice = clean_degree_cap(once, cap)
    assert np.all(once.out_degrees() <= cap)
    np.testing.assert_array_equal(once.src, twice.src)
    np.testing.assert_array_equal(once.dst, twice.dst)


def test_unweighted_column_entries_are_inverse_sqrt_degree():
    g = ingest_edge_list(lines("a\tt\nb\tt\nc\tt\nd\tt\n"))
    m = build_column_matrix(g, "in_neighborhood")
    rows, vals = m.column(g.index["t"])
    assert len(rows) == 4
    np.testing.assert_allclose(vals, 0.5)
    assert m.column_l2_norms[g.index["t"]] == pytest.approx(2.0)


def test_identical_in_neighborhoods_give_identical_columns():
    g = ingest_edge_list(lines("a\tx\nb\tx\na\ty\nb\ty\n"))
    m = build_column_matrix(g)
    d = m.to_dense()
    x, y = g.index["x"], g.index["y"]
    np.testing.assert_array_equal(d[:, x], d[:, y])
    assert d[:, x] @ d[:, y] == pytest.approx(1.0)


def test_path_graph_in_orientation():
    g = ingest_edge_list(lines("0\t1\n1\t2\n"))
    m = build_column_matrix(g, "in_neighborhood")
    assert m.column_nnz[0] == 0
    assert m.column_l2_norms[0] == 0.0
    r, v = m.column(1)
    assert r.tolist() == [0] and v.tolist() == [1.0]
    r, v = m.column(2)
    assert r.tolist() == [1] and v.tolist() == [1.0]
    assert m.nonempty_columns.tolist() == [1, 2]


def test_out_orientation_is_transpose():
    g = ingest_edge_list(lines("0\t1\n0\t2\n1\t2\n"))
    m_out = build_column_matrix(g, "out_neighborhood")
    r, v = m_out.column(0)
    assert r.tolist() == [1, 2]
    np.testing.assert_allclose(v, 1 / np.sqrt(2))


def test_weighted_normalization_and_stored_norms():
    g = ingest_edge_list(lines("a\tt\t3\nb\tt\t4\n"))
    m = build_column_matrix(g)
    _, vals = m.column(g.index["t"])
    np.testing.assert_allclose(vals, [0.6, 0.8])
    assert m.column_l2_norms[g.index["t"]] == pytest.approx(5.0)


def random_nonneg(rng, n_rows, n_cols, density=0.3):
    m = sp.random(n_rows, n_cols, density=density, random_state=rng, data_rvs=lambda k: rng.random(k) + 0.01)
    return SparseColumnMatrix.from_scipy(m)


@pytest.mark.parametrize("seed", range(5))
def test_matrix_invariants(seed):
    rng = np.random.default_rng(seed)
    m = random_nonneg(rng, 50, 50)
    assert np.all(m.data > 0)
    for a in range(m.n_cols):
        rows, vals = m.column(a)
        assert np.all(np.diff(rows) > 0)
        if len(rows):
            assert abs(np.linalg.norm(vals) - 1.0) <= 1e-12
    dense = m.to_dense()
    np.testing.assert_allclose(m.row_l1_norms, dense.sum(axis=1), rtol=1e-9)
    gram = dense.T @ dense
    assert np.all(gram >= 0) and np.all(gram <= 1 + 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_row_norm_identity_matches_l1_of_product(seed):
    rng = np.random.default_rng(seed)
    A = random_nonneg(rng, 50, 50)
    B = random_nonneg(rng, 50, 50)
    brute = np.abs(A.to_dense().T @ B.to_dense()).sum()
    assert np.dot(A.row_l1_norms, B.row_l1_norms) == pytest.approx(brute, rel=1e-6)


def test_row_view_matches_dense():
    rng = np.random.default_rng(3)
    m = random_nonneg(rng, 20, 15)
    dense = m.to_dense()
    for r in range(m.n_rows):
        cols, vals = m.row(r)
        np.testing.assert_allclose(dense[r, cols], vals)
        assert np.count_nonzero(dense[r]) == len(cols)


def test_negative_matrix_rejected():
    with pytest.raises(DomainError):
        SparseColumnMatrix.from_dense([[1.0, -1.0]])


def test_id_dictionary_roundtrip():
    buf = io.StringIO()
    write_id_dictionary(["u", "v", "w"], buf)
    assert buf.getvalue() == "u\t0\nv\t1\nw\t2\n"
    assert read_id_dictionary(io.StringIO(buf.getvalue())) == ["u", "v", "w"]


def test_matrix_dumps(tmp_path):
    g = ingest_edge_list(lines("0\t1\n2\t1\n"))
    m = build_column_matrix(g)
    buf = io.StringIO()
    m.write_tsv(buf)
    assert buf.getvalue().splitlines()[0].split("\t")[:2] == ["1", "0"]
    m.save_npz(tmp_path / "m.npz")
    back = SparseColumnMatrix.load_npz(tmp_path / "m.npz")
    np.testing.assert_array_equal(back.to_dense(), m.to_dense())
    np.testing.assert_array_equal(back.row_l1_norms, m.row_l1_norms)
