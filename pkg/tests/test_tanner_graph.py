# tests/test_tanner_graph.py
import numpy as np
import pytest

from utils.errors import AlistParseError, UsageError
from utils.tanner_graph import (
    NodeSet,
    codeword_basis,
    find_stopping_sets,
    grow_trapping_candidates,
    induced_subgraph,
    is_stopping_set,
    odd_checks,
    parse_alist,
    random_codeword,
    read_node_sets,
    syndrome,
    validate_code,
    write_alist,
    write_node_sets,
)


def test_tanner_code_shape(tanner):
    assert (tanner.n, tanner.m, tanner.n_edges) == (155, 93, 465)
    assert tanner.is_variable_regular(3)
    assert set(tanner.chk_degrees.tolist()) == {5}
    assert tanner.var_adj[0] == (30, 57, 68)
    assert tanner.chk_adj[0] == (1, 33, 66, 101, 140)


def test_edge_tables_are_consistent(tanner):
    for v in range(tanner.n):
        for e in tanner.var_edge_table[v]:
            assert tanner.edge_var[e] == v
    for c in range(tanner.m):
        edges = tanner.chk_edge_table[c]
        assert sorted(tanner.edge_var[edges].tolist()) == list(tanner.chk_adj[c])
        assert set(tanner.edge_chk[edges].tolist()) == {c}


def test_validate_code(tanner):
    report = validate_code(tanner, {"n": 155, "k": 64, "dv": 3, "dc": 5})
    assert report.ok, report.failures
    assert report.rank == 91
    assert report.girth == 8
    wrong = validate_code(tanner, {"k": 65, "dc": 6})
    assert len(wrong.failures) == 2


def test_codeword_basis(tanner):
    basis = codeword_basis(tanner)
    assert basis.shape == (64, 155)
    for row in basis:
        assert not syndrome(tanner, row).any()
    cw = random_codeword(tanner, np.random.default_rng(1))
    assert not syndrome(tanner, cw).any()


def test_syndrome_length_check(tanner):
    with pytest.raises(UsageError):
        syndrome(tanner, np.zeros(10))


def test_alist_round_trip(tanner):
    assert parse_alist(write_alist(tanner)) == tanner


def _toy_alist_lines(toy_graph):
    return write_alist(toy_graph).splitlines()


@pytest.mark.parametrize(
    "lineno, replacement, fragment",
    [
        (6, "1 3 x", "non-integer"),
        (6, "1 3 3", "duplicate edge"),
        (6, "1 3 9", "out of range"),
        (10, "1 2 4", "missing from the variable lists"),
        (3, "3 3 3", "variable degrees"),
    ],
)
def test_alist_errors_name_the_line(toy_graph, lineno, replacement, fragment):
    lines = _toy_alist_lines(toy_graph)
    lines[lineno - 1] = replacement
    with pytest.raises(AlistParseError, match=fragment) as info:
        parse_alist("\n".join(lines))
    assert info.value.line == lineno
    assert str(info.value).startswith(f"line {lineno}:")


def test_alist_truncated(toy_graph):
    lines = _toy_alist_lines(toy_graph)[:-1]
    with pytest.raises(AlistParseError, match="adjacency lines"):
        parse_alist("\n".join(lines))


def test_stopping_set_basics(tanner):
    assert is_stopping_set(tanner, [])
    assert is_stopping_set(tanner, range(tanner.n))
    assert not is_stopping_set(tanner, [0])
    support = np.flatnonzero(codeword_basis(tanner)[0])
    assert is_stopping_set(tanner, support)
    assert odd_checks(tanner, support) == 0
    assert odd_checks(tanner, [0]) == 3


def test_toy_stopping_sets(toy_graph):
    found = find_stopping_sets(toy_graph, 4)
    assert [s.indices for s in found] == [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    assert all(is_stopping_set(toy_graph, s) for s in found)
    assert is_stopping_set(toy_graph, [0, 1, 2, 3])


def test_no_small_stopping_sets_at_girth_eight(tanner):
    # girth 8 with column weight 3 forces stopping sets of at least 6 variables
    assert find_stopping_sets(tanner, 5) == []


def test_stopping_set_size_bounds(tanner):
    with pytest.raises(UsageError, match="--max-size"):
        find_stopping_sets(tanner, 14)
    with pytest.raises(UsageError):
        find_stopping_sets(tanner, 0)


def test_induced_subgraph_boundary(tanner):
    P = [0, 1, 33, 66]
    sub = induced_subgraph(tanner, P)
    assert sub.variables.tolist() == P
    assert sub.graph.n == 4
    assert sub.graph.is_variable_regular(3)
    for i, c in enumerate(sub.checks):
        inside = sum(1 for v in tanner.chk_adj[c] if v in P)
        assert sub.boundary[i] == 5 - inside
        assert sub.graph.chk_degrees[i] == inside
    with pytest.raises(UsageError):
        induced_subgraph(tanner, [])


def test_trapping_candidates_are_ranked(tanner):
    found = grow_trapping_candidates(tanner, 5, beam=4, roots=range(3))
    assert found
    assert all(len(s) == 5 for s in found)
    scores = [odd_checks(tanner, s) for s in found]
    assert scores == sorted(scores)


def test_relabeled_graph(tanner):
    perm = list(range(tanner.n))[::-1]
    flipped = tanner.relabeled(perm)
    assert flipped.var_adj[0] == tanner.var_adj[154]
    assert flipped != tanner
    assert flipped.relabeled(perm) == tanner


def test_node_sets(tmp_path):
    ns = NodeSet((5, 2, 9), "error")
    assert ns.indices == (2, 5, 9)
    assert 5 in ns and 4 not in ns
    assert ns.mask(10).sum() == 3
    with pytest.raises(UsageError):
        NodeSet((1, 1))
    with pytest.raises(UsageError):
        NodeSet.of([3, 12], n=10)

    path = tmp_path / "sets.txt"
    write_node_sets([ns, NodeSet((0,))], path)
    assert path.read_text() == "2 5 9\n0\n"
    path.write_text("# candidates\n1 2 3\n\n4 5  # trailing\n")
    assert [s.indices for s in read_node_sets(path)] == [(1, 2, 3), (4, 5)]

    path.write_text("1 2\n3 x\n")
    with pytest.raises(UsageError, match=":2:"):
        read_node_sets(path)
