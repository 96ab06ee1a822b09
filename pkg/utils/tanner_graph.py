# utils/tanner_graph.py
"""
Tanner graphs, alist I/O, GF(2) code checks and stopping-set machinery.

Edges are numbered by variable, then by check, so the three edges of a
degree-3 variable are contiguous. `var_edge_table` and `chk_edge_table` give
per-node edge ids padded with the sentinel id `n_edges`; message arrays used
by the decoders carry one extra slot for that sentinel.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from utils.errors import AlistParseError, UsageError


class TannerGraph:
    """Immutable bipartite graph; build it once and share it across workers."""

    def __init__(self, n: int, m: int, var_adj: Sequence[Iterable[int]]):
        if len(var_adj) != n:
            raise UsageError(f"expected {n} variable adjacency lists, got {len(var_adj)}")
        adj = []
        chk: list[list[int]] = [[] for _ in range(m)]
        for v, checks in enumerate(var_adj):
            row = sorted(int(c) for c in checks)
            if len(set(row)) != len(row):
                raise UsageError(f"variable {v} has a repeated edge")
            for c in row:
                if not 0 <= c < m:
                    raise UsageError(f"variable {v} lists check {c} outside [0, {m})")
                chk[c].append(v)
            adj.append(tuple(row))

        self.n = n
        self.m = m
        self.var_adj: tuple[tuple[int, ...], ...] = tuple(adj)
        self.chk_adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(c)) for c in chk)

        self.var_degrees = np.array([len(a) for a in self.var_adj], dtype=np.int32)
        self.chk_degrees = np.array([len(a) for a in self.chk_adj], dtype=np.int32)
        self.n_edges = int(self.var_degrees.sum())

        self.edge_var = np.repeat(np.arange(n, dtype=np.int32), self.var_degrees)
        self.edge_chk = np.array([c for a in self.var_adj for c in a], dtype=np.int32)
        edge_id = {(int(v), int(c)): e for e, (v, c) in enumerate(zip(self.edge_var, self.edge_chk))}

        dv = int(self.var_degrees.max(initial=0))
        dc = int(self.chk_degrees.max(initial=0))
        self.var_edge_table = np.full((n, max(dv, 1)), self.n_edges, dtype=np.int32)
        offsets = np.concatenate([[0], np.cumsum(self.var_degrees)])
        for v in range(n):
            self.var_edge_table[v, : self.var_degrees[v]] = np.arange(offsets[v], offsets[v + 1])
        self.chk_edge_table = np.full((m, max(dc, 1)), self.n_edges, dtype=np.int32)
        for c, vs in enumerate(self.chk_adj):
            self.chk_edge_table[c, : len(vs)] = [edge_id[(v, c)] for v in vs]

        for arr in (self.var_degrees, self.chk_degrees, self.edge_var, self.edge_chk,
                    self.var_edge_table, self.chk_edge_table):
            arr.setflags(write=False)

        self._hash = hash((n, m, self.var_adj))
        self.H = sp.csr_matrix(
            (np.ones(self.n_edges, dtype=np.uint8), (self.edge_chk, self.edge_var)), shape=(m, n)
        )

    def is_variable_regular(self, dv: int) -> bool:
        return self.n > 0 and bool(np.all(self.var_degrees == dv))

    def edges(self) -> set[tuple[int, int]]:
        return {(v, c) for v, a in enumerate(self.var_adj) for c in a}

    def dense(self) -> np.ndarray:
        return self.H.toarray().astype(np.uint8)

    def without_edge(self, v: int, c: int) -> "TannerGraph":
        adj = [list(a) for a in self.var_adj]
        adj[v].remove(c)
        return TannerGraph(self.n, self.m, adj)

    def relabeled(self, perm: Sequence[int]) -> "TannerGraph":
        """Variable i of the result is variable perm[i] of this graph."""
        return TannerGraph(self.n, self.m, [self.var_adj[p] for p in perm])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TannerGraph)
            and (self.n, self.m, self.var_adj) == (other.n, other.m, other.var_adj)
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"TannerGraph(n={self.n}, m={self.m}, edges={self.n_edges})"


# =========================
# alist I/O
# =========================

def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise AlistParseError(f"non-integer entry in {' '.join(tokens)!r}", lineno) from None


def parse_alist(text: str) -> TannerGraph:
    """Parse MacKay's alist format; zero-padded adjacency entries are ignored."""
    records = [(i, line.split()) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if len(records) < 4:
        raise AlistParseError("alist needs at least 4 header lines", records[-1][0] if records else None)

    (l1, t1), (l2, t2), (l3, t3), (l4, t4) = records[:4]
    head = _ints(t1, l1)
    if len(head) != 2 or min(head) < 1:
        raise AlistParseError("first line must be 'n m' with positive sizes", l1)
    n, m = head
    _ints(t2, l2)
    var_deg = _ints(t3, l3)
    chk_deg = _ints(t4, l4)
    if len(var_deg) != n:
        raise AlistParseError(f"expected {n} variable degrees, found {len(var_deg)}", l3)
    if len(chk_deg) != m:
        raise AlistParseError(f"expected {m} check degrees, found {len(chk_deg)}", l4)

    body = records[4:]
    if len(body) < n + m:
        where = body[-1][0] if body else l4
        raise AlistParseError(f"expected {n + m} adjacency lines, found {len(body)}", where)
    if len(body) > n + m:
        raise AlistParseError("unexpected trailing lines", body[n + m][0])

    var_adj = []
    for v, (lineno, tokens) in enumerate(body[:n]):
        entries = [x for x in _ints(tokens, lineno) if x != 0]
        if len(entries) != var_deg[v]:
            raise AlistParseError(f"variable {v + 1} lists {len(entries)} checks, degree says {var_deg[v]}", lineno)
        if any(not 1 <= x <= m for x in entries):
            raise AlistParseError(f"check index out of range [1, {m}]", lineno)
        if len(set(entries)) != len(entries):
            raise AlistParseError(f"duplicate edge for variable {v + 1}", lineno)
        var_adj.append([x - 1 for x in entries])

    edges = {(v, c) for v, a in enumerate(var_adj) for c in a}
    seen = set()
    for c, (lineno, tokens) in enumerate(body[n:]):
        entries = [x for x in _ints(tokens, lineno) if x != 0]
        if len(entries) != chk_deg[c]:
            raise AlistParseError(f"check {c + 1} lists {len(entries)} variables, degree says {chk_deg[c]}", lineno)
        if any(not 1 <= x <= n for x in entries):
            raise AlistParseError(f"variable index out of range [1, {n}]", lineno)
        if len(set(entries)) != len(entries):
            raise AlistParseError(f"duplicate edge for check {c + 1}", lineno)
        for x in entries:
            if (x - 1, c) not in edges:
                raise AlistParseError(f"edge (v{x}, c{c + 1}) missing from the variable lists", lineno)
            seen.add((x - 1, c))
    if seen != edges:
        v, c = min(edges - seen)
        raise AlistParseError(f"edge (v{v + 1}, c{c + 1}) missing from the check lists", body[n + c][0])

    return TannerGraph(n, m, var_adj)


def read_alist(path: str | Path) -> TannerGraph:
    return parse_alist(Path(path).read_text())


def write_alist(graph: TannerGraph) -> str:
    """Canonical alist: single spaces, adjacency rows zero-padded to the maximum degree."""
    dv = int(graph.var_degrees.max(initial=0))
    dc = int(graph.chk_degrees.max(initial=0))

    def row(values, width):
        return " ".join(str(v) for v in list(values) + [0] * (width - len(values)))

    lines = [
        f"{graph.n} {graph.m}",
        f"{dv} {dc}",
        " ".join(str(d) for d in graph.var_degrees),
        " ".join(str(d) for d in graph.chk_degrees),
    ]
    lines += [row([c + 1 for c in a], dv) for a in graph.var_adj]
    lines += [row([v + 1 for v in a], dc) for a in graph.chk_adj]
    return "\n".join(lines) + "\n"


def save_alist(graph: TannerGraph, path: str | Path) -> None:
    Path(path).write_text(write_alist(graph))


# =========================
# Node sets
# =========================

@dataclass(frozen=True)
class NodeSet:
    """Sorted variable indices with a role tag (error, decimated, residual, candidate)."""

    indices: tuple[int, ...]
    role: str = "candidate"

    def __post_init__(self):
        ordered = tuple(sorted(int(i) for i in self.indices))
        if len(set(ordered)) != len(ordered):
            raise UsageError(f"node set has duplicate indices: {ordered}")
        if ordered and ordered[0] < 0:
            raise UsageError(f"node set has negative index {ordered[0]}")
        object.__setattr__(self, "indices", ordered)

    @classmethod
    def of(cls, indices: Iterable[int], role: str = "candidate", n: int | None = None) -> "NodeSet":
        ns = cls(tuple(int(i) for i in indices), role)
        if n is not None and ns.indices and ns.indices[-1] >= n:
            raise UsageError(f"node index {ns.indices[-1]} outside [0, {n})")
        return ns

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, v) -> bool:
        return int(v) in set(self.indices)

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[list(self.indices)] = True
        return out

    def to_text(self) -> str:
        return " ".join(str(i) for i in self.indices)


def read_node_sets(path: str | Path, role: str = "candidate", n: int | None = None) -> list[NodeSet]:
    sets = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            sets.append(NodeSet.of((int(t) for t in line.split()), role, n))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return sets


def write_node_sets(sets: Iterable[NodeSet], path: str | Path) -> None:
    Path(path).write_text("".join(s.to_text() + "\n" for s in sets))


def _as_indices(nodes) -> list[int]:
    return list(nodes.indices) if isinstance(nodes, NodeSet) else [int(i) for i in nodes]


# =========================
# Syndrome and GF(2)
# =========================

def syndrome(graph: TannerGraph, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int32)
    if bits.shape != (graph.n,):
        raise UsageError(f"bit vector has length {bits.size}, code length is {graph.n}")
    return ((graph.H @ bits) % 2).astype(np.uint8)


def weight(bits) -> int:
    return int(np.count_nonzero(bits))


def _rref_gf2(matrix: np.ndarray) -> tuple[np.ndarray, list[int]]:
    a = (np.asarray(matrix) % 2).astype(np.uint8)
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for col in range(cols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, col])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, col])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(col)
        r += 1
    return a[:r], pivots


def gf2_rank(matrix) -> int:
    return len(_rref_gf2(matrix)[1])


def codeword_basis(graph: TannerGraph) -> np.ndarray:
    """Rows span the code (nullspace of H over GF(2)); shape (k, n)."""
    reduced, pivots = _rref_gf2(graph.dense())
    free = [c for c in range(graph.n) if c not in set(pivots)]
    basis = np.zeros((len(free), graph.n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, pc in enumerate(pivots):
            basis[i, pc] = reduced[row, f]
    return basis


def random_codeword(graph: TannerGraph, rng: np.random.Generator) -> np.ndarray:
    basis = codeword_basis(graph)
    coeffs = rng.integers(0, 2, size=basis.shape[0], dtype=np.uint8)
    return (coeffs @ basis % 2).astype(np.uint8)


def girth(graph: TannerGraph) -> float:
    """Length of the shortest cycle (BFS from every variable); inf for a forest."""
    n = graph.n
    adj = [[n + c for c in a] for a in graph.var_adj] + [list(a) for a in graph.chk_adj]
    best = math.inf
    for root in range(n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif parent[u] != w:
                    best = min(best, dist[u] + dist[w] + 1)
    return best


@dataclass
class CodeReport:
    n: int
    m: int
    rank: int
    k: int
    var_degrees: list[int]
    chk_degrees: list[int]
    girth: float
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def rows(self) -> list[tuple[str, object]]:
        return [
            ("n", self.n),
            ("m", self.m),
            ("rank", self.rank),
            ("k", self.k),
            ("variable degrees", ",".join(map(str, self.var_degrees))),
            ("check degrees", ",".join(map(str, self.chk_degrees))),
            ("girth", self.girth),
        ]


def validate_code(graph: TannerGraph, expected: dict | None = None) -> CodeReport:
    """Rank, regularity and girth; mismatches against `expected` land in `failures`."""
    rank = gf2_rank(graph.dense())
    report = CodeReport(
        n=graph.n,
        m=graph.m,
        rank=rank,
        k=graph.n - rank,
        var_degrees=sorted(set(graph.var_degrees.tolist())),
        chk_degrees=sorted(set(graph.chk_degrees.tolist())),
        girth=girth(graph),
    )
    expected = expected or {}
    if "n" in expected and expected["n"] != graph.n:
        report.failures.append(f"n = {graph.n}, expected {expected['n']}")
    if "k" in expected and expected["k"] != report.k:
        report.failures.append(f"k = {report.k} (rank {rank}), expected {expected['k']}")
    if "dv" in expected and report.var_degrees != [expected["dv"]]:
        report.failures.append(f"variable degrees {report.var_degrees} are not all {expected['dv']}")
    if "dc" in expected and report.chk_degrees != [expected["dc"]]:
        report.failures.append(f"check degrees {report.chk_degrees} are not all {expected['dc']}")
    return report


# =========================
# Stopping sets and subgraphs
# =========================

def _check_counts(graph: TannerGraph, nodes) -> np.ndarray:
    inside = np.zeros(graph.n, dtype=bool)
    inside[_as_indices(nodes)] = True
    return np.bincount(graph.edge_chk[inside[graph.edge_var]], minlength=graph.m)


def is_stopping_set(graph: TannerGraph, nodes) -> bool:
    """Every check adjacent to the set sees at least two of its members; the empty set qualifies."""
    return not bool(np.any(_check_counts(graph, nodes) == 1))


def odd_checks(graph: TannerGraph, nodes) -> int:
    return int(np.count_nonzero(_check_counts(graph, nodes) % 2))


@dataclass(frozen=True, eq=False)
class Subgraph:
    """H induced by P: local graph, the global ids of P and W = N(P), boundary edges per check."""

    variables: np.ndarray
    checks: np.ndarray
    graph: TannerGraph
    boundary: np.ndarray

    @property
    def size(self) -> int:
        return len(self.variables)


def induced_subgraph(graph: TannerGraph, nodes) -> Subgraph:
    P = sorted(set(_as_indices(nodes)))
    if not P:
        raise UsageError("induced_subgraph needs a non-empty node set")
    W = sorted({c for v in P for c in graph.var_adj[v]})
    local_chk = {c: i for i, c in enumerate(W)}
    local = TannerGraph(len(P), len(W), [[local_chk[c] for c in graph.var_adj[v]] for v in P])
    boundary = np.array(
        [graph.chk_degrees[c] - local.chk_degrees[i] for i, c in enumerate(W)], dtype=np.int32
    )
    return Subgraph(np.array(P, dtype=np.int32), np.array(W, dtype=np.int32), local, boundary)


def find_stopping_sets(
    graph: TannerGraph, max_size: int, roots: Iterable[int] | None = None, limit: int | None = None
) -> list[NodeSet]:
    """
    Bounded search for stopping sets of size <= max_size.

    Each search starts from a root and repeatedly completes the unsatisfied
    check (exactly one member inside) with the fewest options, adding only
    variables larger than the root so each set is found from its minimum.
    """
    if not 1 <= max_size <= 13:
        raise UsageError("stopping-set search size must be in [1, 13]", "--max-size")
    found: dict[tuple[int, ...], NodeSet] = {}

    def extend(members: frozenset, root: int):
        if limit is not None and len(found) >= limit:
            return
        counts: dict[int, int] = {}
        for v in members:
            for c in graph.var_adj[v]:
                counts[c] = counts.get(c, 0) + 1
        open_checks = [c for c, k in counts.items() if k == 1]
        if not open_checks:
            key = tuple(sorted(members))
            found.setdefault(key, NodeSet(key, "candidate"))
            return
        if len(members) >= max_size:
            return
        options = {
            c: [u for u in graph.chk_adj[c] if u > root and u not in members] for c in open_checks
        }
        c = min(open_checks, key=lambda x: (len(options[x]), x))
        for u in options[c]:
            extend(members | {u}, root)

    for root in (range(graph.n) if roots is None else roots):
        extend(frozenset([int(root)]), int(root))
    return sorted(found.values(), key=lambda s: (len(s), s.indices))


def grow_trapping_candidates(
    graph: TannerGraph, size: int, beam: int = 16, roots: Iterable[int] | None = None
) -> list[NodeSet]:
    """
    Beam search for connected variable sets with few odd-degree checks.

    Sets are grown from each root by adding a neighbour reached through an
    odd-degree check; each step keeps the `beam` sets with the fewest odd
    checks. Small (a, b) sets found this way are the usual error-floor supports.
    """
    def score(members: frozenset) -> int:
        counts: dict[int, int] = {}
        for v in members:
            for c in graph.var_adj[v]:
                counts[c] = counts.get(c, 0) + 1
        return sum(1 for k in counts.values() if k % 2)

    out: dict[tuple[int, ...], int] = {}
    for root in (range(graph.n) if roots is None else roots):
        frontier = [frozenset([int(root)])]
        for _ in range(size - 1):
            grown = {}
            for members in frontier:
                counts: dict[int, int] = {}
                for v in members:
                    for c in graph.var_adj[v]:
                        counts[c] = counts.get(c, 0) + 1
                for c, k in counts.items():
                    if k % 2 == 0:
                        continue
                    for u in graph.chk_adj[c]:
                        if u not in members:
                            bigger = members | {u}
                            if bigger not in grown:
                                grown[bigger] = score(bigger)
            frontier = sorted(grown, key=lambda s: (grown[s], tuple(sorted(s))))[:beam]
            if not frontier:
                break
        for members in frontier:
            if len(members) == size:
                out[tuple(sorted(members))] = score(members)
    ranked = sorted(out, key=lambda key: (out[key], key))
    return [NodeSet(key, "candidate") for key in ranked]
