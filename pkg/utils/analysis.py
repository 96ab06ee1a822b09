# utils/analysis.py
"""
Subgraph analysis under the isolation assumption, critical numbers and
classification of decoder failures against the residual graph.

The exterior of a subgraph H is modelled as an error-free tree: at
iteration k every boundary edge (an edge between a check of W = N(P) and a
variable outside P) carries the all-correct message m_k of
`saturating_sequence`. Convergence means every variable of P decides 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Iterable, Iterator

import numpy as np
from joblib import Parallel, delayed

from utils.decimation import DecimationTrace
from utils.errors import UsageError
from utils.faid import DecodeOutcome, IterationSnapshot, engine_for
from utils.levels import VariableUpdateRule, extrinsic_check_matrix, saturating_sequence
from utils.tanner_graph import NodeSet, Subgraph, TannerGraph, _check_counts, is_stopping_set

logger = logging.getLogger(__name__)

SUBGRAPH_CAP = 16
CHUNK = 256


@dataclass(frozen=True)
class IsolatedInstance:
    """Errors are global variable ids and must lie in the subgraph's P."""

    subgraph: Subgraph
    rule: VariableUpdateRule
    errors: tuple[int, ...] = ()
    max_iter: int = 100
    cap: int = SUBGRAPH_CAP

    def __post_init__(self):
        if self.subgraph.size > self.cap:
            raise UsageError(f"subgraph has {self.subgraph.size} variables, cap is {self.cap}")
        if self.max_iter < 1:
            raise UsageError("isolation decoding needs at least one iteration")
        members = set(self.subgraph.variables.tolist())
        stray = [v for v in self.errors if v not in members]
        if stray:
            raise UsageError(f"error nodes {stray} are not in the subgraph")

    def local_received(self) -> np.ndarray:
        pos = {int(v): i for i, v in enumerate(self.subgraph.variables)}
        received = np.zeros(self.subgraph.size, dtype=np.uint8)
        received[[pos[int(v)] for v in self.errors]] = 1
        return received


def _boundary_table(subgraph: Subgraph) -> np.ndarray:
    """Check rows of local edge ids, then one slot per boundary edge (id E+1), padded with E."""
    local = subgraph.graph
    E = local.n_edges
    width = int(subgraph.boundary.max(initial=0))
    extra = np.full((local.m, width), E, dtype=np.int64)
    for c, b in enumerate(subgraph.boundary):
        extra[c, :b] = E + 1
    return np.hstack([local.chk_edge_table.astype(np.int64), extra])


def isolation_decode(instance: IsolatedInstance, trace: bool = False) -> DecodeOutcome:
    sub = instance.subgraph
    rule = instance.rule
    s = rule.s
    engine = engine_for(sub.graph)
    table = rule.table()
    E = sub.graph.n_edges
    received = instance.local_received()
    aug = _boundary_table(sub)
    internal = aug < E
    mbar = saturating_sequence(rule, instance.max_iter)
    snapshots: list[IterationSnapshot] | None = [] if trace else None

    if not received.any():
        return DecodeOutcome(True, received.copy(), 0, "isolation", snapshots)

    c2v = np.zeros(E + 1, dtype=np.int8)
    c2v[-1] = s
    bits = received.copy()
    for k in range(1, instance.max_iter + 1):
        v2c = engine.variable_pass(table, received, c2v)
        fed = np.append(v2c, np.int8(mbar[k - 1]))
        ext = extrinsic_check_matrix(fed[aug], s)
        c2v = np.empty(E + 1, dtype=np.int8)
        c2v[aug[internal]] = ext[internal]
        c2v[-1] = s
        bits = engine.decide(c2v, received)
        if snapshots is not None:
            snapshots.append(IterationSnapshot(k, v2c[:-1].copy(), c2v[:-1].copy(), bits.copy()))
        if not bits.any():
            return DecodeOutcome(True, bits, k, "isolation", snapshots)
    return DecodeOutcome(False, bits, instance.max_iter, "isolation", snapshots)


# =========================
# Critical number
# =========================

@dataclass(frozen=True)
class CriticalNumber:
    """`value` is None when no pattern up to `max_weight` fails."""

    value: int | None
    max_weight: int
    witness: tuple[int, ...] | None = None

    @property
    def exceeds(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return f"> {self.max_weight}" if self.value is None else str(self.value)


def _chunks(it: Iterator, size: int) -> Iterator[list]:
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def _first_failure(subgraph, rule, supports, max_iter) -> tuple[int, ...] | None:
    for support in supports:
        outcome = isolation_decode(IsolatedInstance(subgraph, rule, support, max_iter))
        if not outcome.converged:
            return support
    return None


def critical_number(
    subgraph: Subgraph,
    rule: VariableUpdateRule,
    max_weight: int = 8,
    max_iter: int = 100,
    n_jobs: int = 1,
    cap: int = SUBGRAPH_CAP,
) -> CriticalNumber:
    """Smallest error weight inside P that defeats the rule under isolation."""
    if subgraph.size > cap:
        raise UsageError(f"subgraph has {subgraph.size} variables, cap is {cap}")
    max_weight = min(max_weight, subgraph.size)
    nodes = subgraph.variables.tolist()
    for w in range(1, max_weight + 1):
        blocks = _chunks(combinations(nodes, w), CHUNK)
        # blocks follow lexicographic order, so the first hit is the smallest failing support
        if n_jobs == 1:
            hits = (_first_failure(subgraph, rule, block, max_iter) for block in blocks)
            witness = next((h for h in hits if h is not None), None)
        else:
            hits = Parallel(n_jobs=n_jobs, backend="loky")(
                delayed(_first_failure)(subgraph, rule, block, max_iter) for block in blocks
            )
            witness = min((h for h in hits if h is not None), default=None)
        if witness is not None:
            logger.debug("❌ weight %d fails on %s", w, witness)
            return CriticalNumber(w, max_weight, witness)
    return CriticalNumber(None, max_weight)


def guarantee_on_subgraph(
    subgraph: Subgraph, rule: VariableUpdateRule, max_weight: int = 8, n_jobs: int = 1
) -> int:
    """Errors guaranteed corrected inside H (critical number minus one, at least max_weight if none fails)."""
    cn = critical_number(subgraph, rule, max_weight, n_jobs=n_jobs)
    return cn.max_weight if cn.value is None else cn.value - 1


# =========================
# Failure classification
# =========================

@dataclass
class FailureRecord:
    support: tuple[int, ...]
    decimated_error: bool
    final_rule_index: int
    residual: NodeSet
    residual_is_stopping_set: bool
    correct_nodes_supported: bool
    error_sees_degree_one: bool
    iterations: int = 0
    degree_property_applies: bool = True
    engine_bug: bool = False
    unsupported_nodes: list[int] = field(default_factory=list)

    @property
    def degree_violation(self) -> bool:
        """A correct residual node touching a degree-one check while no error node was decimated."""
        return self.degree_property_applies and not self.decimated_error and not self.correct_nodes_supported

    def log_line(self, alpha: float | None = None, frame: int | None = None) -> str:
        head = []
        if alpha is not None:
            head.append(f"alpha={alpha:g}")
        if frame is not None:
            head.append(f"frame={frame}")
        return " ".join(
            head
            + [
                "support=" + ",".join(str(v) for v in self.support),
                f"j={self.final_rule_index}",
                f"residual={len(self.residual)}",
                f"stopping_set={int(self.residual_is_stopping_set)}",
            ]
        )


def classify_failure(
    graph: TannerGraph,
    trace: DecimationTrace | None,
    support: Iterable[int],
    iterations: int = 0,
    degree_property_applies: bool = True,
) -> FailureRecord:
    """
    Residual analysis of a failed decode under the all-zero codeword convention.

    Without a decimation trace (plain FAID or BP) nothing is decimated and the
    residual graph is the whole code.
    """
    support = tuple(sorted(int(v) for v in support))
    if trace is None or trace.gamma is None:
        gamma = np.zeros(graph.n, dtype=np.int8)
        final_j = 0
    else:
        gamma = trace.gamma
        final_j = trace.final_rule_index
    residual = NodeSet.of(np.flatnonzero(gamma == 0), "residual", graph.n)
    errors = np.zeros(graph.n, dtype=bool)
    errors[list(support)] = True
    decimated_error = bool(np.any(errors & (gamma != 0)))

    if not len(residual):
        logger.error("❌ failed decode left an empty residual graph (support %s)", support)
        return FailureRecord(
            support, decimated_error, final_j, residual, True, True, False, iterations,
            degree_property_applies, engine_bug=True,
        )

    counts = _check_counts(graph, residual.indices)
    unsupported = []
    error_sees_one = False
    for v in residual:
        weak = any(counts[c] == 1 for c in graph.var_adj[v])
        if errors[v]:
            error_sees_one = error_sees_one or weak
        elif weak:
            unsupported.append(v)
    record = FailureRecord(
        support=support,
        decimated_error=decimated_error,
        final_rule_index=final_j,
        residual=residual,
        residual_is_stopping_set=is_stopping_set(graph, residual.indices),
        correct_nodes_supported=not unsupported,
        error_sees_degree_one=error_sees_one,
        iterations=iterations,
        degree_property_applies=degree_property_applies,
        unsupported_nodes=unsupported,
    )
    if record.degree_violation:
        logger.error("❌ correct residual nodes %s touch degree-one checks (support %s)", unsupported, support)
    return record
