# utils/faid.py
"""
Plain multilevel FAID on a column-weight-three Tanner graph.

One iteration is a flooding round: every variable-to-check message is
recomputed from the previous round's check-to-variable messages, then every
check-to-variable message from the new variable-to-check messages. Messages
start at 0. The bit decision is the sign of (sum of the three incoming level
indices + channel sign), ties going to the received bit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from utils.errors import UsageError
from utils.levels import VariableUpdateRule, extrinsic_check_matrix
from utils.tanner_graph import TannerGraph, syndrome

logger = logging.getLogger(__name__)

DV = 3


@dataclass
class IterationSnapshot:
    iteration: int
    v2c: np.ndarray | None
    c2v: np.ndarray | None
    bits: np.ndarray | None
    note: str = ""


@dataclass
class DecoderState:
    """Edge messages carry one trailing sentinel slot (always +L_s)."""

    v2c: np.ndarray
    c2v: np.ndarray
    received: np.ndarray
    bits: np.ndarray
    iteration: int = 0

    @classmethod
    def initial(cls, graph: TannerGraph, received, s: int = 3) -> "DecoderState":
        received = np.asarray(received, dtype=np.uint8)
        if received.shape != (graph.n,):
            raise UsageError(f"received word has length {received.size}, code length is {graph.n}")
        zeros = np.zeros(graph.n_edges + 1, dtype=np.int8)
        zeros[-1] = s
        return cls(v2c=zeros.copy(), c2v=zeros.copy(), received=received, bits=received.copy())

    @property
    def channel_sign(self) -> np.ndarray:
        return 1 - 2 * self.received.astype(np.int8)


@dataclass
class DecodeOutcome:
    converged: bool
    bits: np.ndarray
    iterations: int
    decoder: str = "faid"
    trace: list[IterationSnapshot] | None = field(default=None, repr=False)

    def bit_errors(self, codeword=None) -> int:
        ref = np.zeros_like(self.bits) if codeword is None else np.asarray(codeword, dtype=np.uint8)
        return int(np.count_nonzero(self.bits != ref))


class FloodingEngine:
    """Index tables for vectorised message passing on one graph (all variable degrees 3)."""

    def __init__(self, graph: TannerGraph):
        if not graph.is_variable_regular(DV):
            raise UsageError("FAID decoding needs every variable degree equal to 3")
        self.graph = graph
        self.var_edges = graph.var_edge_table[:, :DV]
        self.flat_var_edges = self.var_edges.ravel()
        self.chk_table = graph.chk_edge_table
        self.chk_valid = self.chk_table < graph.n_edges
        self.n_edges = graph.n_edges

    def variable_pass(
        self,
        table: np.ndarray,
        received: np.ndarray,
        c2v: np.ndarray,
        gamma: np.ndarray | None = None,
    ) -> np.ndarray:
        s = (table.shape[1] - 1) // 2
        incoming = c2v[self.var_edges].astype(np.intp) + s
        plane = received.astype(np.intp)
        out = np.empty((self.graph.n, DV), dtype=np.int8)
        out[:, 0] = table[plane, incoming[:, 1], incoming[:, 2]]
        out[:, 1] = table[plane, incoming[:, 0], incoming[:, 2]]
        out[:, 2] = table[plane, incoming[:, 0], incoming[:, 1]]
        if gamma is not None:
            fixed = gamma != 0
            out[fixed] = (gamma[fixed] * s)[:, None]
        v2c = np.empty(self.n_edges + 1, dtype=np.int8)
        v2c[self.flat_var_edges] = out.ravel()
        v2c[-1] = s
        return v2c

    def check_pass(self, v2c: np.ndarray, s: int) -> np.ndarray:
        ext = extrinsic_check_matrix(v2c[self.chk_table], s)
        c2v = np.empty(self.n_edges + 1, dtype=np.int8)
        c2v[self.chk_table[self.chk_valid]] = ext[self.chk_valid]
        c2v[-1] = s
        return c2v

    def incoming(self, c2v: np.ndarray) -> np.ndarray:
        return c2v[self.var_edges]

    def decide(self, c2v: np.ndarray, received: np.ndarray) -> np.ndarray:
        total = c2v[self.var_edges].sum(axis=1, dtype=np.int32) + (1 - 2 * received.astype(np.int32))
        return np.where(total < 0, 1, np.where(total > 0, 0, received)).astype(np.uint8)


@lru_cache(maxsize=8)
def engine_for(graph: TannerGraph) -> FloodingEngine:
    return FloodingEngine(graph)


def hard_decision(graph: TannerGraph, state: DecoderState) -> np.ndarray:
    if state.iteration == 0:
        return state.received.copy()
    return engine_for(graph).decide(state.c2v, state.received)


def faid_iterate(graph: TannerGraph, rule: VariableUpdateRule, state: DecoderState) -> DecoderState:
    """One flooding iteration; returns a new state."""
    engine = engine_for(graph)
    v2c = engine.variable_pass(rule.table(), state.received, state.c2v)
    c2v = engine.check_pass(v2c, rule.s)
    new = replace(state, v2c=v2c, c2v=c2v, iteration=state.iteration + 1)
    new.bits = engine.decide(c2v, state.received)
    return new


def is_codeword(graph: TannerGraph, bits: np.ndarray) -> bool:
    return not syndrome(graph, bits).any()


def faid_decode(
    graph: TannerGraph,
    rule: VariableUpdateRule,
    received,
    max_iter: int = 100,
    trace: bool = False,
) -> DecodeOutcome:
    """Iterate until the decisions form a codeword or `max_iter` rounds have run."""
    if max_iter < 1:
        raise UsageError("max_iter must be >= 1", "--max-iter")
    engine = engine_for(graph)
    table = rule.table()
    state = DecoderState.initial(graph, received, rule.s)
    snapshots: list[IterationSnapshot] | None = [] if trace else None

    if is_codeword(graph, state.bits):
        return DecodeOutcome(True, state.bits, 0, "faid", snapshots)

    c2v = state.c2v
    bits = state.bits
    for it in range(1, max_iter + 1):
        v2c = engine.variable_pass(table, state.received, c2v)
        c2v = engine.check_pass(v2c, rule.s)
        bits = engine.decide(c2v, state.received)
        if snapshots is not None:
            snapshots.append(IterationSnapshot(it, v2c[:-1].copy(), c2v[:-1].copy(), bits.copy()))
        if is_codeword(graph, bits):
            return DecodeOutcome(True, bits, it, "faid", snapshots)

    logger.debug("⚠️ FAID did not converge in %d iterations", max_iter)
    return DecodeOutcome(False, bits, max_iter, "faid", snapshots)


def _messages(values: np.ndarray) -> str:
    if np.issubdtype(values.dtype, np.floating):
        return " ".join(f"{x:.4g}" for x in values)
    return " ".join(str(int(x)) for x in values)


def format_trace(snapshots: list[IterationSnapshot]) -> str:
    """Text dump: '# iteration k' then v2c / c2v per edge and the decided bits."""
    lines = []
    for snap in snapshots:
        if snap.note:
            lines.append(f"# {snap.note}")
        if snap.v2c is None:
            continue
        lines.append(f"# iteration {snap.iteration}")
        lines.append("v2c " + _messages(snap.v2c))
        lines.append("c2v " + _messages(snap.c2v))
        lines.append("bits " + "".join(str(int(b)) for b in snap.bits))
    return "\n".join(lines) + ("\n" if lines else "")
