# utils/bp.py
"""Floating-point sum-product (tanh rule) flooding decoder, the comparison baseline."""
from __future__ import annotations

import logging

import numpy as np

from utils.channel import check_alpha
from utils.errors import UsageError
from utils.faid import DecodeOutcome, IterationSnapshot, is_codeword
from utils.tanner_graph import TannerGraph

logger = logging.getLogger(__name__)

_TINY = 1e-15
_CLIP = 1.0 - 1e-12


def channel_llr(alpha: float) -> float:
    alpha = check_alpha(alpha, strict=True)
    return float(np.log((1.0 - alpha) / alpha))


def bp_decode(
    graph: TannerGraph,
    alpha: float,
    received,
    max_iter: int = 100,
    trace: bool = False,
) -> DecodeOutcome:
    if max_iter < 1:
        raise UsageError("max_iter must be >= 1", "--max-iter")
    received = np.asarray(received, dtype=np.uint8)
    if received.shape != (graph.n,):
        raise UsageError(f"received word has length {received.size}, code length is {graph.n}")
    llr = channel_llr(alpha) * (1.0 - 2.0 * received)
    E = graph.n_edges
    var_edges = graph.var_edge_table
    chk_edges = graph.chk_edge_table
    chk_valid = chk_edges < E
    snapshots: list[IterationSnapshot] | None = [] if trace else None

    if is_codeword(graph, received):
        return DecodeOutcome(True, received.copy(), 0, "bp", snapshots)

    c2v = np.zeros(E + 1)
    bits = received.copy()
    for it in range(1, max_iter + 1):
        total = llr + c2v[var_edges].sum(axis=1)
        v2c = np.append(total[graph.edge_var] - c2v[:E], np.inf)

        t = np.tanh(v2c / 2.0)
        t = np.where(np.abs(t) < _TINY, np.where(t < 0, -_TINY, _TINY), t)
        rows = t[chk_edges]
        ext = np.clip(rows.prod(axis=1, keepdims=True) / rows, -_CLIP, _CLIP)
        c2v = np.zeros(E + 1)
        c2v[chk_edges[chk_valid]] = 2.0 * np.arctanh(ext[chk_valid])

        posterior = llr + c2v[var_edges].sum(axis=1)
        bits = np.where(posterior < 0, 1, np.where(posterior > 0, 0, received)).astype(np.uint8)
        if snapshots is not None:
            snapshots.append(IterationSnapshot(it, v2c[:-1].copy(), c2v[:-1].copy(), bits.copy()))
        if is_codeword(graph, bits):
            return DecodeOutcome(True, bits, it, "bp", snapshots)

    logger.debug("⚠️ BP did not converge in %d iterations", max_iter)
    return DecodeOutcome(False, bits, max_iter, "bp", snapshots)
