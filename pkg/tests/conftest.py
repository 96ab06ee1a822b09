# tests/conftest.py
from pathlib import Path

import numpy as np
import pytest

from utils.decimation import AdfaidConfig, beta_eval, load_schedule
from utils.levels import check_update, load_rule, saturating_sequence
from utils.tanner_graph import TannerGraph, read_alist

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
ALIST = FIXTURES / "tanner_155_64.alist"
RULES = FIXTURES / "rules.yml"
SCHEDULE = FIXTURES / "tanner_schedule.yml"


@pytest.fixture(scope="session")
def tanner() -> TannerGraph:
    return read_alist(ALIST)


@pytest.fixture(scope="session")
def faid7():
    return load_rule(RULES, "faid7")


@pytest.fixture(scope="session")
def lt_rule():
    return load_rule(RULES, "decimation_lt")


@pytest.fixture(scope="session")
def tanner_schedule():
    return load_schedule(SCHEDULE)


@pytest.fixture(scope="session")
def adfaid_config(faid7, lt_rule, tanner_schedule) -> AdfaidConfig:
    return AdfaidConfig(lt_rule, faid7, tanner_schedule, instrument=True)


@pytest.fixture
def toy_graph() -> TannerGraph:
    """Four variables, four checks; variable v sits on every check except c_v."""
    return TannerGraph(4, 4, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@pytest.fixture
def sim_overrides():
    return dict(
        code=str(ALIST),
        rule_file=str(RULES),
        schedule=str(SCHEDULE),
        rule="faid7",
        decimation_rule="decimation_lt",
        progress=False,
    )


def word(n, support):
    w = np.zeros(n, dtype=np.uint8)
    w[list(support)] = 1
    return w


def reference_faid(graph, rule, received, max_iter):
    """Edge-by-edge FAID with dictionaries; the decoders under test must agree with it."""
    sign = {v: -1 if received[v] else 1 for v in range(graph.n)}
    c2v = {(v, c): 0 for v in range(graph.n) for c in graph.var_adj[v]}

    def is_cw(bits):
        return all(sum(bits[v] for v in graph.chk_adj[c]) % 2 == 0 for c in range(graph.m))

    bits = [int(b) for b in received]
    if is_cw(bits):
        return True, bits, 0
    for it in range(1, max_iter + 1):
        v2c = {}
        for v in range(graph.n):
            adj = graph.var_adj[v]
            for c in adj:
                others = [c2v[(v, d)] for d in adj if d != c]
                v2c[(v, c)] = rule.evaluate(sign[v], *others)
        for c in range(graph.m):
            for v in graph.chk_adj[c]:
                c2v[(v, c)] = check_update([v2c[(u, c)] for u in graph.chk_adj[c] if u != v])
        bits = []
        for v in range(graph.n):
            total = sum(c2v[(v, c)] for c in graph.var_adj[v]) + sign[v]
            bits.append(1 if total < 0 else 0 if total > 0 else int(received[v]))
        if is_cw(bits):
            return True, bits, it
    return False, bits, max_iter


def reference_decimation_round(graph, rule, received, gamma, xi, iterations=2):
    """
    Decimation round from reset messages: `iterations` passes of `rule` with
    decimated nodes pinned to gamma * L_s, then beta of Xi on every free node.
    Returns {variable: decision} for the undecimated variables.
    """
    s = rule.s
    sign = [-1 if b else 1 for b in received]
    c2v = {(v, c): 0 for v in range(graph.n) for c in graph.var_adj[v]}
    for _ in range(iterations):
        v2c = {}
        for v in range(graph.n):
            adj = graph.var_adj[v]
            for c in adj:
                if gamma[v]:
                    v2c[(v, c)] = int(gamma[v]) * s
                else:
                    v2c[(v, c)] = rule.evaluate(sign[v], *[c2v[(v, d)] for d in adj if d != c])
        for c in range(graph.m):
            for v in graph.chk_adj[c]:
                c2v[(v, c)] = check_update([v2c[(u, c)] for u in graph.chk_adj[c] if u != v])
    return {
        v: beta_eval(xi, sign[v], *[c2v[(v, c)] for c in graph.var_adj[v]])
        for v in range(graph.n)
        if not gamma[v]
    }


def clamped_reference(graph, P, errors, rule, max_iter):
    """
    Full-graph FAID restricted to P: every variable outside P is error-free
    and its message into W at iteration k is forced to the all-correct m_k.
    Returns (converged, iterations) with convergence meaning all of P decides 0.
    """
    P = sorted(P)
    inside = set(P)
    errors = set(errors)
    W = sorted({c for v in P for c in graph.var_adj[v]})
    mbar = saturating_sequence(rule, max_iter)
    sign = {v: -1 if v in errors else 1 for v in P}
    c2v = {(v, c): 0 for v in P for c in graph.var_adj[v]}
    if not errors:
        return True, 0
    for k in range(1, max_iter + 1):
        v2c = {}
        for v in P:
            adj = graph.var_adj[v]
            for c in adj:
                v2c[(v, c)] = rule.evaluate(sign[v], *[c2v[(v, d)] for d in adj if d != c])
        for c in W:
            for v in graph.chk_adj[c]:
                if v not in inside:
                    continue
                incoming = [v2c[(u, c)] if u in inside else mbar[k - 1] for u in graph.chk_adj[c] if u != v]
                c2v[(v, c)] = check_update(incoming)
        wrong = 0
        for v in P:
            total = sum(c2v[(v, c)] for c in graph.var_adj[v]) + sign[v]
            bit = 1 if total < 0 else 0 if total > 0 else (1 if v in errors else 0)
            wrong += bit
        if not wrong:
            return True, k
    return False, max_iter


def connected_subset(graph, rng, size):
    """Random connected variable set grown through shared checks."""
    root = int(rng.integers(graph.n))
    members = [root]
    while len(members) < size:
        frontier = sorted({u for v in members for c in graph.var_adj[v] for u in graph.chk_adj[c]} - set(members))
        members.append(int(rng.choice(frontier)))
    return sorted(members)
