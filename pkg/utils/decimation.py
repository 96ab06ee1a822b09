# utils/decimation.py
"""
Decimation rules and the adaptive decimation-enhanced FAID (ADFAID).

A decimation rule beta is specified by a monotone-closed set Xi of unordered
level triples: beta(+C, m1, m2, m3) = 1 iff the triple is in Xi, and by odd
symmetry beta(-C, m) = -1 iff -m is in Xi. Triples are stored sorted in
descending index order, which makes componentwise comparison of unordered
triples a plain tuple comparison.

The decoder follows the adaptive scheme: three Phi_v^d iterations, one
beta^(1) round, then beta^(2)[j] rounds every two iterations (messages
reset after each round) until no new node is decimated, then Phi_v^r on the
residual nodes. On failure the whole procedure restarts with the next, more
aggressive rule of the schedule.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from utils.errors import ConfigError, ScheduleError, UsageError
from utils.faid import DecodeOutcome, IterationSnapshot, engine_for, is_codeword
from utils.levels import DEFAULT_S, VariableUpdateRule, level_name, validate_rule
from utils.tanner_graph import NodeSet, Subgraph, TannerGraph, induced_subgraph

logger = logging.getLogger(__name__)

Triple = tuple[int, int, int]


def canonical(triple: Iterable[int]) -> Triple:
    t = tuple(sorted((int(x) for x in triple), reverse=True))
    if len(t) != 3:
        raise UsageError(f"decimation triples have three entries, got {t}")
    return t  # type: ignore[return-value]


def dominates(a: Iterable[int], b: Iterable[int]) -> bool:
    return all(x >= y for x, y in zip(canonical(a), canonical(b)))


def all_triples(s: int = DEFAULT_S) -> list[Triple]:
    return [canonical(t) for t in combinations_with_replacement(range(s, -s - 1, -1), 3)]


def triple_name(triple: Iterable[int]) -> str:
    return "(" + ", ".join(level_name(x) for x in canonical(triple)) + ")"


@dataclass(frozen=True)
class TripleSet:
    """Xi: a set of unordered triples, optionally remembered with its generators."""

    triples: frozenset
    generators: tuple[Triple, ...] = ()
    s: int = DEFAULT_S

    def __contains__(self, triple) -> bool:
        return canonical(triple) in self.triples

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.ordered())

    def ordered(self) -> list[Triple]:
        return sorted(self.triples, reverse=True)

    def missing_for_closure(self) -> list[Triple]:
        """Triples that dominate a member but are absent (empty iff monotone-closed)."""
        missing = set()
        for t in self.triples:
            for i in range(3):
                if t[i] < self.s:
                    up = list(t)
                    up[i] += 1
                    up = canonical(up)
                    if up not in self.triples:
                        missing.add(up)
        return sorted(missing, reverse=True)

    def is_monotone_closed(self) -> bool:
        return not self.missing_for_closure()

    def membership_table(self) -> np.ndarray:
        """Boolean (2s+1)^3 array indexed by (m1+s, m2+s, m3+s) in any order."""
        s = self.s
        table = np.zeros((2 * s + 1,) * 3, dtype=bool)
        for a, b, c in self.triples:
            for x, y, z in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
                table[x + s, y + s, z + s] = True
        return table


def closure_expand(generators: Iterable[Iterable[int]], s: int = DEFAULT_S) -> TripleSet:
    gens = tuple(canonical(g) for g in generators)
    for g in gens:
        if any(abs(x) > s for x in g):
            raise UsageError(f"generator {g} outside the alphabet (s = {s})")
    members = frozenset(t for t in all_triples(s) if any(dominates(t, g) for g in gens))
    return TripleSet(members, gens, s)


def lambda_set(s: int = DEFAULT_S) -> TripleSet:
    """Lambda: every (L_s, m2, m3) with m2, m3 >= -L_{s-1}."""
    return closure_expand([(s, -(s - 1), -(s - 1))], s)


def beta_eval(xi: TripleSet, channel_sign: int, m1: int, m2: int, m3: int) -> int:
    if channel_sign > 0:
        return 1 if (m1, m2, m3) in xi else 0
    return -1 if (-m1, -m2, -m3) in xi else 0


def beta_vector(membership: np.ndarray, sign: np.ndarray, incoming: np.ndarray) -> np.ndarray:
    """beta over all variables: incoming is (n, 3), sign is +1/-1 per variable."""
    s = (membership.shape[0] - 1) // 2
    oriented = incoming.astype(np.intp) * sign[:, None] + s
    hit = membership[oriented[:, 0], oriented[:, 1], oriented[:, 2]]
    return np.where(hit, sign, 0).astype(np.int8)


# =========================
# Rule schedules
# =========================

@dataclass(frozen=True)
class RuleSchedule:
    """beta^(1) plus the nested sequence beta^(2)[1..N] built from Lambda and an ordered Gamma."""

    name: str
    xi1: TripleSet
    lam: TripleSet
    gamma: tuple[Triple, ...]
    sizes: tuple[int, ...]
    rules: tuple[TripleSet, ...]
    rule_names: tuple[str, ...]

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @classmethod
    def single(cls, xi: TripleSet, name: str = "dfaid") -> "RuleSchedule":
        """One rule used both at the end of iteration three and in every later round."""
        lam = TripleSet(frozenset(t for t in xi.triples if t in lambda_set(xi.s).triples), (), xi.s)
        return cls(name, xi, lam, (), (len(xi),), (xi,), (f"{name}[1]",))


def build_schedule(
    xi1_generators: Iterable[Iterable[int]],
    gamma: Sequence[Iterable[int]],
    sizes: Sequence[int],
    name: str = "schedule",
    rule_names: Sequence[str] | None = None,
    s: int = DEFAULT_S,
) -> RuleSchedule:
    xi1 = closure_expand(xi1_generators, s)
    lam = lambda_set(s)
    ordered = tuple(canonical(t) for t in gamma)

    if len(set(ordered)) != len(ordered):
        raise ScheduleError(f"{name}: Gamma lists a triple twice")
    overlap = [t for t in ordered if t in lam.triples]
    if overlap:
        raise ScheduleError(f"{name}: Gamma overlaps Lambda at {triple_name(overlap[0])}")
    sizes = tuple(int(x) for x in sizes)
    if not sizes:
        raise ScheduleError(f"{name}: empty size list")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ScheduleError(f"{name}: sizes must be strictly increasing: {list(sizes)}")
    if sizes[0] < len(lam):
        raise ScheduleError(f"{name}: first size {sizes[0]} is below |Lambda| = {len(lam)}")
    if sizes[-1] != len(lam) + len(ordered):
        raise ScheduleError(
            f"{name}: last size {sizes[-1]} must equal |Lambda| + |Gamma| = {len(lam) + len(ordered)}"
        )

    rules = []
    for j, size in enumerate(sizes, start=1):
        members = lam.triples | frozenset(ordered[: size - len(lam)])
        rule = TripleSet(members, (), s)
        missing = rule.missing_for_closure()
        if missing:
            raise ScheduleError(
                f"{name}: rule {j} (size {size}) is not monotone-closed, missing {triple_name(missing[0])}"
            )
        rules.append(rule)

    names = tuple(rule_names) if rule_names else tuple(f"{name}[{j}]" for j in range(1, len(rules) + 1))
    if len(names) != len(rules):
        raise ScheduleError(f"{name}: {len(names)} rule names for {len(rules)} rules")
    return RuleSchedule(name, xi1, lam, ordered, sizes, tuple(rules), names)


def _triple_list(raw, what: str) -> list[Triple]:
    if not isinstance(raw, list):
        raise ScheduleError(f"'{what}' must be a list of triples")
    out = []
    for item in raw:
        if isinstance(item, str):
            item = item.split()
        try:
            out.append(canonical(int(x) for x in item))
        except (TypeError, ValueError, UsageError) as exc:
            raise ScheduleError(f"'{what}': bad triple {item!r} ({exc})") from None
    return out


def load_schedule(path: str | Path) -> RuleSchedule:
    try:
        with open(path, "r") as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise ScheduleError(f"cannot read schedule file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScheduleError(f"schedule file {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScheduleError(f"schedule file {path} must be a mapping")
    for key in ("xi1", "sizes"):
        if key not in doc:
            raise ScheduleError(f"schedule file {path} is missing '{key}'")
    return build_schedule(
        _triple_list(doc["xi1"], "xi1"),
        _triple_list(doc.get("gamma") or [], "gamma"),
        doc["sizes"],
        name=str(doc.get("name", Path(path).stem)),
        rule_names=doc.get("rule_names"),
    )


def read_triples(path: str | Path) -> list[Triple]:
    """Generator file: YAML list of triples, or plain text with one 'a b c' triple per line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScheduleError(f"cannot read generator file {path}: {exc}") from exc
    if path.suffix in (".yml", ".yaml"):
        try:
            return _triple_list(yaml.safe_load(text), str(path))
        except yaml.YAMLError as exc:
            raise ScheduleError(f"generator file {path} is not valid YAML: {exc}") from exc
    triples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").replace("(", " ").replace(")", " ").split()
        try:
            triples.append(canonical(int(t) for t in tokens))
        except (ValueError, UsageError) as exc:
            raise ScheduleError(f"{path}:{lineno}: bad triple {line!r} ({exc})") from None
    return triples


# =========================
# ADFAID
# =========================

@dataclass
class AdfaidConfig:
    rule_d: VariableUpdateRule
    rule_r: VariableUpdateRule
    schedule: RuleSchedule
    iter_budget: int = 100
    instrument: bool = False

    def __post_init__(self):
        if self.iter_budget < 1:
            raise ConfigError("iteration budget must be >= 1")
        if self.rule_d.s != self.rule_r.s or self.rule_d.s != self.schedule.xi1.s:
            raise ConfigError("decimation rule, residual rule and schedule disagree on the alphabet size")
        for label, rule in (("Phi_v^d", self.rule_d), ("Phi_v^r", self.rule_r)):
            problems = validate_rule(rule)
            if problems:
                raise ConfigError(f"{label} ({rule.name}) is invalid: " + "; ".join(problems[:3]))

    @classmethod
    def dfaid(cls, rule: VariableUpdateRule, xi: TripleSet, iter_budget: int = 100, **kw) -> "AdfaidConfig":
        """Non-adaptive decimation: Phi_v^d = Phi_v^r and a single rule."""
        return cls(rule, rule, RuleSchedule.single(xi), iter_budget, **kw)


@dataclass
class DecimationState:
    """gamma is +1/-1 for nodes decimated to 0/1, else 0."""

    gamma: np.ndarray
    decimated_count: int = 0
    q: int = 0
    p: int = 0
    j: int = 1

    @classmethod
    def fresh(cls, n: int, j: int) -> "DecimationState":
        return cls(np.zeros(n, dtype=np.int8), 0, 0, 0, j)

    def decimate(self, candidates: np.ndarray) -> np.ndarray:
        """Apply rule outputs to undecimated nodes only; returns the newly decimated indices."""
        newly = np.flatnonzero((self.gamma == 0) & (candidates != 0))
        self.gamma[newly] = candidates[newly]
        self.decimated_count = int(np.count_nonzero(self.gamma))
        return newly


@dataclass
class DecimationRound:
    j: int
    p: int
    rule: str
    newly: tuple[int, ...]
    total: int


@dataclass
class DecimationTrace:
    rounds: list[DecimationRound] = field(default_factory=list)
    final_rule_index: int = 1
    gamma: np.ndarray | None = None
    residual: NodeSet | None = None
    residual_subgraph: Subgraph | None = None
    strong_message_exceptions: list[int] = field(default_factory=lambda: [0, 0])
    l3_misses: int = 0
    l3_checked: int = 0
    snapshots: list[IterationSnapshot] | None = None

    def decimated_errors(self, received) -> np.ndarray:
        """Indices of received-in-error nodes (all-zero codeword) that ended decimated."""
        received = np.asarray(received)
        if self.gamma is None:
            return np.array([], dtype=np.intp)
        return np.flatnonzero((self.gamma != 0) & (received == 1))


def residual_graph(graph: TannerGraph, state: DecimationState | np.ndarray) -> tuple[NodeSet, Subgraph | None]:
    gamma = state.gamma if isinstance(state, DecimationState) else np.asarray(state)
    rest = NodeSet.of(np.flatnonzero(gamma == 0), "residual", graph.n)
    return rest, (induced_subgraph(graph, rest) if len(rest) else None)


class _Run:
    """Mutable bookkeeping of one adfaid_decode call."""

    def __init__(self, graph, config, received, keep_snapshots):
        self.graph = graph
        self.engine = engine_for(graph)
        self.config = config
        self.received = received
        self.sign = (1 - 2 * received.astype(np.int8)).astype(np.int8)
        self.s = config.rule_d.s
        self.table_d = config.rule_d.table()
        self.table_r = config.rule_r.table()
        self.iterations = 0
        self.trace = DecimationTrace(snapshots=[] if keep_snapshots else None)
        self.c2v = self.zero_messages()
        self.bits = received.copy()

    def zero_messages(self) -> np.ndarray:
        msgs = np.zeros(self.graph.n_edges + 1, dtype=np.int8)
        msgs[-1] = self.s
        return msgs

    def reset(self):
        self.c2v = self.zero_messages()

    def iterate(self, table, gamma) -> bool:
        v2c = self.engine.variable_pass(table, self.received, self.c2v, gamma)
        self.c2v = self.engine.check_pass(v2c, self.s)
        bits = self.engine.decide(self.c2v, self.received)
        fixed = gamma != 0
        bits[fixed] = (gamma[fixed] < 0).astype(np.uint8)
        self.bits = bits
        self.iterations += 1
        if self.trace.snapshots is not None:
            self.trace.snapshots.append(
                IterationSnapshot(self.iterations, v2c[:-1].copy(), self.c2v[:-1].copy(), bits.copy())
            )
        return is_codeword(self.graph, bits)

    def note(self, text: str):
        if self.trace.snapshots is not None:
            self.trace.snapshots.append(IterationSnapshot(self.iterations, None, None, None, text))

    def incoming(self) -> np.ndarray:
        return self.engine.incoming(self.c2v)

    # ---- monitors (all-zero codeword convention) ----

    def watch_strong_messages(self, gamma, step: int):
        """Count L_s messages into a node from a check whose other neighbours are not all decimated."""
        g = self.graph
        free = (gamma == 0).astype(np.int32)
        free_per_check = np.bincount(g.edge_chk, weights=free[g.edge_var], minlength=g.m).astype(np.int32)
        others_free = free_per_check[g.edge_chk] - free[g.edge_var]
        strong = np.abs(self.c2v[:-1].astype(np.int32)) == self.s
        self.trace.strong_message_exceptions[step] += int(np.count_nonzero(strong & (others_free > 0)))

    def watch_l3_decimation(self, gamma, candidates, rule: TripleSet):
        """
        Correct undecimated nodes that receive +L_s with no decimated error node on
        their checks; a miss is one the round leaves undecimated.

        Once the rule contains Lambda, a miss needs a -L_s among its incoming
        messages, sent by a check with another undecimated neighbour. That edge
        is a strong-message exception of the same (second) iteration, so per
        decode l3_misses <= strong_message_exceptions[1].
        """
        if not rule.triples >= lambda_set(self.s).triples:
            return
        g = self.graph
        dec_err = ((gamma != 0) & (self.received == 1)).astype(np.int32)
        per_check = np.bincount(g.edge_chk, weights=dec_err[g.edge_var], minlength=g.m).astype(np.int32)
        near = per_check[g.edge_chk[self.engine.var_edges]].sum(axis=1)
        got_strong = (self.incoming() == self.s).any(axis=1)
        eligible = (gamma == 0) & (self.received == 0) & got_strong & (near == 0)
        self.trace.l3_checked += int(np.count_nonzero(eligible))
        self.trace.l3_misses += int(np.count_nonzero(eligible & (candidates == 0)))


def adfaid_decode(
    graph: TannerGraph,
    config: AdfaidConfig,
    received,
    trace: bool = False,
    instrument: bool | None = None,
) -> tuple[DecodeOutcome, DecimationTrace]:
    """
    Run the adaptive decimation schedule; returns the outcome and the decimation trace.
    `instrument` overrides the config flag for the message monitors.
    """
    if instrument is None:
        instrument = config.instrument
    received = np.asarray(received, dtype=np.uint8)
    if received.shape != (graph.n,):
        raise UsageError(f"received word has length {received.size}, code length is {graph.n}")
    run = _Run(graph, config, received, trace)
    schedule = config.schedule
    xi1_table = schedule.xi1.membership_table()
    n = graph.n

    def finish(converged: bool, state: DecimationState) -> tuple[DecodeOutcome, DecimationTrace]:
        run.trace.final_rule_index = state.j
        run.trace.gamma = state.gamma.copy()
        run.trace.residual, run.trace.residual_subgraph = residual_graph(graph, state)
        outcome = DecodeOutcome(converged, run.bits, run.iterations, "adfaid", run.trace.snapshots)
        return outcome, run.trace

    state = DecimationState.fresh(n, 1)
    if is_codeword(graph, received):
        return finish(True, state)

    for j in range(1, schedule.n_rules + 1):
        rule = schedule.rules[j - 1]
        rule_table = rule.membership_table()
        state = DecimationState.fresh(n, j)
        run.reset()
        run.note(f"decimation j={j} start")

        for _ in range(3):
            if run.iterate(run.table_d, state.gamma):
                return finish(True, state)

        newly = state.decimate(beta_vector(xi1_table, run.sign, run.incoming()))
        run.trace.rounds.append(DecimationRound(j, 0, "beta1", tuple(newly.tolist()), state.decimated_count))
        run.note(f"decimation j={j} p=0 new={','.join(map(str, newly.tolist()))}")
        run.reset()
        state.q = 0

        while True:
            for step in range(2):
                converged = run.iterate(run.table_d, state.gamma)
                if instrument:
                    run.watch_strong_messages(state.gamma, step)
                if converged:
                    return finish(True, state)
            candidates = beta_vector(rule_table, run.sign, run.incoming())
            if instrument:
                run.watch_l3_decimation(state.gamma, candidates, rule)
            newly = state.decimate(candidates)
            state.p += 1
            run.trace.rounds.append(
                DecimationRound(j, state.p, schedule.rule_names[j - 1], tuple(newly.tolist()), state.decimated_count)
            )
            run.note(f"decimation j={j} p={state.p} new={','.join(map(str, newly.tolist()))}")
            run.reset()
            if state.decimated_count > state.q:
                state.q = state.decimated_count
                continue
            break

        for _ in range(config.iter_budget):
            if run.iterate(run.table_r, state.gamma):
                return finish(True, state)
        logger.debug("⚠️ rule %s failed after %d decimated nodes", schedule.rule_names[j - 1], state.decimated_count)

    return finish(False, state)

