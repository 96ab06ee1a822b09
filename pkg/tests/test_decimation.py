# tests/test_decimation.py
import numpy as np
import pytest

from utils.channel import frame_rng, sample_support
from utils.decimation import (
    AdfaidConfig,
    DecimationState,
    adfaid_decode,
    all_triples,
    beta_eval,
    beta_vector,
    build_schedule,
    canonical,
    closure_expand,
    dominates,
    lambda_set,
    load_schedule,
    read_triples,
    residual_graph,
    triple_name,
)
from utils.errors import ConfigError, ScheduleError, UsageError
from utils.faid import format_trace
from utils.levels import LutRule

from conftest import FIXTURES, reference_decimation_round, word

TANNER_GAMMA = [(2, 2, 2), (2, 2, 1), (2, 2, 0), (2, 1, 1), (2, 1, 0), (2, 2, -1), (2, 1, -1), (2, 0, 0)]


def test_triple_helpers():
    assert canonical([0, 3, -1]) == (3, 0, -1)
    assert dominates((3, 0, 0), (0, 0, 2))
    assert not dominates((2, 2, -1), (3, -3, -3))
    assert len(all_triples()) == 84
    assert triple_name((1, -3, 2)) == "(L2, L1, -L3)"
    with pytest.raises(UsageError):
        canonical([1, 2])


def test_closure_sizes():
    tanner_xi1 = closure_expand([(3, 0, 0), (2, 2, 1)])
    assert len(tanner_xi1) == 12
    assert tanner_xi1.is_monotone_closed()
    assert len(closure_expand(read_triples(FIXTURES / "code732_xi1.txt"))) == 24
    lam = lambda_set()
    assert len(lam) == 21
    assert (3, -2, -2) in lam and (3, -3, 3) not in lam
    assert (0, 3, 0) in tanner_xi1


def test_closure_rejects_levels_outside_alphabet():
    with pytest.raises(UsageError):
        closure_expand([(4, 0, 0)])


def test_read_triples_text_and_yaml(tmp_path):
    assert read_triples(FIXTURES / "tanner_xi1.txt") == [(3, 0, 0), (2, 2, 1)]
    path = tmp_path / "gens.yml"
    path.write_text("- [0, 0, 3]\n- '1 2 2'\n")
    assert read_triples(path) == [(3, 0, 0), (2, 2, 1)]
    bad = tmp_path / "gens.txt"
    bad.write_text("3 0 0\n3 0\n")
    with pytest.raises(ScheduleError, match=":2:"):
        read_triples(bad)


def test_tanner_schedule(tanner_schedule):
    assert tanner_schedule.sizes == (23, 25, 26, 27, 29)
    assert [len(r) for r in tanner_schedule.rules] == [23, 25, 26, 27, 29]
    assert len(tanner_schedule.xi1) == 12
    assert tanner_schedule.xi1.triples == closure_expand(read_triples(FIXTURES / "tanner_xi1.txt")).triples
    for smaller, larger in zip(tanner_schedule.rules, tanner_schedule.rules[1:]):
        assert smaller.triples < larger.triples
    for rule in tanner_schedule.rules:
        assert rule.is_monotone_closed()
        assert lambda_set().triples <= rule.triples


def test_code732_schedule():
    schedule = load_schedule(FIXTURES / "code732_schedule.yml")
    assert len(schedule.xi1) == 24
    assert schedule.sizes == tuple(range(24, 36))
    assert len(schedule.rules[-1]) == 35
    assert all(rule.is_monotone_closed() for rule in schedule.rules)


@pytest.mark.parametrize(
    "gamma, sizes, fragment",
    [
        (TANNER_GAMMA[:-1] + [(2, 2, 2)], [23, 29], "twice"),
        (TANNER_GAMMA + [(3, 0, 0)], [23, 30], "overlaps Lambda"),
        (TANNER_GAMMA, [23, 23, 29], "strictly increasing"),
        (TANNER_GAMMA, [20, 29], "below"),
        (TANNER_GAMMA, [23, 28], "last size"),
        ([TANNER_GAMMA[1], TANNER_GAMMA[0]] + TANNER_GAMMA[2:], [22, 29], "missing"),
    ],
)
def test_build_schedule_errors(gamma, sizes, fragment):
    with pytest.raises(ScheduleError, match=fragment):
        build_schedule([(3, 0, 0), (2, 2, 1)], gamma, sizes, name="broken")


def test_load_schedule_errors(tmp_path):
    path = tmp_path / "s.yml"
    path.write_text("xi1: [[3, 0, 0]]\n")
    with pytest.raises(ScheduleError, match="sizes"):
        load_schedule(path)
    with pytest.raises(ScheduleError, match="cannot read"):
        load_schedule(tmp_path / "missing.yml")


def test_beta_eval(tanner_schedule):
    xi = tanner_schedule.xi1
    assert beta_eval(xi, 1, 3, 0, 0) == 1
    assert beta_eval(xi, 1, 0, 3, 0) == 1
    assert beta_eval(xi, 1, 2, 1, 2) == 1
    assert beta_eval(xi, 1, 2, 2, 0) == 0
    assert beta_eval(xi, -1, -3, 0, 0) == -1
    assert beta_eval(xi, -1, 3, 0, 0) == 0


def test_beta_vector_matches_beta_eval(tanner_schedule):
    rng = np.random.default_rng(4)
    incoming = rng.integers(-3, 4, size=(500, 3)).astype(np.int8)
    sign = np.where(rng.random(500) < 0.5, -1, 1).astype(np.int8)
    for rule in (tanner_schedule.xi1, tanner_schedule.rules[-1]):
        out = beta_vector(rule.membership_table(), sign, incoming)
        expected = [beta_eval(rule, int(sg), *map(int, m)) for sg, m in zip(sign, incoming)]
        assert out.tolist() == expected


def test_decimation_state_keeps_first_decision():
    state = DecimationState.fresh(5, 2)
    newly = state.decimate(np.array([1, 0, -1, 0, 0], dtype=np.int8))
    assert newly.tolist() == [0, 2]
    newly = state.decimate(np.array([-1, 1, 1, 0, 0], dtype=np.int8))
    assert newly.tolist() == [1]
    assert state.gamma.tolist() == [1, 1, -1, 0, 0]
    assert state.decimated_count == 3 and state.j == 2


def test_adfaid_zero_word(tanner, adfaid_config):
    outcome, trace = adfaid_decode(tanner, adfaid_config, np.zeros(tanner.n, dtype=np.uint8))
    assert outcome.converged and outcome.iterations == 0
    assert outcome.decoder == "adfaid"
    assert trace.final_rule_index == 1 and not trace.rounds
    assert len(trace.residual) == tanner.n


def test_adfaid_single_error(tanner, adfaid_config):
    outcome, trace = adfaid_decode(tanner, adfaid_config, word(tanner.n, [42]))
    assert outcome.converged and outcome.iterations == 1
    assert not outcome.bits.any()


def test_adfaid_sampled_weight_three(tanner, adfaid_config):
    for i in range(30):
        support = sample_support(tanner.n, 3, frame_rng(5, 3, i))
        outcome, _ = adfaid_decode(tanner, adfaid_config, word(tanner.n, support))
        assert outcome.converged, support
        assert not outcome.bits.any(), support


def test_adfaid_decimation_invariants(tanner, adfaid_config):
    decimated_somewhere = False
    for i in range(12):
        received = word(tanner.n, sample_support(tanner.n, 10, frame_rng(6, 10, i)))
        sign = 1 - 2 * received.astype(np.int8)
        outcome, trace = adfaid_decode(tanner, adfaid_config, received, trace=True)
        assert trace.strong_message_exceptions[0] == 0
        assert 1 <= trace.final_rule_index <= 5
        fixed = trace.gamma != 0
        assert np.array_equal(trace.gamma[fixed], sign[fixed])
        assert trace.residual.indices == tuple(np.flatnonzero(~fixed).tolist())
        if outcome.converged:
            assert not np.any(outcome.bits[fixed] != received[fixed])
        for r in trace.rounds:
            if r.p == 0:
                assert r.rule == "beta1"
        if trace.rounds:
            decimated_somewhere = True
            assert trace.rounds[0].p == 0
            assert "# decimation j=1 start" in format_trace(outcome.trace)
    assert decimated_somewhere


def test_adfaid_rounds_grow_until_fixpoint(tanner, adfaid_config):
    for i in range(12):
        received = word(tanner.n, sample_support(tanner.n, 10, frame_rng(6, 10, i)))
        _, trace = adfaid_decode(tanner, adfaid_config, received)
        by_j = {}
        for r in trace.rounds:
            by_j.setdefault(r.j, []).append(r)
        for rounds in by_j.values():
            totals = [r.total for r in rounds]
            assert totals == sorted(totals)
            assert [r.p for r in rounds] == list(range(len(rounds)))


def _rounds_from_snapshots(trace, received):
    """Yield (j, p, gamma before the round, c2v it decided on, decimated nodes) per round."""
    sign = 1 - 2 * received.astype(np.int8)
    gamma = c2v = None
    for snap in trace.snapshots:
        if snap.c2v is not None:
            c2v = snap.c2v
        elif snap.note.endswith("start"):
            gamma = np.zeros(len(received), dtype=np.int8)
        else:
            fields = dict(part.split("=", 1) for part in snap.note.split()[1:])
            newly = [int(v) for v in fields["new"].split(",") if v]
            yield int(fields["j"]), int(fields["p"]), gamma.copy(), c2v, newly
            gamma[newly] = sign[newly]


def test_decimation_rounds_match_an_edge_by_edge_replay(tanner, adfaid_config, tanner_schedule, lt_rule):
    fixpoints = 0
    for i in range(6):
        received = word(tanner.n, sample_support(tanner.n, 12, frame_rng(9, 12, i)))
        _, trace = adfaid_decode(tanner, adfaid_config, received, trace=True)
        sign = 1 - 2 * received.astype(np.int8)
        for j, p, gamma, _, newly in _rounds_from_snapshots(trace, received):
            fixed = gamma != 0
            assert np.array_equal(gamma[fixed], sign[fixed])
            if p == 0:
                decisions = reference_decimation_round(tanner, lt_rule, received, gamma, tanner_schedule.xi1, 3)
            else:
                decisions = reference_decimation_round(tanner, lt_rule, received, gamma, tanner_schedule.rules[j - 1])
            assert sorted(v for v, d in decisions.items() if d) == newly, (i, j, p)
            assert all(d == sign[v] for v, d in decisions.items() if d)
            if p > 0 and not newly:
                fixpoints += 1
    assert fixpoints


def test_l3_misses_come_from_second_iteration_strong_messages(tanner, adfaid_config, tanner_schedule):
    s = 3
    checked = 0
    for weight in range(6, 13):
        for i in range(8):
            received = word(tanner.n, sample_support(tanner.n, weight, frame_rng(21, weight, i)))
            _, trace = adfaid_decode(tanner, adfaid_config, received, trace=True)
            assert trace.l3_misses <= trace.strong_message_exceptions[1]
            seen = missed = 0
            for j, p, gamma, c2v, newly in _rounds_from_snapshots(trace, received):
                if p == 0:
                    continue
                decimated_error = (gamma != 0) & (received == 1)
                for v in range(tanner.n):
                    edges = tanner.var_edge_table[v][:3]
                    incoming = [int(c2v[e]) for e in edges]
                    if gamma[v] or received[v] or s not in incoming:
                        continue
                    if any(decimated_error[u] for c in tanner.var_adj[v] for u in tanner.chk_adj[c]):
                        continue
                    seen += 1
                    if beta_eval(tanner_schedule.rules[j - 1], 1, *incoming):
                        assert v in newly
                        continue
                    missed += 1
                    # the miss is a -L3 sent by a check that still has a free neighbour
                    sources = [int(tanner.edge_chk[e]) for e in edges if c2v[e] == -s]
                    assert sources, (weight, i, v)
                    assert any(
                        gamma[u] == 0 for c in sources for u in tanner.chk_adj[c] if u != v
                    ), (weight, i, v)
            assert (seen, missed) == (trace.l3_checked, trace.l3_misses)
            checked += seen
    assert checked


def test_dfaid_mode(tanner, faid7, tanner_schedule):
    config = AdfaidConfig.dfaid(faid7, tanner_schedule.rules[0])
    assert config.schedule.n_rules == 1
    for i in range(10):
        support = sample_support(tanner.n, 3, frame_rng(7, 3, i))
        outcome, trace = adfaid_decode(tanner, config, word(tanner.n, support))
        assert outcome.converged
        assert trace.final_rule_index == 1
        assert all(r.rule in ("beta1", "dfaid[1]") for r in trace.rounds)


def test_adfaid_config_errors(faid7, lt_rule, tanner_schedule):
    with pytest.raises(ConfigError, match="budget"):
        AdfaidConfig(lt_rule, faid7, tanner_schedule, iter_budget=0)
    flat = LutRule(((0,) * 7,) * 7, name="flat")
    with pytest.raises(ConfigError, match="flat"):
        AdfaidConfig(flat, faid7, tanner_schedule)


def test_residual_graph(tanner):
    gamma = np.ones(tanner.n, dtype=np.int8)
    gamma[[0, 1, 33]] = 0
    rest, sub = residual_graph(tanner, gamma)
    assert rest.indices == (0, 1, 33) and rest.role == "residual"
    assert sub.variables.tolist() == [0, 1, 33]
    rest, sub = residual_graph(tanner, np.ones(tanner.n, dtype=np.int8))
    assert len(rest) == 0 and sub is None


def test_adfaid_rejects_wrong_length(tanner, adfaid_config):
    with pytest.raises(UsageError, match="length"):
        adfaid_decode(tanner, adfaid_config, np.zeros(3, dtype=np.uint8))
