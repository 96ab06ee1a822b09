# scripts/cli.py
"""
faidlab command line.

Exit codes: 0 success, 1 a decoding/verification failure was found,
2 usage or configuration error.
"""
from __future__ import annotations

import functools
import logging
from pathlib import Path

import click
import numpy as np
import pandas as pd
from tabulate import tabulate

from utils.analysis import classify_failure, critical_number
from utils.channel import PatternMode, support_to_word
from utils.config_loader import DECODERS, build_sim_config, load_config
from utils.decimation import closure_expand, load_schedule, read_triples, triple_name
from utils.errors import FaidLabError, UsageError
from utils.faid import format_trace
from utils.levels import load_rules, validate_rule
from utils.results_store import store_sweep
from utils.simulate import (
    csv_header,
    fer_sweep,
    load_decoder,
    verify_guaranteed,
    write_failure_log,
    write_sweep_csv,
)
from utils.tanner_graph import induced_subgraph, is_stopping_set, odd_checks, read_alist, read_node_sets, find_stopping_sets

logger = logging.getLogger(__name__)


class FaidLabGroup(click.Group):
    """Turns library errors into exit code 2 with the message on stderr."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except FaidLabError as exc:
            click.echo(f"❌ {exc}", err=True)
            ctx.exit(2)


def _config(path: str | None) -> dict:
    if path is None:
        return load_config("config.yml") if Path("config.yml").is_file() else {}
    return load_config(path)


def _support(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}", "--support") from None


def decoder_options(fn):
    """Options shared by every command that builds a decoder."""
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config (default ./config.yml)."),
        click.option("--code", type=click.Path(), default=None, help="Parity-check matrix in alist format."),
        click.option("--decoder", type=click.Choice(DECODERS), default=None),
        click.option("--rule", "rule_file", type=click.Path(), default=None, help="Rule definition file."),
        click.option("--rule-name", default=None, help="Phi_v of the FAID (and Phi_v^r)."),
        click.option("--decimation-rule", default=None, help="Phi_v^d used during decimation."),
        click.option("--schedule", type=click.Path(), default=None, help="Decimation schedule file."),
        click.option("--max-iter", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--workers", type=int, default=None),
        click.option("--quiet", is_flag=True, help="Hide progress bars."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _sim_config(kw: dict, **extra):
    return build_sim_config(
        _config(kw.pop("config_path")),
        code=kw.pop("code"),
        decoder=kw.pop("decoder"),
        rule_file=kw.pop("rule_file"),
        rule=kw.pop("rule_name"),
        decimation_rule=kw.pop("decimation_rule"),
        schedule=kw.pop("schedule"),
        max_iter=kw.pop("max_iter"),
        seed=kw.pop("seed"),
        workers=kw.pop("workers"),
        progress=not kw.pop("quiet"),
        **extra,
    )


@click.group(cls=FaidLabGroup)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool):
    """FAID / ADFAID decoding laboratory."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


# =========================
# decode
# =========================

@cli.command()
@decoder_options
@click.option("--support", default=None, help="Error positions, e.g. 3,17,40 (all-zero codeword sent).")
@click.option("--received", type=click.Path(exists=True), default=None, help="File holding the received 0/1 string.")
@click.option("--alpha", type=float, default=None, help="Crossover probability (BP channel LLRs).")
@click.option("--trace/--no-trace", default=True, help="Print the per-iteration message trace.")
@click.option("--trace-out", type=click.Path(), default=None, help="Write the trace here instead of stdout.")
@click.pass_context
def decode(ctx, support, received, alpha, trace, trace_out, **kw):
    """Decode one pattern and dump the full trace."""
    cfg = _sim_config(kw)
    spec = load_decoder(cfg)
    n = spec.graph.n
    if support is not None and received is not None:
        raise UsageError("give either --support or --received", "--support")
    if received is not None:
        bits = "".join(ch for ch in Path(received).read_text() if ch in "01")
        if len(bits) != n:
            raise UsageError(f"received word has {len(bits)} bits, code length is {n}", "--received")
        word = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    else:
        word = support_to_word(n, _support(support))
    if spec.name == "bp" and alpha is None:
        alpha = cfg.alphas[0] if cfg.alphas else None

    outcome, dtrace = spec.decode(word, alpha, trace=trace)
    if trace and outcome.trace is not None:
        text = format_trace(outcome.trace)
        if trace_out:
            Path(trace_out).write_text(text)
        else:
            click.echo(text, nl=False)

    rows = [
        ("decoder", spec.name),
        ("converged", int(outcome.converged)),
        ("iterations", outcome.iterations),
        ("residual errors", outcome.bit_errors() if received is None else "n/a"),
    ]
    if dtrace is not None:
        rows += [
            ("final rule", dtrace.final_rule_index),
            ("decimated", int(np.count_nonzero(dtrace.gamma))),
            ("residual size", len(dtrace.residual)),
        ]
    failed = outcome.bit_errors() > 0 if received is None else not outcome.converged
    if failed and received is None:
        record = classify_failure(spec.graph, dtrace, np.flatnonzero(word).tolist(), outcome.iterations, spec.degree_property_applies)
        rows += [
            ("residual is stopping set", int(record.residual_is_stopping_set)),
            ("error node decimated", int(record.decimated_error)),
        ]
    click.echo(tabulate(rows, tablefmt="plain"))
    ctx.exit(1 if failed else 0)


# =========================
# fer / verify
# =========================

@cli.command()
@decoder_options
@click.option("--alpha", default=None, help="Comma-separated crossover probabilities.")
@click.option("--frames", type=int, default=None, help="Frame budget per alpha.")
@click.option("--target-errors", type=int, default=None, help="Stop an alpha point after this many frame errors.")
@click.option("--out", type=click.Path(), default=None, help="CSV output (stdout when omitted).")
@click.option("--failures", type=click.Path(), default=None, help="Failure log output.")
@click.option("--duckdb", "duckdb_path", type=click.Path(), default=None, help="Also store rows in this DuckDB file.")
@click.pass_context
def fer(ctx, alpha, frames, target_errors, out, failures, duckdb_path, **kw):
    """Monte Carlo FER sweep on the BSC."""
    cfg = _sim_config(kw, alphas=alpha, frames=frames, target_errors=target_errors, out=out, failures=failures)
    result = fer_sweep(cfg)
    if cfg.out:
        write_sweep_csv(result, cfg.out)
        click.echo(tabulate(result.frame(), headers="keys", tablefmt="github", showindex=False))
        click.echo(f"✅ CSV written to {cfg.out}")
    else:
        click.echo(csv_header(cfg, result.decoder), nl=False)
        click.echo(result.frame().to_csv(index=False, lineterminator="\n"), nl=False)
    if cfg.failures:
        write_failure_log(result.failures, cfg.failures)
    if duckdb_path:
        store_sweep(duckdb_path, result.decoder, cfg.config_hash, result.frame(), result.failure_frame())

    bad = result.degree_violations
    if bad:
        click.echo(f"❌ {bad} failures break the residual degree property", err=True)
    ctx.exit(1 if bad else 0)


@cli.command()
@decoder_options
@click.option("--weight", "weights", type=int, multiple=True, required=True, help="Error weight (repeatable).")
@click.option("--mode", default="exhaustive", show_default=True, help="exhaustive or sample:N")
@click.option("--ceiling", type=int, default=None, help="Largest exhaustive enumeration allowed.")
@click.option("--failures", type=click.Path(), default=None, help="Dump failing supports here.")
@click.pass_context
def verify(ctx, weights, mode, ceiling, failures, **kw):
    """Guaranteed-correction check over all (or sampled) supports of a weight."""
    cfg = _sim_config(kw)
    spec = load_decoder(cfg)
    records = []
    ok = True
    for w in weights:
        report = verify_guaranteed(cfg, w, PatternMode.parse(mode, cfg.seed), spec, ceiling)
        click.echo(report.summary())
        records.extend(report.failures)
        ok = ok and report.passed
    if failures:
        write_failure_log(records, failures)
    ctx.exit(0 if ok else 1)


# =========================
# analyze
# =========================

@cli.group(cls=FaidLabGroup)
def analyze():
    """Subgraph analysis."""


def _node_sets(code: str, nodes: str | None, search: int | None, limit: int):
    graph = read_alist(code)
    sets = []
    if nodes:
        sets += read_node_sets(nodes, "candidate", graph.n)
    if search:
        sets += find_stopping_sets(graph, search, limit=limit)
    if not sets:
        raise UsageError("give a node-set file or a search size", "--nodes")
    return graph, sets


@analyze.command("stopping-set")
@click.option("--code", type=click.Path(exists=True), required=True)
@click.option("--nodes", type=click.Path(exists=True), default=None, help="NodeSet file, one set per line.")
@click.option("--search", type=int, default=None, help="Also search stopping sets up to this size (<= 13).")
@click.option("--limit", type=int, default=100, show_default=True)
def stopping_set(code, nodes, search, limit):
    """Report whether each node set is a stopping set."""
    graph, sets = _node_sets(code, nodes, search, limit)
    rows = [
        (" ".join(map(str, s.indices)), len(s), int(is_stopping_set(graph, s.indices)), odd_checks(graph, s.indices))
        for s in sets
    ]
    click.echo(tabulate(rows, headers=["nodes", "size", "stopping_set", "odd_checks"], tablefmt="plain"))


@analyze.command("critical-number")
@click.option("--code", type=click.Path(exists=True), required=True)
@click.option("--nodes", type=click.Path(exists=True), required=True, help="NodeSet file, one set per line.")
@click.option("--rule", "rule_file", type=click.Path(exists=True), required=True)
@click.option("--rule-name", default="faid7", show_default=True)
@click.option("--max-weight", type=int, default=8, show_default=True)
@click.option("--max-iter", type=int, default=100, show_default=True)
@click.option("--cap", type=int, default=16, show_default=True, help="Largest subgraph allowed.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV report.")
def critical_number_cmd(code, nodes, rule_file, rule_name, max_weight, max_iter, cap, workers, out):
    """Critical number of each subgraph under the isolation assumption."""
    graph = read_alist(code)
    rules = load_rules(rule_file)
    if rule_name not in rules:
        raise UsageError(f"no rule named {rule_name!r} in {rule_file}", "--rule-name")
    rule = rules[rule_name]
    rows = []
    for s in read_node_sets(nodes, "subgraph", graph.n):
        H = induced_subgraph(graph, s.indices)
        cn = critical_number(H, rule, max_weight, max_iter, workers, cap)
        rows.append(
            {
                "nodes": " ".join(map(str, s.indices)),
                "size": len(s),
                "checks": len(H.checks),
                "critical_number": str(cn),
                "witness": "" if cn.witness is None else ",".join(map(str, cn.witness)),
            }
        )
    df = pd.DataFrame(rows)
    if out:
        df.to_csv(out, index=False)
    click.echo(tabulate(df, headers="keys", tablefmt="plain", showindex=False))


# =========================
# rules
# =========================

@cli.group(cls=FaidLabGroup)
def rules():
    """Rule-file and decimation-rule utilities."""


@rules.command("validate")
@click.option("--rule", "rule_file", type=click.Path(exists=True), required=True)
@click.option("--name", default=None, help="Only this rule.")
@click.pass_context
def rules_validate(ctx, rule_file, name):
    """Check symmetry, monotonicity and saturation of every rule in the file."""
    parsed = load_rules(rule_file, validate=False)
    if name is not None:
        if name not in parsed:
            raise UsageError(f"no rule named {name!r} in {rule_file}", "--name")
        parsed = {name: parsed[name]}
    bad = 0
    for rule_name, rule in parsed.items():
        problems = validate_rule(rule)
        if problems:
            bad += 1
            click.echo(f"❌ {rule_name}")
            for p in problems:
                click.echo(f"   - {p}")
        else:
            click.echo(f"✅ {rule_name}")
    ctx.exit(1 if bad else 0)


@rules.command("closure")
@click.option("--generators", type=click.Path(exists=True), default=None, help="Generator triples (text or YAML).")
@click.option("--schedule", type=click.Path(exists=True), default=None, help="Schedule file: report every derived rule.")
@click.option("--list", "list_triples", is_flag=True, help="Print the members as well.")
def rules_closure(generators, schedule, list_triples):
    """Size of the monotone closure of a generator set (or of a schedule's rules)."""
    if generators is None and schedule is None:
        raise UsageError("give --generators or --schedule", "--generators")
    if generators is not None:
        xi = closure_expand(read_triples(generators))
        click.echo(len(xi))
        if list_triples:
            for t in xi:
                click.echo(triple_name(t))
    if schedule is not None:
        sched = load_schedule(schedule)
        rows = [("beta1", len(sched.xi1))] + [(n, len(r)) for n, r in zip(sched.rule_names, sched.rules)]
        click.echo(tabulate(rows, headers=["rule", "size"], tablefmt="plain"))


main = cli

if __name__ == "__main__":
    cli()
