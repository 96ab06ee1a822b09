# utils/simulate.py
"""
Monte Carlo FER sweeps, guaranteed-correction verification and failure
mining on the BSC, all under the all-zero codeword convention.

Work is cut into fixed chunks of frames (or supports) whose boundaries do not
depend on the number of workers, and results are scanned in frame order, so a
fixed seed gives identical outputs for any worker count.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import beta as beta_dist
from tqdm import tqdm

from utils.analysis import FailureRecord, classify_failure
from utils.bp import bp_decode
from utils.channel import (
    PatternMode,
    bsc_sample,
    enumerate_patterns,
    frame_rng,
    pattern_count,
    sample_support,
    support_to_word,
)
from utils.config_loader import SimConfig
from utils.decimation import AdfaidConfig, DecimationTrace, adfaid_decode, lambda_set, load_schedule
from utils.errors import ConfigError, UsageError
from utils.faid import DecodeOutcome, faid_decode
from utils.levels import VariableUpdateRule, load_rule
from utils.tanner_graph import (
    NodeSet,
    TannerGraph,
    find_stopping_sets,
    grow_trapping_candidates,
    read_alist,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["alpha", "frames", "frame_errors", "bit_errors", "fer", "ber", "mean_iters", "mean_rule_index"]


# =========================
# Decoders
# =========================

@dataclass(frozen=True)
class DecoderSpec:
    """A ready-to-run decoder; picklable so it can be shipped to joblib workers."""

    name: str
    graph: TannerGraph
    max_iter: int = 100
    rule: VariableUpdateRule | None = None
    adfaid: AdfaidConfig | None = None

    @property
    def degree_property_applies(self) -> bool:
        if self.adfaid is None:
            return False
        return all(rule.triples >= lambda_set(rule.s).triples for rule in self.adfaid.schedule.rules)

    def decode(self, received, alpha: float | None = None, trace: bool = False) -> tuple[DecodeOutcome, DecimationTrace | None]:
        if self.adfaid is not None:
            outcome, dtrace = adfaid_decode(self.graph, self.adfaid, received, trace=trace)
            outcome.decoder = self.name
            return outcome, dtrace
        if self.name == "bp":
            if alpha is None:
                raise UsageError("BP needs the channel crossover probability", "--alpha")
            return bp_decode(self.graph, alpha, received, self.max_iter, trace), None
        return faid_decode(self.graph, self.rule, received, self.max_iter, trace), None


def load_decoder(cfg: SimConfig, graph: TannerGraph | None = None, instrument: bool = False) -> DecoderSpec:
    graph = graph if graph is not None else read_alist(cfg.code)
    if cfg.decoder == "bp":
        return DecoderSpec("bp", graph, cfg.max_iter)
    rule_r = load_rule(cfg.rule_file, cfg.rule)
    if cfg.decoder == "faid":
        return DecoderSpec("faid", graph, cfg.max_iter, rule_r)
    schedule = load_schedule(cfg.schedule)
    if cfg.decoder == "dfaid":
        conf = AdfaidConfig.dfaid(rule_r, schedule.rules[0], cfg.max_iter, instrument=instrument)
        return DecoderSpec("dfaid", graph, cfg.max_iter, rule_r, conf)
    rule_d = load_rule(cfg.rule_file, cfg.decimation_rule)
    conf = AdfaidConfig(rule_d, rule_r, schedule, cfg.max_iter, instrument)
    return DecoderSpec("adfaid", graph, cfg.max_iter, rule_r, conf)


@dataclass
class FrameResult:
    index: int
    support: tuple[int, ...]
    failed: bool
    bit_errors: int
    iterations: int
    rule_index: int
    record: FailureRecord | None = None


def decode_support(spec: DecoderSpec, support: Sequence[int], alpha: float | None = None, index: int = 0) -> FrameResult:
    """Decode the all-zero codeword hit by `support`; a frame error is any nonzero decision."""
    support = tuple(int(v) for v in support)
    if not support:
        return FrameResult(index, support, False, 0, 0, 1)
    errors = support_to_word(spec.graph.n, support)
    outcome, trace = spec.decode(errors, alpha)
    bit_errors = int(np.count_nonzero(outcome.bits))
    failed = bit_errors > 0
    record = None
    if failed:
        record = classify_failure(spec.graph, trace, support, outcome.iterations, spec.degree_property_applies)
    return FrameResult(
        index,
        support,
        failed,
        bit_errors,
        outcome.iterations,
        trace.final_rule_index if trace is not None else 1,
        record,
    )


def check_all_zero_sufficiency(spec: DecoderSpec, support: Sequence[int], codeword: np.ndarray, alpha: float | None = None) -> bool:
    """Decoding codeword + flips must leave the same error positions as decoding the flips alone."""
    errors = support_to_word(spec.graph.n, support)
    base, _ = spec.decode(errors, alpha)
    shifted, _ = spec.decode(np.bitwise_xor(codeword.astype(np.uint8), errors), alpha)
    return base.converged == shifted.converged and np.array_equal(
        base.bits, np.bitwise_xor(shifted.bits, codeword.astype(np.uint8))
    )


# =========================
# Chunked parallel scanning
# =========================

def _chunks(it: Iterator, size: int) -> Iterator[list]:
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def _scan(tasks: Iterator[tuple[Callable, tuple]], workers: int) -> Iterator:
    """
    Run tasks in batches of `workers` and yield their results in task order.
    Callers stop early by breaking out and closing the generator.
    """
    tasks = iter(tasks)
    if workers == 1:
        for fn, args in tasks:
            yield fn(*args)
        return
    with Parallel(n_jobs=workers, backend="loky") as parallel:
        while True:
            batch = list(islice(tasks, workers))
            if not batch:
                return
            yield from parallel(delayed(fn)(*args) for fn, args in batch)


# =========================
# FER sweeps
# =========================

@dataclass
class SweepRow:
    alpha: float
    frames: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    mean_iters: float
    mean_rule_index: float | None = None

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


@dataclass
class FailureEntry:
    alpha: float
    frame: int
    record: FailureRecord

    def log_line(self) -> str:
        return self.record.log_line(self.alpha, self.frame)


@dataclass
class SweepResult:
    decoder: str
    config: SimConfig
    rows: list[SweepRow] = field(default_factory=list)
    failures: list[FailureEntry] = field(default_factory=list)

    @property
    def degree_violations(self) -> int:
        return sum(1 for f in self.failures if f.record.degree_violation)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_dict() for r in self.rows], columns=CSV_COLUMNS)

    def failure_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "alpha": f.alpha,
                    "frame": f.frame,
                    "support": ",".join(map(str, f.record.support)),
                    "final_rule": f.record.final_rule_index,
                    "residual": len(f.record.residual),
                    "stopping_set": int(f.record.residual_is_stopping_set),
                    "decimated_error": int(f.record.decimated_error),
                    "degree_violation": int(f.record.degree_violation),
                }
                for f in self.failures
            ],
            columns=["alpha", "frame", "support", "final_rule", "residual", "stopping_set",
                     "decimated_error", "degree_violation"],
        )


def _frame_chunk(spec: DecoderSpec, alpha: float, alpha_index: int, seed: int, start: int, stop: int) -> list[FrameResult]:
    out = []
    for f in range(start, stop):
        errors = bsc_sample(spec.graph.n, alpha, frame_rng(seed, alpha_index, f))
        out.append(decode_support(spec, np.flatnonzero(errors).tolist(), alpha, f))
    return out


def fer_sweep(cfg: SimConfig, spec: DecoderSpec | None = None) -> SweepResult:
    """Per alpha: decode frames in order until the frame budget or the target error count is reached."""
    if not cfg.alphas:
        raise ConfigError("at least one alpha is required for a FER sweep")
    spec = spec if spec is not None else load_decoder(cfg)
    result = SweepResult(spec.name, cfg)
    n = spec.graph.n

    for a_idx, alpha in enumerate(cfg.alphas):
        if spec.name == "bp" and alpha >= 0.5:
            raise UsageError("BP needs alpha < 0.5", "--alpha")
        frames = errors = bit_errors = iters = rule_sum = 0
        bar = tqdm(total=cfg.frames, desc=f"{spec.name} α={alpha:g}", disable=not cfg.progress, leave=False)
        tasks = (
            (_frame_chunk, (spec, alpha, a_idx, cfg.seed, start, min(start + cfg.chunk, cfg.frames)))
            for start in range(0, cfg.frames, cfg.chunk)
        )
        scan = _scan(tasks, cfg.workers)
        done = False
        for chunk in scan:
            for fr in chunk:
                frames += 1
                iters += fr.iterations
                rule_sum += fr.rule_index
                if fr.failed:
                    errors += 1
                    bit_errors += fr.bit_errors
                    result.failures.append(FailureEntry(alpha, fr.index, fr.record))
                if cfg.target_errors is not None and errors >= cfg.target_errors:
                    done = True
                    break
            bar.update(len(chunk))
            if done:
                break
        scan.close()
        bar.close()

        row = SweepRow(
            alpha=alpha,
            frames=frames,
            frame_errors=errors,
            bit_errors=bit_errors,
            fer=errors / frames,
            ber=bit_errors / (frames * n),
            mean_iters=iters / frames,
            mean_rule_index=(rule_sum / frames) if spec.adfaid is not None else None,
        )
        result.rows.append(row)
        logger.info("📡 %s alpha=%g: %d/%d frame errors (FER %.3e)", spec.name, alpha, errors, frames, row.fer)

    if result.degree_violations:
        logger.error("❌ %s: %d failures break the residual degree property", spec.name, result.degree_violations)
    return result


# =========================
# Guaranteed correction
# =========================

@dataclass
class VerifyReport:
    decoder: str
    weight: int
    mode: str
    decoded: int = 0
    failures: list[FailureRecord] = field(default_factory=list)

    @property
    def degree_violations(self) -> int:
        return sum(1 for r in self.failures if r.degree_violation)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "✅" if self.passed else "❌"
        return (
            f"{status} {self.decoder} weight {self.weight} ({self.mode}): "
            f"{self.decoded - len(self.failures)}/{self.decoded} corrected, "
            f"{len(self.failures)} failures, {self.degree_violations} degree-property violations"
        )


def _support_chunk(spec: DecoderSpec, supports: list[tuple[int, ...]]) -> tuple[int, list[FailureRecord]]:
    failures = []
    for support in supports:
        fr = decode_support(spec, support)
        if fr.failed:
            failures.append(fr.record)
    return len(supports), failures


def verify_guaranteed(
    cfg: SimConfig,
    weight: int,
    mode: PatternMode | str = "exhaustive",
    spec: DecoderSpec | None = None,
    ceiling: int | None = None,
) -> VerifyReport:
    """Decode every support the pattern stream yields; report all failures with their records."""
    if isinstance(mode, str):
        mode = PatternMode.parse(mode, cfg.seed)
    spec = spec if spec is not None else load_decoder(cfg)
    if spec.name == "bp":
        raise UsageError("guaranteed-correction runs use hard-decision decoders (faid, adfaid, dfaid)", "--decoder")
    n = spec.graph.n
    kwargs = {} if ceiling is None else {"ceiling": ceiling}
    stream = enumerate_patterns(n, weight, mode, **kwargs)
    report = VerifyReport(spec.name, weight, str(mode))
    total = pattern_count(n, weight, mode)

    tasks = ((_support_chunk, (spec, block)) for block in _chunks(stream, cfg.chunk))
    with tqdm(total=total, desc=f"verify w={weight}", disable=not cfg.progress, leave=False) as bar:
        for count, failures in _scan(tasks, cfg.workers):
            report.decoded += count
            report.failures.extend(failures)
            bar.update(count)
    logger.info(report.summary())
    return report


# =========================
# Confidence intervals
# =========================

def fer_confidence_interval(frame_errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval for a binomial proportion."""
    if frames < 1 or not 0 <= frame_errors <= frames:
        raise UsageError(f"invalid counts: {frame_errors} errors in {frames} frames")
    tail = (1.0 - level) / 2.0
    lo = 0.0 if frame_errors == 0 else float(beta_dist.ppf(tail, frame_errors, frames - frame_errors + 1))
    hi = 1.0 if frame_errors == frames else float(beta_dist.ppf(1.0 - tail, frame_errors + 1, frames - frame_errors))
    return lo, hi


@dataclass(frozen=True)
class FerComparison:
    alpha: float
    fer_a: float
    fer_b: float
    ci_a: tuple[float, float]
    ci_b: tuple[float, float]
    verdict: str


def compare_fer(rows_a: Iterable[SweepRow], rows_b: Iterable[SweepRow], level: float = 0.95) -> list[FerComparison]:
    """
    Check FER(a) <= FER(b) at every common alpha: 'ordered' when the point
    estimates agree and the intervals are disjoint, 'violated' when they
    disagree with disjoint intervals, else 'inconclusive'.
    """
    by_alpha = {r.alpha: r for r in rows_b}
    out = []
    for ra in rows_a:
        rb = by_alpha.get(ra.alpha)
        if rb is None:
            continue
        ci_a = fer_confidence_interval(ra.frame_errors, ra.frames, level)
        ci_b = fer_confidence_interval(rb.frame_errors, rb.frames, level)
        disjoint = ci_a[1] < ci_b[0] or ci_b[1] < ci_a[0]
        if disjoint and ra.fer <= rb.fer:
            verdict = "ordered"
        elif disjoint:
            verdict = "violated"
        else:
            verdict = "inconclusive"
        out.append(FerComparison(ra.alpha, ra.fer, rb.fer, ci_a, ci_b, verdict))
    return out


# =========================
# Failure mining
# =========================

def candidate_sets(
    graph: TannerGraph,
    trapping_sizes: Iterable[int] = (5, 6, 7, 8),
    beam: int = 16,
    stopping_max_size: int | None = None,
    stopping_limit: int = 200,
) -> list[NodeSet]:
    """Small trapping-set candidates and short stopping sets, deduplicated, best first."""
    found: dict[tuple[int, ...], NodeSet] = {}
    if stopping_max_size:
        for s in find_stopping_sets(graph, stopping_max_size, limit=stopping_limit):
            found.setdefault(s.indices, s)
    for size in trapping_sizes:
        for s in grow_trapping_candidates(graph, size, beam):
            found.setdefault(s.indices, s)
    logger.info("🧩 %d candidate subgraphs for failure mining", len(found))
    return list(found.values())


def biased_support(n: int, weight: int, candidates: Sequence[NodeSet], rng: np.random.Generator, uniform_share: float = 0.1) -> tuple[int, ...]:
    """Mostly supports drawn inside one candidate set (topped up uniformly); sometimes fully uniform."""
    if not candidates or rng.random() < uniform_share:
        return sample_support(n, weight, rng)
    members = list(candidates[int(rng.integers(len(candidates)))].indices)
    if len(members) >= weight:
        return tuple(sorted(rng.choice(members, size=weight, replace=False).tolist()))
    rest = np.setdiff1d(np.arange(n), members)
    extra = rng.choice(rest, size=weight - len(members), replace=False).tolist()
    return tuple(sorted(members + extra))


@dataclass
class MiningHit:
    index: int
    support: tuple[int, ...]
    record: FailureRecord


@dataclass
class MiningReport:
    decoder: str
    weight: int
    tried: int = 0
    hits: list[MiningHit] = field(default_factory=list)

    @property
    def degree_violations(self) -> int:
        return sum(1 for h in self.hits if h.record.degree_violation)


def _mine_chunk(
    target: DecoderSpec,
    reference: DecoderSpec | None,
    candidates: list[NodeSet],
    weight: int,
    seed: int,
    alpha: float | None,
    start: int,
    stop: int,
) -> tuple[int, list[MiningHit]]:
    hits = []
    for i in range(start, stop):
        support = biased_support(target.graph.n, weight, candidates, frame_rng(seed, weight, i))
        fr = decode_support(target, support, alpha, i)
        if not fr.failed:
            continue
        if reference is not None and decode_support(reference, support, alpha, i).failed:
            continue
        hits.append(MiningHit(i, support, fr.record))
    return stop - start, hits


def mine_failures(
    target: DecoderSpec,
    weight: int,
    budget: int,
    candidates: Sequence[NodeSet] = (),
    reference: DecoderSpec | None = None,
    seed: int = 0,
    alpha: float | None = None,
    stop_after: int = 1,
    workers: int = 1,
    chunk: int = 512,
    progress: bool = True,
) -> MiningReport:
    """
    Search biased supports of the given weight for ones `target` fails on
    (and `reference`, when given, corrects). Stops after `stop_after`
    distinct hits or `budget` candidates.
    """
    if target.name == "bp" and alpha is None:
        raise UsageError("mining against BP needs a crossover probability for the channel LLRs", "--alpha")
    if budget < 1:
        raise UsageError("mining budget must be >= 1", "--budget")
    candidates = list(candidates)
    report = MiningReport(target.name, weight)
    tasks = (
        (_mine_chunk, (target, reference, candidates, weight, seed, alpha, start, min(start + chunk, budget)))
        for start in range(0, budget, chunk)
    )
    seen: set[tuple[int, ...]] = set()
    scan = _scan(tasks, workers)
    with tqdm(total=budget, desc=f"mine {target.name} w={weight}", disable=not progress, leave=False) as bar:
        for count, hits in scan:
            report.tried += count
            bar.update(count)
            for hit in hits:
                if hit.support in seen:
                    continue
                seen.add(hit.support)
                report.hits.append(hit)
                if len(report.hits) >= stop_after:
                    report.tried = hit.index + 1
                    break
            if len(report.hits) >= stop_after:
                break
    scan.close()
    if report.hits:
        logger.info("✅ %s: %d failing weight-%d supports found", target.name, len(report.hits), weight)
    else:
        logger.warning("⚠️ %s: no failing weight-%d support in %d candidates", target.name, weight, report.tried)
    return report


# =========================
# Output files
# =========================

def csv_header(cfg: SimConfig, decoder: str | None = None) -> str:
    return f"# seed={cfg.seed} decoder={decoder or cfg.decoder} config={cfg.config_hash[:12]}\n"


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(csv_header(result.config, result.decoder))
        result.frame().to_csv(f, index=False, lineterminator="\n")


def read_sweep_csv(path: str | Path) -> pd.DataFrame:
    # round_trip parsing gives back the exact fer/ber floats that were written
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def write_failure_log(entries: Iterable[FailureEntry | FailureRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for entry in entries:
            f.write(entry.log_line() + "\n")


_LOG_FIELD = re.compile(r"(\w+)=(\S*)")


def read_failure_log(path: str | Path) -> list[dict]:
    """Parse failure log lines back into dicts (support as a tuple of ints)."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entry = dict(_LOG_FIELD.findall(line))
        if "support" not in entry:
            raise UsageError(f"{path}:{lineno}: failure line without a support")
        entry["support"] = tuple(int(v) for v in entry["support"].split(",") if v)
        for key in ("frame", "j", "residual", "stopping_set"):
            if key in entry:
                entry[key] = int(entry[key])
        if "alpha" in entry:
            entry["alpha"] = float(entry["alpha"])
        out.append(entry)
    return out
