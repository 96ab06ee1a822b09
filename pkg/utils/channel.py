# utils/channel.py
"""BSC error patterns, per-frame random streams and error-support enumeration."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterator

import numpy as np

from utils.errors import EnumerationCeilingError, UsageError

logger = logging.getLogger(__name__)

EXHAUSTIVE_CEILING = 50_000_000


def frame_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one frame, e.g. frame_rng(seed, alpha_index, frame)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def check_alpha(alpha: float, strict: bool = False) -> float:
    alpha = float(alpha)
    if strict and not 0.0 < alpha < 0.5:
        raise UsageError(f"crossover probability must be in (0, 0.5), got {alpha}", "--alpha")
    if not 0.0 <= alpha <= 0.5:
        raise UsageError(f"crossover probability must be in [0, 0.5], got {alpha}", "--alpha")
    return alpha


def bsc_sample(n: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. flips with probability alpha (the error pattern for the all-zero codeword)."""
    alpha = check_alpha(alpha)
    if alpha == 0.0:
        return np.zeros(n, dtype=np.uint8)
    return (rng.random(n) < alpha).astype(np.uint8)


def support_to_word(n: int, support) -> np.ndarray:
    word = np.zeros(n, dtype=np.uint8)
    idx = np.asarray(list(support), dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise UsageError(f"support {list(support)} outside [0, {n})")
    word[idx] = 1
    return word


@dataclass(frozen=True)
class PatternMode:
    """'exhaustive' or 'sample:N' (N uniform supports, reproducible from the seed)."""

    kind: str
    count: int | None = None
    seed: int = 0

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "PatternMode":
        text = text.strip()
        if text == "exhaustive":
            return cls("exhaustive", None, seed)
        if text.startswith("sample:"):
            try:
                count = int(float(text.split(":", 1)[1]))
            except ValueError:
                count = -1
            if count < 1:
                raise UsageError(f"sample count must be a positive integer, got {text!r}", "--mode")
            return cls("sample", count, seed)
        raise UsageError(f"expected 'exhaustive' or 'sample:N', got {text!r}", "--mode")

    def __str__(self) -> str:
        return self.kind if self.kind == "exhaustive" else f"sample:{self.count}"


def pattern_count(n: int, weight: int, mode: PatternMode) -> int:
    return comb(n, weight) if mode.kind == "exhaustive" else int(mode.count)


def sample_support(n: int, weight: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(sorted(rng.choice(n, size=weight, replace=False).tolist()))


def enumerate_patterns(
    n: int,
    weight: int,
    mode: PatternMode | str = "exhaustive",
    ceiling: int = EXHAUSTIVE_CEILING,
    start: int = 0,
) -> Iterator[tuple[int, ...]]:
    """
    Stream weight-`weight` supports. Exhaustive mode is lexicographic; sample
    mode draws support i from its own stream so any slice can be regenerated
    independently. `start` skips the first supports (used by chunked workers).
    """
    if isinstance(mode, str):
        mode = PatternMode.parse(mode)
    if not 0 <= weight <= n:
        raise UsageError(f"weight must be in [0, {n}], got {weight}", "--weight")
    if mode.kind == "exhaustive":
        total = comb(n, weight)
        if total > ceiling:
            raise EnumerationCeilingError(
                f"C({n}, {weight}) = {total} supports exceeds the ceiling {ceiling}; use --mode sample:N"
            )
        it = combinations(range(n), weight)
        for _ in range(start):
            next(it, None)
        yield from it
        return
    for i in range(start, mode.count):
        yield sample_support(n, weight, frame_rng(mode.seed, weight, i))


def pattern_slice(n: int, weight: int, mode: PatternMode, start: int, stop: int) -> list[tuple[int, ...]]:
    """Supports start..stop-1 of the stream."""
    if mode.kind == "sample":
        return [sample_support(n, weight, frame_rng(mode.seed, weight, i)) for i in range(start, stop)]
    out = []
    for i, support in enumerate(enumerate_patterns(n, weight, mode, start=start), start=start):
        if i >= stop:
            break
        out.append(support)
    return out
