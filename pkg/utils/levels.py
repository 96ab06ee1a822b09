# utils/levels.py
"""
Message alphabet and node update rules for multilevel FAIDs.

A level of the alphabet M = {0, ±L_1, ..., ±L_s} is stored as its signed
index: -s..s. The sign of the index is the message sign and |index| picks
the magnitude L_|index| (index 0 is the zero message). Levels are compared by
index, which is the order every monotonicity property uses.

Variable-node rules are either look-up tables (stored for y = +C only, the
-C half is derived by odd symmetry) or linear-threshold rules
Q(m1 + m2 + y). Both expose `table()`, the full (2, 2s+1, 2s+1) array the
decoders index into; plane 0 is y = +C and plane 1 is y = -C.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml

from utils.errors import RuleFileError, UsageError

DEFAULT_S = 3
Level = int


def negate(level: Level) -> Level:
    return -level


def level_name(level: Level) -> str:
    """0 -> '0', 2 -> 'L2', -3 -> '-L3'."""
    if level == 0:
        return "0"
    return f"{'-' if level < 0 else ''}L{abs(level)}"


def parse_level(token: str) -> Level:
    """Accept either a signed index ('-2') or the level name ('-L2')."""
    text = token.strip().upper().replace("+", "")
    neg = text.startswith("-")
    body = text.lstrip("-")
    if body.startswith("L"):
        body = body[1:]
    value = int(body)
    return -value if neg else value


@dataclass(frozen=True)
class ChannelValue:
    """y_i = (-1)^{r_i} C. sign = +1 iff the received bit is 0."""

    sign: int
    magnitude: float = 1.0

    @classmethod
    def from_bit(cls, bit: int, magnitude: float = 1.0) -> "ChannelValue":
        return cls(sign=-1 if bit else 1, magnitude=magnitude)

    @property
    def bit(self) -> int:
        return 0 if self.sign > 0 else 1


def _sign_of(y: ChannelValue | int) -> int:
    sign = y.sign if isinstance(y, ChannelValue) else int(y)
    if sign not in (1, -1):
        raise UsageError(f"channel sign must be +1 or -1, got {sign}")
    return sign


# =========================
# Check node
# =========================

def check_update(messages: Sequence[Level]) -> Level:
    """Phi_c: product of signs times the minimum magnitude."""
    if len(messages) == 0:
        raise UsageError("check_update needs at least one incoming message")
    magnitude = min(abs(int(m)) for m in messages)
    if magnitude == 0:
        return 0
    negatives = sum(1 for m in messages if m < 0)
    return -magnitude if negatives % 2 else magnitude


def extrinsic_check_matrix(msgs: np.ndarray, s: int = DEFAULT_S) -> np.ndarray:
    """
    Vectorised Phi_c over the rows of `msgs` (checks x slots).

    Entry (c, k) of the result is Phi_c applied to every slot of row c except
    slot k. Unused slots must be padded with +s so they affect neither the
    minimum nor the sign; a check with no other input sends +L_s.
    """
    mags = np.abs(msgs)
    neg = msgs < 0
    rows = np.arange(msgs.shape[0])

    first = mags.argmin(axis=1)
    min1 = mags[rows, first]
    masked = mags.copy()
    masked[rows, first] = np.iinfo(masked.dtype).max
    min2 = np.minimum(masked.min(axis=1), s)

    ext_mag = np.where(np.arange(msgs.shape[1])[None, :] == first[:, None], min2[:, None], min1[:, None])
    parity = neg.sum(axis=1) % 2
    ext_neg = (parity[:, None] == 1) ^ neg
    return np.where(ext_neg, -ext_mag, ext_mag).astype(msgs.dtype)


# =========================
# Variable node rules
# =========================

@dataclass(frozen=True)
class ThresholdRule:
    """Linear-threshold rule Phi_v(y, m1, m2) = Q(m1 + m2 + y) (weight fixed to 1)."""

    levels: tuple[float, ...]
    thresholds: tuple[float, ...]
    channel: float
    name: str = "threshold"
    kind: str = field(default="threshold", init=False)

    @property
    def s(self) -> int:
        return len(self.levels)

    def value(self, level: Level) -> float:
        if level == 0:
            return 0.0
        magnitude = self.levels[abs(level) - 1]
        return magnitude if level > 0 else -magnitude

    def quantize(self, x: float) -> Level:
        # closed lower bound: T_i <= |x| < T_{i+1}
        ax = abs(x)
        index = 0
        for i, t in enumerate(self.thresholds, start=1):
            if ax >= t:
                index = i
        if index == 0:
            return 0
        return index if x > 0 else -index

    def evaluate(self, sign: int, m1: Level, m2: Level) -> Level:
        return self.quantize(self.value(m1) + self.value(m2) + self.channel * sign)

    @cached_property
    def _table(self) -> np.ndarray:
        s = self.s
        out = np.zeros((2, 2 * s + 1, 2 * s + 1), dtype=np.int8)
        for plane, sign in enumerate((1, -1)):
            for a in range(-s, s + 1):
                for b in range(-s, s + 1):
                    out[plane, a + s, b + s] = self.evaluate(sign, a, b)
        out.setflags(write=False)
        return out

    def table(self) -> np.ndarray:
        return self._table


@dataclass(frozen=True)
class LutRule:
    """Look-up table rule; `plus_table[a + s][b + s]` is Phi_v(+C, a, b)."""

    plus_table: tuple[tuple[int, ...], ...]
    name: str = "lut"
    kind: str = field(default="lut", init=False)

    @property
    def s(self) -> int:
        return (len(self.plus_table) - 1) // 2

    def evaluate(self, sign: int, m1: Level, m2: Level) -> Level:
        s = self.s
        if sign > 0:
            return self.plus_table[m1 + s][m2 + s]
        return -self.plus_table[-m1 + s][-m2 + s]

    @cached_property
    def _table(self) -> np.ndarray:
        plus = np.asarray(self.plus_table, dtype=np.int8)
        out = np.stack([plus, -plus[::-1, ::-1]])
        out.setflags(write=False)
        return out

    def table(self) -> np.ndarray:
        return self._table

    @classmethod
    def from_rule(cls, rule: "VariableUpdateRule", name: str | None = None) -> "LutRule":
        plus = rule.table()[0]
        return cls(tuple(tuple(int(v) for v in row) for row in plus), name=name or rule.name)


VariableUpdateRule = Union[LutRule, ThresholdRule]


def quantize(x: float, rule: ThresholdRule) -> Level:
    return rule.quantize(x)


def vn_update(rule: VariableUpdateRule, y: ChannelValue | int, m1: Level, m2: Level) -> Level:
    return rule.evaluate(_sign_of(y), m1, m2)


def decimated_vn_update(
    gamma: int,
    y: ChannelValue | int,
    m1: Level,
    m2: Level,
    rule_d: VariableUpdateRule,
    rule_r: VariableUpdateRule,
    decimating: bool,
) -> Level:
    """Phi_v^D: clamp decimated nodes to gamma*L_s, else Phi_v^d during decimation and Phi_v^r after."""
    if gamma:
        return gamma * rule_d.s
    return vn_update(rule_d if decimating else rule_r, y, m1, m2)


def saturating_sequence(rule: VariableUpdateRule, k: int) -> list[Level]:
    """Messages of an all-correct tree: m_1 = Phi(+C,0,0), m_t = Phi(+C, m_{t-1}, m_{t-1})."""
    if k < 1:
        raise UsageError("saturating_sequence needs k >= 1")
    seq = []
    m = 0
    for _ in range(k):
        m = rule.evaluate(1, m, m)
        seq.append(m)
    return seq


def validate_rule(rule: VariableUpdateRule) -> list[str]:
    """Return a list of violations; empty means the rule is usable by the decoders."""
    violations: list[str] = []
    s = rule.s

    if isinstance(rule, ThresholdRule):
        if len(rule.thresholds) != s:
            violations.append(f"expected {s} thresholds, got {len(rule.thresholds)}")
        if any(v <= 0 for v in rule.levels) or any(
            b <= a for a, b in zip(rule.levels, rule.levels[1:])
        ):
            violations.append(f"levels must be positive and strictly increasing: {rule.levels}")
        if any(v <= 0 for v in rule.thresholds) or any(
            b <= a for a, b in zip(rule.thresholds, rule.thresholds[1:])
        ):
            violations.append(f"thresholds must be positive and strictly increasing: {rule.thresholds}")
        if rule.channel <= 0:
            violations.append(f"channel magnitude must be positive: {rule.channel}")
        if violations:
            return violations
    else:
        size = 2 * s + 1
        if len(rule.plus_table) != size or any(len(row) != size for row in rule.plus_table):
            return [f"table must be {size}x{size}"]

    plus = np.asarray(rule.table()[0] if isinstance(rule, ThresholdRule) else rule.plus_table, dtype=int)
    size = 2 * s + 1

    for a in range(size):
        for b in range(size):
            name = f"({level_name(a - s)}, {level_name(b - s)})"
            if abs(plus[a, b]) > s:
                violations.append(f"entry {name} = {plus[a, b]} outside the alphabet")
            if b > a and plus[a, b] != plus[b, a]:
                violations.append(f"entry {name} = {plus[a, b]} breaks swap symmetry ({plus[b, a]})")
            if b + 1 < size and plus[a, b + 1] < plus[a, b]:
                violations.append(
                    f"entry {name} = {plus[a, b]} breaks monotonicity in m2 "
                    f"(next {plus[a, b + 1]})"
                )
            if a + 1 < size and plus[a + 1, b] < plus[a, b]:
                violations.append(
                    f"entry {name} = {plus[a, b]} breaks monotonicity in m1 "
                    f"(next {plus[a + 1, b]})"
                )

    m = 0
    for expected in range(1, s + 1):
        got = int(plus[m + s, m + s])
        if got != expected:
            violations.append(
                f"saturation: Phi(+C, {level_name(m)}, {level_name(m)}) = {level_name(got)}, "
                f"expected {level_name(expected)}"
            )
        m = expected
    return violations


# =========================
# Rule files
# =========================

def parse_rule(name: str, section: dict) -> VariableUpdateRule:
    if not isinstance(section, dict) or "kind" not in section:
        raise RuleFileError(f"rule '{name}': missing 'kind'")
    kind = section["kind"]
    if kind == "lut":
        raw = section.get("table")
        if raw is None:
            raise RuleFileError(f"rule '{name}': lut needs 'table'")
        if isinstance(raw, list):
            tokens = [v for row in raw for v in (row if isinstance(row, list) else [row])]
        else:
            tokens = str(raw).split()
        try:
            values = [int(t) for t in tokens]
        except ValueError as exc:
            raise RuleFileError(f"rule '{name}': non-integer table entry ({exc})") from exc
        size = int(round(len(values) ** 0.5))
        if size * size != len(values) or size % 2 == 0:
            raise RuleFileError(f"rule '{name}': {len(values)} entries do not form an odd square table")
        rows = tuple(tuple(values[r * size:(r + 1) * size]) for r in range(size))
        return LutRule(rows, name=name)
    if kind == "threshold":
        try:
            levels = tuple(float(v) for v in section["levels"])
            thresholds = tuple(float(v) for v in section["thresholds"])
            channel = float(section["channel"])
        except (KeyError, TypeError, ValueError) as exc:
            raise RuleFileError(f"rule '{name}': threshold needs levels, thresholds, channel ({exc})") from exc
        return ThresholdRule(levels, thresholds, channel, name=name)
    raise RuleFileError(f"rule '{name}': unknown kind '{kind}' (expected lut or threshold)")


def load_rules(path: str | Path, validate: bool = True) -> dict[str, VariableUpdateRule]:
    """Load every rule section of a YAML rule file."""
    try:
        with open(path, "r") as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise RuleFileError(f"cannot read rule file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise RuleFileError(f"rule file {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or not doc:
        raise RuleFileError(f"rule file {path} has no rule sections")

    rules = {name: parse_rule(name, section) for name, section in doc.items()}
    if validate:
        for name, rule in rules.items():
            problems = validate_rule(rule)
            if problems:
                raise RuleFileError(f"rule '{name}' is invalid: " + "; ".join(problems[:5]))
    return rules


def load_rule(path: str | Path, name: str, validate: bool = True) -> VariableUpdateRule:
    rules = load_rules(path, validate=validate)
    if name not in rules:
        raise RuleFileError(f"rule '{name}' not found in {path} (have: {', '.join(rules)})")
    return rules[name]
