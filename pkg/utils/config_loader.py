# utils/config_loader.py
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from utils.errors import ConfigError

DECODERS = ("faid", "adfaid", "dfaid", "bp")

# Fields that never change a simulation outcome and stay out of the config hash.
_UNHASHED = {"workers", "out", "failures", "duckdb", "progress"}


def load_config(config_path="config.yml") -> dict:
    """Load and parse a YAML configuration file."""
    try:
        with open(config_path, "r") as f:
            config = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {config_path} is not valid YAML: {exc}") from exc
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"config file {config_path} must be a mapping")
    return config


@dataclass(frozen=True)
class SimConfig:
    code: str
    decoder: str
    rule_file: str
    rule: str
    decimation_rule: str
    schedule: str | None
    alphas: tuple[float, ...]
    frames: int
    target_errors: int | None
    max_iter: int = 100
    seed: int = 0
    workers: int = 1
    chunk: int = 512
    out: str | None = None
    failures: str | None = None
    duckdb: str | None = None
    progress: bool = True

    def hashed_fields(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in _UNHASHED}

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"), default=list)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_decoder(self, decoder: str) -> "SimConfig":
        return validate_sim_config(replace(self, decoder=decoder))


def _parse_alphas(raw) -> tuple[float, ...]:
    if isinstance(raw, str):
        raw = [x for x in raw.split(",") if x.strip()]
    if isinstance(raw, (int, float)):
        raw = [raw]
    try:
        return tuple(float(a) for a in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"alpha list is not numeric: {raw!r}") from exc


def validate_sim_config(cfg: SimConfig) -> SimConfig:
    if cfg.decoder not in DECODERS:
        raise ConfigError(f"unknown decoder {cfg.decoder!r}; choose one of {', '.join(DECODERS)}")
    for a in cfg.alphas:
        if not 0.0 <= a <= 0.5:
            raise ConfigError(f"alpha must be in [0, 0.5], got {a}")
    if cfg.frames < 1:
        raise ConfigError(f"frames must be >= 1, got {cfg.frames}")
    if cfg.target_errors is not None and cfg.target_errors < 1:
        raise ConfigError(f"target_errors must be >= 1, got {cfg.target_errors}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if cfg.chunk < 1:
        raise ConfigError(f"chunk must be >= 1, got {cfg.chunk}")
    if cfg.max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {cfg.max_iter}")
    needed = [("code", cfg.code)]
    if cfg.decoder != "bp":
        needed.append(("rule file", cfg.rule_file))
    if cfg.decoder in ("adfaid", "dfaid"):
        if not cfg.schedule:
            raise ConfigError(f"decoder {cfg.decoder} needs a schedule file")
        needed.append(("schedule", cfg.schedule))
    for label, path in needed:
        if not Path(path).is_file():
            raise ConfigError(f"{label} file not found: {path}")
    return cfg


def build_sim_config(config: dict | None = None, **overrides) -> SimConfig:
    """
    Merge config.yml values with explicit overrides (None means "not given").
    Raises ConfigError on anything invalid or missing.
    """
    config = config or {}
    sim = config.get("simulation", {}) or {}
    rules = config.get("rules", {}) or {}
    output = config.get("output", {}) or {}
    code = (config.get("code", {}) or {}).get("alist")

    decoders = sim.get("decoders") or ["faid"]
    base = {
        "code": code,
        "decoder": decoders[0],
        "rule_file": rules.get("file"),
        "rule": rules.get("faid", "faid7"),
        "decimation_rule": rules.get("decimation", "decimation_lt"),
        "schedule": config.get("schedule"),
        "alphas": sim.get("alpha", []),
        "frames": sim.get("frames", 10_000),
        "target_errors": sim.get("target_errors", 100),
        "max_iter": sim.get("max_iter", 100),
        "seed": sim.get("seed", 0),
        "workers": sim.get("workers", 1),
        "chunk": sim.get("chunk", 512),
        "duckdb": output.get("duckdb"),
    }
    known = {f.name for f in fields(SimConfig)}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown configuration field {key!r}")
        if value is not None:
            base[key] = value

    if not base["code"]:
        raise ConfigError("no code alist configured (code.alist or --code)")
    try:
        cfg = SimConfig(
            code=str(base["code"]),
            decoder=str(base["decoder"]),
            rule_file=str(base["rule_file"]) if base["rule_file"] else "",
            rule=str(base["rule"]),
            decimation_rule=str(base["decimation_rule"]),
            schedule=str(base["schedule"]) if base["schedule"] else None,
            alphas=_parse_alphas(base["alphas"]),
            frames=int(base["frames"]),
            target_errors=None if base["target_errors"] in (None, 0) else int(base["target_errors"]),
            max_iter=int(base["max_iter"]),
            seed=int(base["seed"]),
            workers=int(base["workers"]),
            chunk=int(base["chunk"]),
            out=base.get("out"),
            failures=base.get("failures"),
            duckdb=base.get("duckdb"),
            progress=bool(base.get("progress", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}") from exc
    return validate_sim_config(cfg)
