"""Run configuration: strict JSON parsing with full-field validation.

Unknown keys are rejected rather than ignored so a typo cannot silently
fall back to a default.  dump_config(parse_config(x)) round-trips.
"""

from __future__ import annotations

import dataclasses
import json

from .core import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T, SCHEDULE_KINDS
from .errors import ConfigError


@dataclasses.dataclass(frozen=True)
class ScheduleConfig:
    T: int = DEFAULT_T
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    kind: str = "scaled_linear"


@dataclasses.dataclass(frozen=True)
class SamplerConfig:
    eta: float = 0.0
    beta: float = 0.9  # momentum decay
    lam: float = 1.0  # drift direction scale; serialized as "lambda"
    kappa0: float = 2.0


@dataclasses.dataclass(frozen=True)
class InjectionConfig:
    t_prime: int = 300
    strength: float = 2.0
    gamma_res: float = 0.05
    tau: float = 0.5
    cutoff: float = 0.25


@dataclasses.dataclass(frozen=True)
class QueueConfig:
    length: int = 50  # also the number of denoising steps (one diagonal window)
    frames: int = 16


@dataclasses.dataclass(frozen=True)
class IoConfig:
    input: str | None = None
    cond: str | None = None
    output: str | None = None


@dataclasses.dataclass(frozen=True)
class RunConfig:
    schedule: ScheduleConfig = dataclasses.field(default_factory=ScheduleConfig)
    sampler: SamplerConfig = dataclasses.field(default_factory=SamplerConfig)
    injection: InjectionConfig = dataclasses.field(default_factory=InjectionConfig)
    queue: QueueConfig = dataclasses.field(default_factory=QueueConfig)
    io: IoConfig = dataclasses.field(default_factory=IoConfig)
    seed: int = 0


# JSON key -> dataclass field, where they differ ("lambda" is reserved in Python)
_SAMPLER_KEYS = {"eta": "eta", "beta": "beta", "lambda": "lam", "kappa0": "kappa0"}


def _take(section: dict, name: str, keys: dict[str, str], cls):
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(section) - set(keys)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    return cls(**{field: section[key] for key, field in keys.items() if key in section})


def parse_config(source: str | dict) -> RunConfig:
    """Parse and validate a run configuration from JSON text or a dict."""
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(source, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"schedule", "sampler", "injection", "queue", "io", "seed"}
    unknown = set(source) - known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    ident = lambda names: {n: n for n in names}
    cfg = RunConfig(
        schedule=_take(source.get("schedule", {}), "schedule", ident(["T", "beta_start", "beta_end", "kind"]), ScheduleConfig),
        sampler=_take(source.get("sampler", {}), "sampler", _SAMPLER_KEYS, SamplerConfig),
        injection=_take(
            source.get("injection", {}),
            "injection",
            ident(["t_prime", "strength", "gamma_res", "tau", "cutoff"]),
            InjectionConfig,
        ),
        queue=_take(source.get("queue", {}), "queue", ident(["length", "frames"]), QueueConfig),
        io=_take(source.get("io", {}), "io", ident(["input", "cond", "output"]), IoConfig),
        seed=source.get("seed", 0),
    )
    validate_config(cfg)
    return cfg


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: RunConfig) -> RunConfig:
    s, sa, inj, q = cfg.schedule, cfg.sampler, cfg.injection, cfg.queue
    _require(isinstance(s.T, int) and s.T >= 1, f"schedule.T must be a positive integer, got {s.T!r}")
    _require(
        0.0 < s.beta_start <= s.beta_end < 1.0,
        f"schedule betas must satisfy 0 < beta_start <= beta_end < 1, got ({s.beta_start}, {s.beta_end})",
    )
    _require(s.kind in SCHEDULE_KINDS, f"schedule.kind must be one of {SCHEDULE_KINDS}, got {s.kind!r}")
    _require(sa.eta >= 0.0, f"sampler.eta must be >= 0, got {sa.eta}")
    _require(0.0 <= sa.beta <= 1.0, f"sampler.beta must lie in [0, 1], got {sa.beta}")
    _require(sa.lam >= 0.0, f"sampler.lambda must be >= 0, got {sa.lam}")
    _require(sa.kappa0 >= 0.0, f"sampler.kappa0 must be >= 0, got {sa.kappa0}")
    _require(
        isinstance(inj.t_prime, int) and 0 < inj.t_prime < s.T,
        f"injection.t_prime must be an integer in (0, {s.T}), got {inj.t_prime!r}",
    )
    _require(inj.strength >= 0.0, f"injection.strength must be >= 0, got {inj.strength}")
    _require(inj.gamma_res >= 0.0, f"injection.gamma_res must be >= 0, got {inj.gamma_res}")
    _require(0.0 <= inj.tau <= 1.0, f"injection.tau must lie in [0, 1], got {inj.tau}")
    _require(0.0 <= inj.cutoff <= 0.5, f"injection.cutoff must lie in [0, 0.5], got {inj.cutoff}")
    _require(isinstance(q.length, int) and q.length >= 1, f"queue.length must be a positive integer, got {q.length!r}")
    _require(q.length <= s.T, f"queue.length ({q.length}) cannot exceed schedule.T ({s.T})")
    _require(isinstance(q.frames, int) and q.frames >= 1, f"queue.frames must be a positive integer, got {q.frames!r}")
    _require(isinstance(cfg.seed, int) and cfg.seed >= 0, f"seed must be a nonnegative integer, got {cfg.seed!r}")
    for field in ("input", "cond", "output"):
        v = getattr(cfg.io, field)
        _require(v is None or isinstance(v, str), f"io.{field} must be a string path or null, got {v!r}")
    return cfg


def dump_config(cfg: RunConfig) -> dict:
    """Emit the JSON form; inverse of parse_config for valid configs."""
    return {
        "schedule": dataclasses.asdict(cfg.schedule),
        "sampler": {
            "eta": cfg.sampler.eta,
            "beta": cfg.sampler.beta,
            "lambda": cfg.sampler.lam,
            "kappa0": cfg.sampler.kappa0,
        },
        "injection": dataclasses.asdict(cfg.injection),
        "queue": dataclasses.asdict(cfg.queue),
        "io": dataclasses.asdict(cfg.io),
        "seed": cfg.seed,
    }
