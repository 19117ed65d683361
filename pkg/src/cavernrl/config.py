"""Run configuration: a nested dataclass tree addressed by flat dotted keys.

Config files are plain ``key = value`` lines (``#`` comments, blank lines
allowed). Dotted keys reach nested sections, e.g. ``reward.mechanism`` or
``ppo.lr``. Unknown keys and uncoercible values raise :class:`ConfigError`
naming the offending key. Command-line overrides use the same key syntax and
are applied after the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .env.dungeon import GenParams
from .ppo import PpoConfig
from .rewards import IntrinsicRewardConfig

ANNOTATOR_KINDS = ("mock", "http", "none")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "StaircaseLvl3"
    steps: int = 2_000_000
    seed: int = 0
    num_envs: int = 64
    episode_cap: int = 2000

    annotator: str = "mock"  # mock | http | none
    url: str = ""
    model_name: str = "mock-judge"
    goal: str = "default"  # default | combat | gold
    latency: float = 0.0  # injected mock batch latency, seconds

    annotation_batch_size: int = 100
    subsample_rate: float = 1.0
    warmup_annotations: int = 2500
    burst_updates: int = 4
    reward_updates_per_iter: int = 4
    reward_batch: int = 256
    reward_lr: float | None = None  # None -> per-model default
    queue_capacity: int = 10_000
    caption_list_capacity: int = 65_536
    dedup_pairs: bool = False

    threaded: bool = False
    metrics_interval: int = 16_384
    success_window: int = 200
    out_dir: str = "runs/run"
    run_name: str = ""  # file stem; default derives from mechanism/task/seed
    save_checkpoint: bool = True
    save_store: bool = True
    store_path: str = ""  # preload annotations from this file if set

    reward: IntrinsicRewardConfig = field(default_factory=IntrinsicRewardConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    env: GenParams = field(default_factory=GenParams)


# Fields whose value may be the literal string "none" meaning None.
_OPTIONAL_FLOATS = {"reward_lr", "reward.beta"}

_SECTIONS = ("reward", "ppo", "env")


def _coerce(key: str, raw: str, current) -> object:
    raw = raw.strip()
    try:
        if key in _OPTIONAL_FLOATS:
            return None if raw.lower() in ("none", "null") else float(raw)
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            if not raw:
                return ()
            return tuple(int(part) for part in raw.split(","))
        if isinstance(current, str):
            return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key!r}: {exc}") from None
    raise ConfigError(f"config key {key!r} has unsupported type")


def set_key(cfg: RunConfig, key: str, raw: str) -> None:
    head, _, rest = key.partition(".")
    if rest:
        if head not in _SECTIONS:
            raise ConfigError(f"unknown config key: {key}")
        target, name = getattr(cfg, head), rest
    else:
        target, name = cfg, key
    if "." in name or not hasattr(target, name) or name in _SECTIONS:
        raise ConfigError(f"unknown config key: {key}")
    if name.startswith("_") or name not in {f.name for f in fields(target)}:
        raise ConfigError(f"unknown config key: {key}")
    setattr(target, name, _coerce(key, raw, getattr(target, name)))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def load_config(path: str | Path | None = None,
                overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        for key, value in parse_config_text(p.read_text(), str(p)).items():
            set_key(cfg, key, value)
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    from .env.caverns import make_task  # avoid import cycle at module load

    try:
        make_task(cfg.task)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        cfg.reward.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.annotator not in ANNOTATOR_KINDS:
        raise ConfigError(
            f"annotator must be one of {ANNOTATOR_KINDS}, got {cfg.annotator!r}")
    if cfg.annotator == "http" and not cfg.url:
        raise ConfigError("annotator 'http' requires url to be set")
    if not 0.0 < cfg.subsample_rate <= 1.0:
        raise ConfigError(f"subsample_rate must be in (0, 1], got {cfg.subsample_rate}")
    if cfg.steps <= 0:
        raise ConfigError(f"steps must be positive, got {cfg.steps}")
    if cfg.num_envs <= 0:
        raise ConfigError(f"num_envs must be positive, got {cfg.num_envs}")
    if cfg.latency < 0:
        raise ConfigError(f"latency must be >= 0, got {cfg.latency}")
    if cfg.annotation_batch_size <= 0:
        raise ConfigError(
            f"annotation_batch_size must be positive, got {cfg.annotation_batch_size}")
    from .annotate.prompts import GOAL_VARIANTS

    if cfg.goal not in GOAL_VARIANTS:
        raise ConfigError(
            f"goal must be one of {tuple(GOAL_VARIANTS)}, got {cfg.goal!r}")


def config_pairs(cfg: RunConfig) -> list[tuple[str, str]]:
    """Flatten a config back to sorted (dotted key, value string) pairs."""
    pairs: list[tuple[str, str]] = []

    def fmt(v) -> str:
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v)

    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for sub in fields(v):
                pairs.append((f"{f.name}.{sub.name}", fmt(getattr(v, sub.name))))
        else:
            pairs.append((f.name, fmt(v)))
    return sorted(pairs)


def dump_config(cfg: RunConfig) -> str:
    return "\n".join(f"{k} = {v}" for k, v in config_pairs(cfg)) + "\n"


def clone_config(cfg: RunConfig) -> RunConfig:
    return dataclasses.replace(
        cfg,
        reward=dataclasses.replace(cfg.reward),
        ppo=dataclasses.replace(cfg.ppo),
        env=dataclasses.replace(cfg.env),
    )
