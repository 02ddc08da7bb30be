"""Run configuration and its YAML file format.

Files carry ``schema_version``; unknown keys at any level are rejected so a
typo never silently falls back to a default.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from ..domain import ChannelSpec, ExposureModel
from ..dual import PACING_MODES, UPDATE_RULES
from ..primal import SOLVERS

SCHEMA_VERSION = 1
METHODS = ("me2a", "fixed", "wpo")
STREAM_MODES = ("iid", "replay")


class ConfigError(ValueError):
    pass


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class ChannelConfig:
    lower_share: float = 0.0
    upper_share: float = 1.0


@dataclass(frozen=True)
class ExposureConfig:
    kind: str = "uniform"
    # slot weights for utility; null means "same as exposure weights"
    utility_weights: Optional[list] = None


@dataclass(frozen=True)
class ScorerConfig:
    channel_bias: list = field(default_factory=lambda: [-1.0, -1.5, -2.0, -2.5])
    candidates_per_channel: Union[int, list] = 20
    items_per_channel: int = 500
    user_dim: int = 8
    noise_sigma: float = 0.0


@dataclass(frozen=True)
class AllocatorConfig:
    method: str = "me2a"
    solver: str = "auto"
    update_rule: str = "free"
    pacing: str = "static"
    step_c: float = 1.0


@dataclass(frozen=True)
class BaselineConfig:
    beta_init: float = 1.0
    kappa: float = 0.5
    beta_lo: float = 1e-3
    beta_hi: float = 1e3
    # shares the fixed pattern and the WPO controller aim for; null means "derive from lower/upper shares"
    target_shares: Optional[list] = None


@dataclass(frozen=True)
class StreamConfig:
    mode: str = "iid"
    path: Optional[str] = None
    shuffle_seed: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    horizon: int = 1000
    n_slots: int = 10
    channels: tuple = field(
        default_factory=lambda: tuple(ChannelConfig(s) for s in (0.55, 0.20, 0.15, 0.10))
    )
    exposure: ExposureConfig = field(default_factory=ExposureConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    allocator: AllocatorConfig = field(default_factory=AllocatorConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_specs(self) -> list[ChannelSpec]:
        return [ChannelSpec(m, c.upper_share, c.lower_share) for m, c in enumerate(self.channels)]

    def exposure_model(self) -> ExposureModel:
        if self.exposure.kind == "uniform":
            return ExposureModel.uniform(self.n_slots)
        if self.exposure.kind == "position_decayed":
            return ExposureModel.position_decayed(self.n_slots)
        raise ConfigError(f"exposure.kind: unknown {self.exposure.kind!r}")

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {self.schema_version} unsupported (expected {SCHEMA_VERSION})")
        if self.horizon < 1 or self.n_slots < 1:
            raise ConfigError("horizon and n_slots must be positive")
        if not self.channels:
            raise ConfigError("at least one channel required")
        try:
            specs = self.channel_specs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if sum(s.lower_share for s in specs) > 1 + 1e-12:
            raise ConfigError("lower shares sum to more than 1")
        self.exposure_model()
        if self.exposure.utility_weights is not None and len(self.exposure.utility_weights) != self.n_slots:
            raise ConfigError("exposure.utility_weights must have n_slots entries")
        if len(self.scorer.channel_bias) != self.n_channels:
            raise ConfigError("scorer.channel_bias must have one entry per channel")
        per = self.scorer.candidates_per_channel
        if isinstance(per, list) and len(per) != self.n_channels:
            raise ConfigError("scorer.candidates_per_channel list must have one entry per channel")
        a = self.allocator
        if a.method not in METHODS:
            raise ConfigError(f"allocator.method must be one of {METHODS}")
        if a.solver not in SOLVERS:
            raise ConfigError(f"allocator.solver must be one of {SOLVERS}")
        if a.update_rule not in UPDATE_RULES:
            raise ConfigError(f"allocator.update_rule must be one of {UPDATE_RULES}")
        if a.pacing not in PACING_MODES:
            raise ConfigError(f"allocator.pacing must be one of {PACING_MODES}")
        if a.step_c <= 0:
            raise ConfigError("allocator.step_c must be positive")
        ts = self.baseline.target_shares
        if ts is not None and len(ts) != self.n_channels:
            raise ConfigError("baseline.target_shares must have one entry per channel")
        if self.stream.mode not in STREAM_MODES:
            raise ConfigError(f"stream.mode must be one of {STREAM_MODES}")
        if self.stream.mode == "replay" and not self.stream.path:
            raise ConfigError("stream.path required for replay mode")

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = [dict(c) for c in d["channels"]]
        order = ["schema_version", "seed", "horizon", "n_slots", "channels", "exposure", "scorer",
                 "allocator", "baseline", "stream"]
        return {k: d[k] for k in order}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        data = dict(data)
        sections = {
            "exposure": ExposureConfig,
            "scorer": ScorerConfig,
            "allocator": AllocatorConfig,
            "baseline": BaselineConfig,
            "stream": StreamConfig,
        }
        for key, sub in sections.items():
            if key in data:
                data[key] = _from_dict(sub, data[key], key)
        if "channels" in data:
            if not isinstance(data["channels"], list):
                raise ConfigError("channels must be a list")
            data["channels"] = tuple(
                _from_dict(ChannelConfig, c, f"channels[{i}]") for i, c in enumerate(data["channels"])
            )
        return _from_dict(cls, data, "config")

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(text) or {})

    def save(self, path: Union[str, Path]):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.loads(Path(path).read_text())

    def override(self, **flat: Any) -> "RunConfig":
        """Return a copy with dotted keys replaced, e.g. ``override(**{"allocator.step_c": 2.0})``."""
        data = self.to_dict()
        for key, value in flat.items():
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config section {p!r} in {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(data)


def setting(number: int, headroom: Optional[float] = None, **kwargs) -> RunConfig:
    """Four-channel lower-share presets: 1 -> 55/20/15/10, 2 -> 70/15/10/5.

    Upper shares are 1 unless ``headroom`` is given, in which case each
    channel's upper share is its lower share plus ``headroom`` (capped at 1).
    """
    shares = {1: (0.55, 0.20, 0.15, 0.10), 2: (0.70, 0.15, 0.10, 0.05)}[number]
    uppers = [1.0 if headroom is None else min(1.0, s + headroom) for s in shares]
    return replace(RunConfig(), channels=tuple(ChannelConfig(s, u) for s, u in zip(shares, uppers)), **kwargs)
