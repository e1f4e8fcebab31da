"""Pipeline configuration and its key=value file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

from .seqmap import DEFAULT_FUNCTIONALS, FUNCTIONALS


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    sample_rate: int = 16000
    window_ms: int = 100
    step_ms: int = 50
    min_seq_len: int = 16
    tile_side: int = 34
    tile_stride: int = 17
    min_tiles: int = 8
    functionals: tuple[str, ...] = DEFAULT_FUNCTIONALS

    svm_lambda: float = 1e-3
    svm_epochs: int = 60

    # audio-sequence LSTM
    seq_hidden: int = 512
    seq_lr: float = 1e-3
    seq_epochs: int = 30
    seq_batch: int = 16
    seq_clip: float = 5.0
    seq_weight_decay: float = 0.0

    # map-sequence LSTM; schedule numbers follow the published tile-network recipe
    map_hidden: int = 128
    map_lr: float = 0.001
    map_lr_step: int = 3000
    map_lr_decay: float = 0.1
    map_batch: int = 16
    map_weight_decay: float = 0.002
    map_max_iterations: int = 10000
    map_epochs: int = 0  # 0 = run until map_max_iterations
    map_clip: float = 5.0

    lstm_init_scale: float = 0.01
    grid: int = 20
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "functionals":
                if not val:
                    raise ConfigError("functionals must not be empty")
                bad = [v for v in val if v not in FUNCTIONALS]
                if bad:
                    raise ConfigError(f"unknown functional(s): {', '.join(bad)}")
            elif f.name in ("seed", "map_epochs", "seq_weight_decay", "map_weight_decay"):
                if val < 0:
                    raise ConfigError(f"{f.name} must be >= 0, got {val}")
            elif val <= 0:
                raise ConfigError(f"{f.name} must be positive, got {val}")
        if self.step_ms > self.window_ms:
            raise ConfigError("step_ms must not exceed window_ms")
        if self.map_epochs == 0 and self.map_max_iterations <= 0:
            raise ConfigError("map_epochs = 0 needs a positive map_max_iterations")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["functionals"] = list(self.functionals)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "functionals" in kwargs:
            kwargs["functionals"] = tuple(kwargs["functionals"])
        return cls(**kwargs)


def _coerce(name: str, text: str):
    types = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    text = text.strip()
    try:
        if name == "functionals":
            return tuple(t.strip() for t in text.split(",") if t.strip())
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    raise ConfigError(f"cannot parse key {name!r}")


def parse_overrides(pairs: Iterable[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        out[key.strip()] = _coerce(key.strip(), val)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Read a key=value file (``#`` comments allowed), then apply overrides."""
    values: dict = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            values[key.strip()] = _coerce(key.strip(), val)
    values.update(overrides or {})
    return PipelineConfig(**values)


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        lines.append(f"{f.name}={','.join(val) if f.name == 'functionals' else val}")
    return "\n".join(lines) + "\n"
