"""Harness configuration: one JSON document with sections neuron/ssm/bench/energy/seed."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .energy import E_AC, E_MAC, EnergyModel, LayerSpec
from .errors import ConfigError, PmbcError
from .neuron import NeuronParams, ResetMode
from .solver import FireMode

__all__ = [
    "BenchConfig",
    "Config",
    "EnergyConfig",
    "NeuronConfig",
    "SsmConfig",
    "load_config",
    "parse_config",
]


@dataclass
class NeuronConfig:
    tau: float = 0.1
    tau_r: float = 0.9
    v_th: float = 1.0
    u_th: float = 1.0
    reset_mode: str = "soft"
    u_r: float = 0.0

    def params(self) -> NeuronParams:
        return NeuronParams(
            tau=self.tau,
            v_th=self.v_th,
            u_th=self.u_th,
            tau_r=self.tau_r,
            reset_mode=ResetMode.parse(self.reset_mode),
            u_r=self.u_r,
        )


@dataclass
class SsmConfig:
    channels: int = 8
    state_size: int = 8
    layers: int = 2
    length: int = 256
    delta_min: float = 0.001
    delta_max: float = 0.1
    norm: str = "layer"
    input_scale: float = 1.0


@dataclass
class BenchConfig:
    lengths: list[int] = field(default_factory=lambda: [1024, 2048, 4096, 8192])
    channels: int = 64
    iters: int = 3
    fire_mode: str = "allzero"
    repeats: int = 5
    warmup: int = 2
    verify_cases: int = 200
    export_channel: int = 0

    def mode(self) -> FireMode:
        return FireMode.parse(self.fire_mode)


@dataclass
class EnergyConfig:
    e_mac: float = E_MAC
    e_ac: float = E_AC
    layers: list[dict] = field(default_factory=list)

    def model(self) -> EnergyModel:
        return EnergyModel(self.e_mac, self.e_ac)

    def layer_specs(self) -> list[LayerSpec]:
        specs = []
        for i, row in enumerate(self.layers):
            if not isinstance(row, dict) or set(row) != {"dense_ops", "spiking_rate"}:
                raise ConfigError(f"energy.layers[{i}] needs exactly dense_ops and spiking_rate")
            specs.append(LayerSpec(float(row["dense_ops"]), float(row["spiking_rate"])))
        return specs


@dataclass
class Config:
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    ssm: SsmConfig = field(default_factory=SsmConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    seed: int = 0

    def validate(self) -> "Config":
        b = self.bench
        try:
            self.neuron.params()
            b.mode()
            self.energy.model()
            self.energy.layer_specs()
        except PmbcError as exc:
            raise ConfigError(str(exc)) from exc
        if not b.lengths or any(int(n) < 1 for n in b.lengths):
            raise ConfigError("bench.lengths must be a non-empty list of positive integers")
        for name in ("channels", "iters", "repeats", "warmup", "verify_cases"):
            if int(getattr(b, name)) < 1:
                raise ConfigError(f"bench.{name} must be >= 1")
        s = self.ssm
        for name in ("channels", "state_size", "layers", "length"):
            if int(getattr(s, name)) < 1:
                raise ConfigError(f"ssm.{name} must be >= 1")
        if not 0 < s.delta_min <= s.delta_max:
            raise ConfigError("ssm.delta_min must be positive and <= delta_max")
        if s.norm not in ("none", "layer", "batch"):
            raise ConfigError(f"ssm.norm must be none, layer or batch, got {s.norm!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, section: str, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    obj = cls()
    for key, value in data.items():
        default = getattr(obj, key)
        if isinstance(default, bool) or (isinstance(default, (int, float)) and isinstance(value, bool)):
            raise ConfigError(f"{section}.{key} has the wrong type")
        if isinstance(default, float) and isinstance(value, (int, float)):
            value = float(value)
        elif isinstance(default, int) and not (isinstance(value, int)):
            raise ConfigError(f"{section}.{key} must be an integer")
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string")
        elif isinstance(default, list) and not isinstance(value, list):
            raise ConfigError(f"{section}.{key} must be a list")
        elif isinstance(default, float) and not isinstance(value, float):
            raise ConfigError(f"{section}.{key} must be a number")
        setattr(obj, key, value)
    return obj


def parse_config(data) -> Config:
    """Build a validated :class:`Config` from a decoded JSON document."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    sections = {"neuron": NeuronConfig, "ssm": SsmConfig, "bench": BenchConfig, "energy": EnergyConfig}
    unknown = sorted(set(data) - set(sections) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    cfg = Config(**{name: _build(cls, name, data.get(name)) for name, cls in sections.items()})
    if "seed" in data:
        cfg.seed = data["seed"]
    return cfg.validate()


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(data)
