"""Operation counting and energy estimates for spike-driven linear layers.

A dense layer fed with real activations costs one multiply-accumulate per
weight use. Fed with binary spikes, a weight is only added when its input
spiked, so the op count scales with the spiking rate and each op is an
accumulate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import ValidationError

E_MAC = 4.6e-12
E_AC = 0.9e-12

__all__ = [
    "E_AC",
    "E_MAC",
    "EnergyModel",
    "EnergyReport",
    "LayerEnergy",
    "LayerSpec",
    "estimate_energy",
    "linear_layer_ops",
]


@dataclass(frozen=True)
class EnergyModel:
    """Joules per multiply-accumulate and per accumulate."""

    e_mac: float = E_MAC
    e_ac: float = E_AC

    def __post_init__(self):
        for name in ("e_mac", "e_ac"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive, got {value!r}")

    def mac_energy(self, ops: float) -> float:
        return _check_ops(ops) * self.e_mac

    def ac_energy(self, ops: float) -> float:
        return _check_ops(ops) * self.e_ac


@dataclass(frozen=True)
class LayerSpec:
    """Dense op count of one spike-input layer and the spiking rate of its input."""

    dense_ops: float
    spiking_rate: float


@dataclass
class LayerEnergy:
    layer: int
    spiking_rate: float
    mac_ops: float
    ac_ops: float
    energy_mac: float
    energy_ac: float


@dataclass
class EnergyReport:
    mac_ops: float
    ac_ops: float
    energy_mac: float
    energy_ac: float
    layers: list[LayerEnergy] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_ops(ops) -> float:
    ops = float(ops)
    if not (math.isfinite(ops) and ops >= 0):
        raise ValidationError(f"operation counts must be finite and non-negative, got {ops!r}")
    return ops


def linear_layer_ops(length: int, in_features: int, out_features: int) -> int:
    """Dense multiply-accumulates of a position-wise linear map over ``length`` steps."""
    return int(length) * int(in_features) * int(out_features)


def estimate_energy(layers: Sequence[LayerSpec], model: EnergyModel = EnergyModel()) -> EnergyReport:
    """Compare a dense (MAC) execution with a spike-driven (AC) execution of ``layers``."""
    rows = []
    for i, spec in enumerate(layers):
        dense = _check_ops(spec.dense_ops)
        rate = float(spec.spiking_rate)
        if not (0.0 <= rate <= 1.0):
            raise ValidationError(f"layer {i}: spiking rate {rate!r} is outside [0, 1]")
        ac = dense * rate
        rows.append(LayerEnergy(i, rate, dense, ac, dense * model.e_mac, ac * model.e_ac))
    mac_ops = math.fsum(r.mac_ops for r in rows)
    ac_ops = math.fsum(r.ac_ops for r in rows)
    return EnergyReport(mac_ops, ac_ops, mac_ops * model.e_mac, ac_ops * model.e_ac, rows)
