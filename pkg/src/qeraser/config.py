"""Scenario configuration: YAML files validated into typed models.

Validation errors carry the dotted path of the offending field, e.g.
``gate.noise.signal_x: Input should be greater than or equal to 0``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from importlib import resources
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import gaussian as gs
from .metrics import ChannelEstimate
from .qnd import EXACT_REFLECTIVITIES, CircuitSpec, NoiseSpec, QndGate


class ConfigError(ValueError):
    """Invalid scenario configuration; message lists field paths."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StateSpec(_Model):
    type: Literal["vacuum", "coherent", "squeezed_vacuum", "squeezed_thermal"]
    x0: float = 0.0
    p0: float = 0.0
    squeezing_db: float = 0.0
    angle: float = 0.0
    vx: Optional[float] = Field(default=None, gt=0)
    vp: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _thermal_needs_variances(self):
        if self.type == "squeezed_thermal":
            if self.vx is None or self.vp is None:
                raise ValueError("squeezed_thermal needs vx and vp")
            if self.vx * self.vp < 1 / 16 - 1e-9:
                raise ValueError("vx * vp must be >= 1/16")
        return self

    def build(self) -> gs.GaussianState:
        if self.type == "vacuum":
            return gs.vacuum(1)
        if self.type == "coherent":
            return gs.coherent(self.x0, self.p0)
        if self.type == "squeezed_vacuum":
            return gs.squeezed_vacuum(self.squeezing_db, self.angle)
        return gs.squeezed_thermal(self.vx, self.vp)


class NoiseConfig(_Model):
    signal_x: float = Field(default=0.0, ge=0)
    signal_p: float = Field(default=0.0, ge=0)
    probe_x: float = Field(default=0.0, ge=0)
    probe_p: float = Field(default=0.0, ge=0)


class CircuitConfig(_Model):
    reflectivities: tuple[float, float, float, float] = EXACT_REFLECTIVITIES
    ancilla_db: float = -5.0

    @model_validator(mode="after")
    def _range(self):
        for r in self.reflectivities:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"reflectivity {r} outside [0, 1]")
        return self


class GateConfig(_Model):
    variant: Literal["ideal", "noisy", "circuit"] = "ideal"
    gain: float = 1.0
    noise: NoiseConfig = NoiseConfig()
    signal_gains: tuple[float, float] = (1.0, 1.0)
    circuit: CircuitConfig = CircuitConfig()
    exchanged: bool = False

    def build(self) -> QndGate:
        if self.variant == "circuit":
            gate = QndGate.from_circuit(CircuitSpec(tuple(self.circuit.reflectivities), self.circuit.ancilla_db))
            if self.exchanged:
                from .qnd import exchange_roles

                gate = exchange_roles(gate)
            return gate
        return QndGate(
            gain=self.gain,
            variant=self.variant,
            noise=NoiseSpec(**self.noise.model_dump()),
            exchanged=self.exchanged,
            signal_gains=self.signal_gains if self.variant == "noisy" else (1.0, 1.0),
        )


class ChannelConfig(_Model):
    g_x: float
    g_p: float
    sigma_x2: float = Field(ge=0)
    sigma_p2: float = Field(ge=0)

    def build(self) -> ChannelEstimate:
        return ChannelEstimate(self.g_x, self.g_p, self.sigma_x2, self.sigma_p2)


class TomographyTarget(_Model):
    step: Literal["a_signal", "a_probe", "b_signal", "b_probe", "c"] = "c"
    n_max: int = Field(default=15, ge=1)
    span: float = Field(default=6.0, gt=0)


class TomographyConfig(_Model):
    phase_count: int = Field(default=64, ge=3)
    samples: int = Field(default=100_000, ge=10)
    iterations: int = Field(default=500, ge=1)
    bins: int = Field(default=128, ge=8)
    targets: tuple[TomographyTarget, ...] = (TomographyTarget(),)


class SweepConfig(_Model):
    parameter: str
    values: tuple[float, ...] = Field(min_length=1)


class MonteCarloConfig(_Model):
    shots: int = Field(default=20_000, ge=10)


class OutputConfig(_Model):
    dir: Optional[str] = None
    grids: bool = True
    grid_points: int = Field(default=101, ge=11)
    phase_points: int = Field(default=64, ge=4)


class ScenarioConfig(_Model):
    """Full description of one run of the erasing protocol."""

    scenario: str
    description: str = ""
    seed: int = Field(default=0, ge=0, lt=2**64)
    signal: StateSpec = StateSpec(type="vacuum")
    probe: StateSpec = StateSpec(type="vacuum")
    gate: GateConfig = GateConfig()
    loss: float = Field(default=1.0, ge=0, le=1)
    feedforward_gain: float = 1.0
    channels: dict[Literal["b", "c"], ChannelConfig] = {}
    ensemble_variance: float = Field(default=2.5, ge=0)
    ensemble_per_quadrature: bool = True
    estimation_amplitudes: Optional[tuple[float, float]] = None
    monte_carlo: MonteCarloConfig = MonteCarloConfig()
    tomography: Optional[TomographyConfig] = None
    sweep: Optional[SweepConfig] = None
    output: OutputConfig = OutputConfig()
    # metric name -> (target value, tolerance); reported under ``checks``
    targets: dict[str, tuple[float, float]] = {}

    def digest(self) -> str:
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def builtin_names() -> list[str]:
    root = resources.files("qeraser") / "catalog"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(source: Union[str, Path]) -> ScenarioConfig:
    """Load a YAML config from a path, or a built-in scenario by name."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in builtin_names():
        text = (resources.files("qeraser") / "catalog" / f"{source}.yaml").read_text()
    else:
        raise ConfigError(f"<root>: no config file or built-in scenario named {source!r}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"<root>: YAML parse error: {err}") from None
    return parse_config(data)


def with_override(cfg: ScenarioConfig, dotted: str, value) -> ScenarioConfig:
    """Return a copy with one dotted field (e.g. ``probe.squeezing_db``) set."""
    data = cfg.model_dump(mode="json")
    node = data
    keys = dotted.split(".")
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"{dotted}: unknown parameter path")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"{dotted}: unknown parameter path")
    node[keys[-1]] = value
    return parse_config(data)
