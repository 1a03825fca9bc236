"""Experiment configuration files.

Configs are flat JSON objects validated by pydantic models, one model per
command. Unknown keys are rejected. Physical quantities carry their unit in
the key (``gamma_db`` or ``gamma_linear``, ``gbar_db`` or ``gbar_linear``),
and dB values are converted to linear here and nowhere else.

Example (``ess``)::

    {"R": 1, "c": 2, "gamma_db": 6, "gbar_db": 10}
"""

from __future__ import annotations

import json
import re
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import config_hash
from .errors import ConfigError
from .game import CostModel, FixedCosts, GameParams, SnrScaledCosts, State
from .special import db_to_linear

StateTuple = Tuple[float, float, float]


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GameConfig(_Config):
    """Game parameters shared by every command."""

    R: float = Field(1.0, gt=0)
    gamma_db: Optional[float] = None
    gamma_linear: Optional[float] = Field(None, gt=0)
    gbar_db: Optional[float] = None
    gbar_linear: Optional[float] = Field(None, gt=0)
    c: Optional[float] = Field(None, gt=0)
    C1: Optional[float] = Field(None, gt=0)
    C2: Optional[float] = Field(None, gt=0)
    C3: float = 0.0

    def implicit_scale(self) -> bool:
        """True when the command supplies the cost scale ``c`` itself."""
        return False

    def implicit_gbar(self) -> bool:
        """True when the command supplies the average SNR itself."""
        return False

    def cost_optional(self) -> bool:
        return self.implicit_scale()

    @model_validator(mode="after")
    def _check_game(self) -> "GameConfig":
        if self.gamma_db is not None and self.gamma_linear is not None:
            raise ValueError("give only one of gamma_db and gamma_linear")
        if self.gbar_db is not None and self.gbar_linear is not None:
            raise ValueError("give only one of gbar_db and gbar_linear")
        fixed = self.C1 is not None or self.C2 is not None
        if fixed and self.c is not None:
            raise ValueError("give either fixed costs (C1, C2) or the cost scale c, not both")
        if fixed and (self.C1 is None or self.C2 is None):
            raise ValueError("fixed costs need both C1 and C2")
        if fixed and not self.C1 > self.C2:
            raise ValueError("fixed costs need C1 > C2")
        if not fixed and self.c is None and not self.cost_optional():
            raise ValueError("a cost model is required: C1 and C2, or c")
        if self.c is not None or (not fixed and self.implicit_scale()):
            if self.gamma_db is None and self.gamma_linear is None:
                raise ValueError("SNR-scaled costs need gamma_db or gamma_linear")
            if self.gbar_db is None and self.gbar_linear is None and not self.implicit_gbar():
                raise ValueError("SNR-scaled costs need gbar_db or gbar_linear")
        return self

    @property
    def sinr_threshold(self) -> float:
        if self.gamma_linear is not None:
            return self.gamma_linear
        return db_to_linear(self.gamma_db) if self.gamma_db is not None else 1.0

    @property
    def gbar(self) -> float:
        if self.gbar_linear is not None:
            return self.gbar_linear
        return db_to_linear(self.gbar_db) if self.gbar_db is not None else 1.0

    def cost_model(self, c: Optional[float] = None) -> CostModel:
        if self.C1 is not None and self.C2 is not None:
            return FixedCosts(self.C1, self.C2, self.C3)
        scale = c if c is not None else self.c
        if scale is None:
            raise ConfigError("no cost model configured")
        return SnrScaledCosts(scale, self.C3)

    def params(self, c: Optional[float] = None) -> GameParams:
        return GameParams.from_gamma(self.R, self.sinr_threshold, self.gbar, self.cost_model(c))


class EssConfig(GameConfig):
    pass


class ReplicatorConfig(GameConfig):
    x0: StateTuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    mu: Optional[float] = Field(None, gt=0)
    max_iters: Optional[int] = Field(None, ge=1)
    drift_tol: Optional[float] = Field(None, ge=0)


class _TrafficConfig(GameConfig):
    n_blocks: int = Field(100, ge=1)
    packet_prob: float = Field(1.0, gt=0, le=1)
    gbar_users: Optional[List[float]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_users(self) -> "_TrafficConfig":
        if self.gbar_users is not None:
            if len(self.gbar_users) != 2 * self.n_blocks:
                raise ValueError(f"gbar_users needs 2 * n_blocks = {2 * self.n_blocks} values")
            if any(not g > 0 for g in self.gbar_users):
                raise ValueError("gbar_users values must be positive (linear)")
        return self

    def user_gbar(self):
        return self.gbar_users if self.gbar_users is not None else self.gbar


class SimulateConfig(_TrafficConfig):
    n_slots: int = Field(10000, ge=1)
    mode: Literal["state", "channel"] = "channel"
    state: Optional[StateTuple] = None
    trace: bool = False


class AdaptiveConfig(_TrafficConfig):
    n_blocks: int = Field(300, ge=1)
    slots_per_block: int = Field(40, ge=1)
    blocks: int = Field(200, ge=1)
    mu: float = Field(0.5, gt=0)
    x0: StateTuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    schedule: Literal["constant", "ramp"] = "constant"
    ramp_den: float = Field(200.0, gt=0)
    ramp_offset: float = Field(0.5, gt=0)
    estimator: Optional[Literal["literal", "conditional"]] = None
    fairness: bool = False
    oracle: bool = False
    keep_users: bool = False

    def implicit_scale(self) -> bool:
        return self.schedule == "ramp"


class SweepConfig(GameConfig):
    axis: Literal["c", "gbar"] = "c"
    values: List[float] = Field(..., min_length=1)

    def implicit_scale(self) -> bool:
        return self.axis == "c"

    def implicit_gbar(self) -> bool:
        return self.axis == "gbar"

    def params(self, c: Optional[float] = None) -> GameParams:
        if c is None and self.c is None and self.C1 is None:
            c = self.values[0]
        return super().params(c)


class ThroughputConfig(GameConfig):
    state: Optional[StateTuple] = None
    deltas: List[float] = Field(default_factory=list)

    def cost_optional(self) -> bool:
        return self.state is not None or bool(self.deltas)


COMMANDS: Dict[str, Type[GameConfig]] = {
    "ess": EssConfig,
    "replicator": ReplicatorConfig,
    "simulate": SimulateConfig,
    "adaptive": AdaptiveConfig,
    "sweep": SweepConfig,
    "throughput": ThroughputConfig,
}

NEEDS_SEED = ("simulate", "adaptive")


def state_of(values: StateTuple) -> State:
    return State.from_iterable(values)


def _key_line(text: str, key: str) -> Optional[int]:
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _format_errors(exc: ValidationError, text: str, source: str) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        line = _key_line(text, str(err["loc"][0])) if err.get("loc") else None
        where = f"{source}:{line}" if line else source
        lines.append(f"{where}: {loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(command: str, text: str, source: str = "<config>") -> GameConfig:
    """Validate the JSON ``text`` of a ``command`` config.

    Raises:
        ConfigError: With ``source:line`` and key diagnostics.
    """
    model = COMMANDS.get(command)
    if model is None:
        raise ConfigError(f"unknown command {command!r}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: a config must be a JSON object")
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, text, source)) from exc


def load_config(command: str, filename: Optional[str]) -> GameConfig:
    """Read and validate a config file (``None`` gives the command defaults)."""
    if filename is None:
        return parse_config(command, "{}", "<defaults>")
    try:
        with open(filename, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {filename}: {exc}") from exc
    return parse_config(command, text, filename)


def with_overrides(cfg: GameConfig, **overrides: Any) -> GameConfig:
    """Apply CLI overrides (``None`` values are ignored) and re-validate."""
    updates = {k: v for k, v in overrides.items() if v is not None and k in type(cfg).model_fields}
    if not updates:
        return cfg
    data = cfg.model_dump()
    data.update(updates)
    try:
        return type(cfg).model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, "", "<command line>")) from exc


def canonical(cfg: GameConfig) -> Dict[str, Any]:
    """Validated config as plain JSON data, defaults included."""
    return cfg.model_dump(mode="json")


def hash_of(cfg: GameConfig) -> str:
    return config_hash(canonical(cfg))


__all__ = [
    "GameConfig",
    "EssConfig",
    "ReplicatorConfig",
    "SimulateConfig",
    "AdaptiveConfig",
    "SweepConfig",
    "ThroughputConfig",
    "COMMANDS",
    "NEEDS_SEED",
    "state_of",
    "parse_config",
    "load_config",
    "with_overrides",
    "canonical",
    "hash_of",
]
