"""
Channel scenarios: physical and discretisation parameters, their validation,
and the four elementary per-step transition probabilities.

Config files are flat `key = value` text, strict SI units, `#` comments.
Unit-suffixed aliases (`v_um_s`, `dx_um`, `D_um2_s`) are only accepted where
the caller asks for them (CLI overrides and sweep axes).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, Mapping, NewType, Optional, Tuple

from .errors import (
    ConfigError,
    MalformedLine,
    MissingKey,
    NonPositiveStep,
    ReceiverIndexError,
    StabilityViolation,
    UnknownKey,
)

log = logging.getLogger(__name__)

CONFIG_KEYS: Tuple[str, ...] = ("D", "v", "k_on", "k_off", "c_p", "dx", "dt", "N", "r")
INT_KEYS = frozenset({"N", "r"})

# alias -> (canonical key, divisor taking the alias unit to SI)
UNIT_ALIASES: Dict[str, Tuple[str, float]] = {
    "v_um_s": ("v", 1e6),
    "dx_um": ("dx", 1e6),
    "D_um2_s": ("D", 1e12),
}


@dataclass(frozen=True)
class ChannelConfig:
    D: float        # diffusion coefficient, m^2/s
    v: float        # mean axial flow velocity, m/s
    k_on: float     # association rate, 1/(M s)
    k_off: float    # dissociation rate, 1/s
    c_p: float      # receptor-site concentration, M
    dx: float       # spatial step, m
    dt: float       # time step, s
    N: int          # transient states: free s_1..s_{N-1} plus bound s_N
    r: int          # receiver free-state index, 1-based

    @property
    def d(self) -> float:
        """Transmitter-receiver distance r*dx."""
        return self.r * self.dx

    @property
    def L(self) -> float:
        """Channel length (N-1)*dx."""
        return (self.N - 1) * self.dx

    def with_value(self, key: str, value: float) -> "ChannelConfig":
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown config key {key!r}", key=key)
        return replace(self, **{key: _coerce(key, value)})

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


ValidatedConfig = NewType("ValidatedConfig", ChannelConfig)


@dataclass(frozen=True)
class ElementaryProbabilities:
    p_diff: float
    p_bind: float
    p_unbind: float
    p_flow: float

    def hop_downstream(self) -> float:
        return self.p_diff + self.p_flow

    def interior_self(self) -> float:
        return 1.0 - self.hop_downstream() - self.p_diff

    def receiver_self(self) -> float:
        return 1.0 - self.hop_downstream() - self.p_diff - self.p_bind

    def bound_self(self) -> float:
        return 1.0 - self.p_unbind


# Reference channel. A spatial step of 1e-8 m would give p_diff = 400 and Pe = 0.6;
# 1e-6 m gives Pe = 60 / 360 at N = 301.
REFERENCE_CHANNEL = ChannelConfig(
    D=5e-11,
    v=1e-5,
    k_on=6e8,
    k_off=3.0,
    c_p=1e-8,
    dx=1e-6,
    dt=8e-4,
    N=301,
    r=100,
)


def _derive(cfg: ChannelConfig) -> ElementaryProbabilities:
    # Operation order keeps every probability exactly linear in dt.
    return ElementaryProbabilities(
        p_diff=(cfg.D * cfg.dt) / (cfg.dx * cfg.dx),
        p_bind=(cfg.k_on * cfg.c_p) * cfg.dt,
        p_unbind=cfg.k_off * cfg.dt,
        p_flow=(cfg.v * cfg.dt) / cfg.dx,
    )


def validate_config(cfg: ChannelConfig) -> ValidatedConfig:
    """
    Return cfg unchanged if it describes a well-formed chain.

    Checks run in order: step sizes, physical signs, state count and receiver
    index, then every derived probability and self-transition.
    """
    for key in ("dx", "dt"):
        value = getattr(cfg, key)
        if not math.isfinite(value) or value <= 0:
            raise NonPositiveStep(f"{key} must be > 0, got {value!r}", key=key)

    for key in ("D", "v", "k_on", "k_off", "c_p"):
        value = getattr(cfg, key)
        if not math.isfinite(value) or value < 0:
            raise ConfigError(f"{key} must be finite and >= 0, got {value!r}", key=key)

    if cfg.N < 4:
        raise ReceiverIndexError(f"N must be >= 4, got {cfg.N}", key="N")
    if not 2 <= cfg.r <= cfg.N - 2:
        raise ReceiverIndexError(
            f"receiver index r must satisfy 2 <= r <= N-2 = {cfg.N - 2}, got {cfg.r}",
            key="r",
        )

    ep = _derive(cfg)
    for name in ("p_diff", "p_bind", "p_unbind", "p_flow"):
        value = getattr(ep, name)
        if not 0.0 <= value <= 1.0:
            raise StabilityViolation(name, value, "0 <= p <= 1")

    if ep.interior_self() < 0.0:
        raise StabilityViolation(
            "2*p_diff+p_flow", 2 * ep.p_diff + ep.p_flow, "interior self-transition >= 0"
        )
    if ep.receiver_self() < 0.0:
        raise StabilityViolation(
            "2*p_diff+p_flow+p_bind",
            2 * ep.p_diff + ep.p_flow + ep.p_bind,
            "receiver self-transition >= 0",
        )
    return ValidatedConfig(cfg)


def elementary_probabilities(cfg: ValidatedConfig) -> ElementaryProbabilities:
    return _derive(cfg)


def peclet_number(cfg: ChannelConfig) -> float:
    """Pe = v*L/D over the whole channel."""
    if cfg.v == 0:
        return 0.0
    if cfg.D == 0:
        return math.inf
    return cfg.v * cfg.L / cfg.D


# ------------------------------------------------------------------
# Flat key = value files
# ------------------------------------------------------------------


def parse_key_values(text: str, allowed: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """
    Parse `key = value` lines. Blank lines and `#` comments are skipped;
    duplicate or unknown keys are errors.
    """
    allowed = frozenset(allowed)
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedLine(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in allowed:
            raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}", key=key)
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", key=key)
        if not value:
            raise MalformedLine(f"{source}:{lineno}: empty value for {key!r}", key=key)
        out[key] = value
    return out


def parse_number(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}", key=key) from None
    if math.isnan(value):
        raise ConfigError(f"{key}: NaN is not allowed", key=key)
    return value


def resolve_alias(key: str, value: float) -> Tuple[str, float]:
    """Map a unit-suffixed alias to its SI key and value. Plain keys pass through."""
    if key in UNIT_ALIASES:
        canonical, divisor = UNIT_ALIASES[key]
        return canonical, value / divisor
    return key, value


def config_from_mapping(values: Mapping[str, float]) -> ChannelConfig:
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise MissingKey(f"missing config key(s): {', '.join(missing)}", key=missing[0])
    return ChannelConfig(**{k: _coerce(k, values[k]) for k in CONFIG_KEYS})


def load_config(path: Path, overrides: Optional[Mapping[str, float]] = None) -> ChannelConfig:
    """Read a channel config file. Overrides are applied after the file."""
    path = Path(path)
    raw = parse_key_values(path.read_text(), CONFIG_KEYS, source=str(path))
    values: Dict[str, float] = {k: parse_number(k, v) for k, v in raw.items()}
    for key, value in (overrides or {}).items():
        canonical, si = resolve_alias(key, value)
        values[canonical] = si
    cfg = config_from_mapping(values)
    log.debug("Loaded config %s: %s", path, cfg)
    return cfg


def format_config(cfg: ChannelConfig) -> str:
    return "".join(f"{k} = {getattr(cfg, k)!r}\n" for k in CONFIG_KEYS)


def _coerce(key: str, value: float):
    if key in INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer, got {value!r}", key=key)
        return int(value)
    return float(value)
