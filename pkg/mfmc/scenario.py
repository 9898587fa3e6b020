"""
Scenario and sweep files.

Both use the channel-config `key = value` format plus run keys:

    mode      = pulse | continuous
    u0        = release per event (expected molecules)
    K         = number of steps
    seed      = PBS seed (unsigned 64-bit)
    particles = PBS particles per release event
    name      = label (defaults to the file stem)
    base      = channel-config file to start from, relative to this file

Sweep files add `axis` and a comma-separated `values` list. Keys written in a
scenario override those read from `base`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from .channel_config import (
    CONFIG_KEYS,
    UNIT_ALIASES,
    ChannelConfig,
    config_from_mapping,
    load_config,
    parse_key_values,
    parse_number,
    resolve_alias,
    validate_config,
)
from .errors import ConfigError

log = logging.getLogger(__name__)

MODES = ("pulse", "continuous")
RUN_KEYS = ("mode", "u0", "K", "seed", "particles", "name", "base")
SWEEP_KEYS = ("axis", "values")
SWEEP_AXES = ("v", "r", "N", "k_on", "k_off", "u0")
COUNT_KEYS = frozenset({"K", "seed", "particles"})


@dataclass(frozen=True)
class Scenario:
    name: str
    cfg: ChannelConfig
    mode: str
    u0: float
    K: int
    seed: int = 0
    particles: Optional[int] = None

    def __post_init__(self):
        if not self.name:
            raise ConfigError("scenario name must not be empty", key="name")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}", key="mode")
        if not (math.isfinite(self.u0) and self.u0 >= 0):
            raise ConfigError(f"u0 must be finite and >= 0, got {self.u0!r}", key="u0")
        if self.K < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}", key="K")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}", key="seed")
        if self.particles is not None and self.particles < 1:
            raise ConfigError(f"particles must be >= 1, got {self.particles}", key="particles")
        validate_config(self.cfg)

    def pbs_particles(self) -> int:
        """Particles per release: the explicit count, else u0 when it is a whole number."""
        if self.particles is not None:
            return self.particles
        if float(self.u0).is_integer() and self.u0 >= 1:
            return int(self.u0)
        raise ConfigError(
            f"scenario {self.name!r} has no 'particles' and u0 = {self.u0!r} is not a whole count",
            key="particles",
        )


@dataclass(frozen=True)
class SweepPoint:
    label: str          # the value as written in the sweep file
    value: float        # as written, before unit conversion
    scenario: Scenario


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    axis: str
    values: Tuple[float, ...]
    labels: Tuple[str, ...]

    def points(self) -> List[SweepPoint]:
        """Every point, validated up front so a bad value fails before any output."""
        points = []
        for label, value in zip(self.labels, self.values):
            name = f"{self.base.name}_{self.axis}={label}"
            try:
                scenario = _apply(self.base, self.axis, value, name)
            except ConfigError as e:
                raise ConfigError(f"sweep point {self.axis} = {label}: {e}", key=e.key or self.axis) from e
            points.append(SweepPoint(label=label, value=value, scenario=scenario))
        log.debug("Sweep %s over %s: %d point(s)", self.base.name, self.axis, len(points))
        return points


def load_scenario(path: Path, overrides: Optional[Mapping[str, float]] = None) -> Scenario:
    path = Path(path)
    raw = parse_key_values(path.read_text(), CONFIG_KEYS + RUN_KEYS, source=str(path))
    return _scenario_from_raw(raw, path, overrides)


def load_sweep(path: Path, overrides: Optional[Mapping[str, float]] = None) -> SweepSpec:
    path = Path(path)
    raw = parse_key_values(path.read_text(), CONFIG_KEYS + RUN_KEYS + SWEEP_KEYS, source=str(path))
    axis = raw.pop("axis", None)
    values_raw = raw.pop("values", None)
    if axis is None:
        raise ConfigError(f"{path}: sweep needs an 'axis'", key="axis")
    if values_raw is None:
        raise ConfigError(f"{path}: sweep needs 'values'", key="values")
    canonical = UNIT_ALIASES[axis][0] if axis in UNIT_ALIASES else axis
    if canonical not in SWEEP_AXES:
        raise ConfigError(
            f"{path}: axis must be one of {', '.join(SWEEP_AXES)} (or a unit alias), got {axis!r}",
            key="axis",
        )

    labels = tuple(part.strip() for part in values_raw.split(","))
    if not all(labels):
        raise ConfigError(f"{path}: empty entry in 'values'", key="values")
    values = tuple(parse_number("values", label) for label in labels)
    if len(set(values)) != len(values):
        raise ConfigError(f"{path}: sweep values must be unique", key="values")

    base = _scenario_from_raw(raw, path, overrides)
    return SweepSpec(base=base, axis=axis, values=values, labels=labels)


def parse_overrides(items: List[str]) -> Dict[str, float]:
    """`KEY=VALUE` strings from the command line. Unit aliases are allowed."""
    allowed = set(CONFIG_KEYS) | set(UNIT_ALIASES) | {"u0", "K", "seed", "particles"}
    out: Dict[str, float] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"unknown override key {key!r}", key=key)
        out[key] = _parse_run_value(key, value) if key in COUNT_KEYS else parse_number(key, value)
    return out


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _scenario_from_raw(raw: Dict[str, str], path: Path, overrides: Optional[Mapping[str, float]]) -> Scenario:
    values: Dict[str, float] = {}
    if "base" in raw:
        base_path = path.parent / raw["base"]
        values.update(load_config(base_path).as_dict())
    for key in CONFIG_KEYS:
        if key in raw:
            values[key] = parse_number(key, raw[key])

    run: Dict[str, float] = {}
    for key in ("u0", "K", "seed", "particles"):
        if key in raw:
            run[key] = _parse_run_value(key, raw[key])

    for key, value in (overrides or {}).items():
        if key == "u0" or key in COUNT_KEYS:
            run[key] = value
        else:
            canonical, si = resolve_alias(key, value)
            values[canonical] = si

    for key in ("mode", "u0", "K"):
        if key not in raw and key not in run:
            raise ConfigError(f"{path}: missing scenario key {key!r}", key=key)

    return Scenario(
        name=raw.get("name", path.stem),
        cfg=config_from_mapping(values),
        mode=raw["mode"],
        u0=float(run["u0"]),
        K=_whole("K", run["K"]),
        seed=_whole("seed", run.get("seed", 0)),
        particles=_whole("particles", run["particles"]) if "particles" in run else None,
    )


def _apply(base: Scenario, axis: str, value: float, name: str) -> Scenario:
    if axis == "u0":
        return replace(base, name=name, u0=float(value))
    canonical, si = resolve_alias(axis, value)
    return replace(base, name=name, cfg=base.cfg.with_value(canonical, si))


def _whole(key: str, value: float) -> int:
    if not float(value).is_integer():
        raise ConfigError(f"{key} must be an integer, got {value!r}", key=key)
    return int(value)


def _parse_run_value(key: str, raw: str):
    # Seeds span the full 64-bit range, which a float cannot hold.
    if key in COUNT_KEYS:
        try:
            return int(raw)
        except ValueError:
            pass
    return parse_number(key, raw)
