"""Flat key-value run configuration: parsing, defaults, typed overrides.

The file format is one `key: value` pair per line; `#` starts a comment and
blank lines are skipped.  Every key has a default matching the reference
parameter table, so an empty file is a complete configuration.  Unknown
keys are rejected rather than ignored: a typo must not silently fall back
to a default.  Command-line overrides reuse the same typed parsers, so a
flag value goes through exactly the validation a file value does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .channel import WATER_EXTINCTION, OpticsConfig, water_preset
from .errors import ConfigError, DomainError
from .harness import (
    UNCERTAINTY_DISTS,
    RelayScheme,
    RouteObjective,
    ScenarioConfig,
)
from .link_budget import LinkTarget, NoiseModel
from .pointing import PointingCase


def _parse_float(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {text!r}")
    return value


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {text!r}") from None


_TRUE = frozenset({"1", "true", "yes", "on"})
_FALSE = frozenset({"0", "false", "no", "off"})


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"{key}: not a boolean: {text!r}")


def _choice(options):
    def parse(key: str, text: str) -> str:
        value = text.strip().lower()
        if value not in options:
            raise ConfigError(
                f"{key}: must be one of {sorted(options)}, got {text!r}")
        return value
    return parse


_SCHEMES = tuple(s.value for s in RelayScheme)
_OBJECTIVES = tuple(o.value for o in RouteObjective)

# key -> parser; RunConfig carries one field of the same name per key
_PARSERS = {
    "tx_power_w": _parse_float,
    "max_tx_power_w": _parse_float,
    "eta_t": _parse_float,
    "eta_r": _parse_float,
    "eta_d": _parse_float,
    "aperture_m2": _parse_float,
    "fov_rad": _parse_float,
    "refractive_index": _parse_float,
    "pulse_s": _parse_float,
    "wavelength_m": _parse_float,
    "water_type": _choice(frozenset(WATER_EXTINCTION)),
    "dark_count_rate": _parse_float,
    "bg_count_rate": _parse_float,
    "noise_power_dbm": _parse_float,
    "theta_min_rad": _parse_float,
    "theta_max_rad": _parse_float,
    "frame_radius_m": _parse_float,
    "uncertainty_m": _parse_float,
    "uncertainty_dist": _choice(frozenset(UNCERTAINTY_DISTS)),
    "ber_target": _parse_float,
    "rate_target_bps": _parse_float,
    "n_sinks": _parse_int,
    "n_nodes": _parse_int,
    "area_m": _parse_float,
    "trials": _parse_int,
    "seed": _parse_int,
    "case": _parse_int,
    "scheme": _choice(frozenset(_SCHEMES)),
    "objective": _choice(frozenset(_OBJECTIVES)),
    "jitter_rad": _parse_float,
    "hop_budget_factor": _parse_int,
    "ksp_k": _parse_int,
    "lipar_literal_angle_filter": _parse_bool,
}

_OPTICS_DEFAULT = OpticsConfig()
_NOISE_DEFAULT = NoiseModel()
_SCENARIO_DEFAULT = ScenarioConfig()


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the simulator, one flat namespace.

    Values default to the reference parameter table; helper methods build
    the domain objects the library consumes.
    """

    tx_power_w: float = _SCENARIO_DEFAULT.tx_power_w
    max_tx_power_w: float = _SCENARIO_DEFAULT.max_tx_power_w
    eta_t: float = _OPTICS_DEFAULT.eta_t
    eta_r: float = _OPTICS_DEFAULT.eta_r
    eta_d: float = _OPTICS_DEFAULT.eta_d
    aperture_m2: float = _OPTICS_DEFAULT.aperture_m2
    fov_rad: float = _OPTICS_DEFAULT.fov_rad
    refractive_index: float = _OPTICS_DEFAULT.refractive_index
    pulse_s: float = _SCENARIO_DEFAULT.pulse_s
    wavelength_m: float = _SCENARIO_DEFAULT.wavelength_m
    water_type: str = _SCENARIO_DEFAULT.water_type
    dark_count_rate: float = _NOISE_DEFAULT.dark_count_rate
    bg_count_rate: float = _NOISE_DEFAULT.bg_count_rate
    noise_power_dbm: float = -84.0
    theta_min_rad: float = _OPTICS_DEFAULT.theta_min_rad
    theta_max_rad: float = _OPTICS_DEFAULT.theta_max_rad
    frame_radius_m: float = _SCENARIO_DEFAULT.frame_radius_m
    uncertainty_m: float = _SCENARIO_DEFAULT.uncertainty_m
    uncertainty_dist: str = _SCENARIO_DEFAULT.uncertainty_dist
    ber_target: float = _SCENARIO_DEFAULT.ber_target
    rate_target_bps: float = _SCENARIO_DEFAULT.rate_target_bps
    n_sinks: int = _SCENARIO_DEFAULT.n_sinks
    n_nodes: int = _SCENARIO_DEFAULT.n_nodes
    area_m: float = _SCENARIO_DEFAULT.area_m
    trials: int = _SCENARIO_DEFAULT.trials
    seed: int = 0
    case: int = _SCENARIO_DEFAULT.case.value
    scheme: str = _SCENARIO_DEFAULT.scheme.value
    objective: str = _SCENARIO_DEFAULT.objective.value
    jitter_rad: float = _SCENARIO_DEFAULT.jitter_rad
    hop_budget_factor: int = _SCENARIO_DEFAULT.hop_budget_factor
    ksp_k: int = _SCENARIO_DEFAULT.ksp_k
    lipar_literal_angle_filter: bool = \
        _SCENARIO_DEFAULT.lipar_literal_angle_filter

    def optics(self) -> OpticsConfig:
        return OpticsConfig(
            aperture_m2=self.aperture_m2, fov_rad=self.fov_rad,
            refractive_index=self.refractive_index,
            theta_min_rad=self.theta_min_rad,
            theta_max_rad=self.theta_max_rad,
            eta_t=self.eta_t, eta_r=self.eta_r, eta_d=self.eta_d,
        )

    def noise(self) -> NoiseModel:
        return NoiseModel(
            dark_count_rate=self.dark_count_rate,
            bg_count_rate=self.bg_count_rate,
            noise_power_w=10.0 ** ((self.noise_power_dbm - 30.0) / 10.0),
        )

    def water(self):
        return water_preset(self.water_type, self.wavelength_m)

    def target(self) -> LinkTarget:
        return LinkTarget(rate_bps=self.rate_target_bps, ber=self.ber_target,
                          pulse_s=self.pulse_s)

    def pointing_case(self) -> PointingCase:
        try:
            return PointingCase(self.case)
        except ValueError:
            raise ConfigError(
                f"case: must be 1, 2 or 3, got {self.case}") from None

    def scenario(self) -> ScenarioConfig:
        """The harness view of this configuration (validates everything)."""
        try:
            return ScenarioConfig(
                area_m=self.area_m, n_nodes=self.n_nodes,
                n_sinks=self.n_sinks, water_type=self.water_type,
                case=self.pointing_case(),
                scheme=RelayScheme(self.scheme),
                objective=RouteObjective(self.objective),
                rate_target_bps=self.rate_target_bps,
                ber_target=self.ber_target, pulse_s=self.pulse_s,
                wavelength_m=self.wavelength_m,
                uncertainty_m=self.uncertainty_m,
                frame_radius_m=self.frame_radius_m,
                uncertainty_dist=self.uncertainty_dist,
                tx_power_w=self.tx_power_w,
                max_tx_power_w=self.max_tx_power_w,
                trials=self.trials, seed=self.seed,
                jitter_rad=self.jitter_rad,
                hop_budget_factor=self.hop_budget_factor,
                lipar_literal_angle_filter=self.lipar_literal_angle_filter,
                ksp_k=self.ksp_k,
                optics=self.optics(), noise=self.noise(),
            )
        except DomainError as err:
            raise ConfigError(str(err)) from err


CONFIG_KEYS = tuple(_PARSERS)
assert CONFIG_KEYS == tuple(f.name for f in fields(RunConfig))


def parse_value(key: str, text: str):
    """One typed value; raises ConfigError naming the key on any problem."""
    if key not in _PARSERS:
        raise ConfigError(f"unknown configuration key: {key!r}")
    return _PARSERS[key](key, text)


def _parse_lines(lines, source: str) -> dict:
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, text = line.partition(":")
        key, text = key.strip(), text.strip()
        if not sep or not key or not text:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key: value', got {raw.rstrip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = parse_value(key, text)
    return values


def parse_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Configuration from an optional file plus already-typed overrides.

    Overrides win over file values; both win over defaults.  The result is
    fully validated (domain construction included) before it is returned.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values = _parse_lines(fh, source=str(path))
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from err
    for key, value in (overrides or {}).items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown configuration key: {key!r}")
        values[key] = value
    config = RunConfig(**values)
    config.scenario()
    return config
