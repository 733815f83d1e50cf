"""Configuration layer: defaults, file parsing, typed overrides, errors."""

import math

import pytest

from uownsim.config import (
    CONFIG_KEYS,
    RunConfig,
    parse_config,
    parse_value,
)
from uownsim.errors import ConfigError
from uownsim.harness import RelayScheme, RouteObjective, ScenarioConfig
from uownsim.pointing import PointingCase


def write(tmp_path, text: str):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_defaults_match_the_reference_parameter_table():
    cfg = RunConfig()
    assert cfg.tx_power_w == 0.01
    assert cfg.max_tx_power_w == 1.0
    assert cfg.eta_t == 0.9 and cfg.eta_r == 0.9 and cfg.eta_d == 0.16
    assert cfg.aperture_m2 == pytest.approx(math.pi * 0.025 ** 2, rel=1e-12)
    assert cfg.pulse_s == 1e-9 and cfg.wavelength_m == 532e-9
    assert cfg.water_type == "ocean"
    assert cfg.dark_count_rate == 1e6 and cfg.bg_count_rate == 1e6
    assert cfg.noise_power_dbm == -84.0
    assert cfg.theta_min_rad == 0.01 and cfg.theta_max_rad == 0.25
    assert cfg.frame_radius_m == 0.25 and cfg.uncertainty_m == 0.75
    assert cfg.ber_target == 1e-5 and cfg.rate_target_bps == 1e9
    assert cfg.n_sinks == 3 and cfg.n_nodes == 60 and cfg.area_m == 100.0
    assert cfg.trials == 2000 and cfg.seed == 0


def test_derived_objects_carry_the_converted_values():
    cfg = RunConfig()
    assert cfg.water().extinction == pytest.approx(0.1514)
    assert cfg.noise().noise_power_w == pytest.approx(10.0 ** (-11.4))
    assert cfg.pointing_case() is PointingCase(cfg.case)
    target = cfg.target()
    assert (target.rate_bps, target.ber, target.pulse_s) == (1e9, 1e-5, 1e-9)
    optics = cfg.optics()
    assert optics.theta_min_rad == 0.01 and optics.eta_d == 0.16


def test_config_keys_cover_runconfig_exactly():
    assert set(CONFIG_KEYS) == {f for f in RunConfig.__dataclass_fields__}


def test_empty_file_yields_all_defaults(tmp_path):
    path = write(tmp_path, "")
    assert parse_config(path) == RunConfig()
    assert parse_config(None) == RunConfig()


def test_file_parsing_with_comments_and_blanks(tmp_path):
    path = write(tmp_path, """
# deployment
n_nodes: 24
water_type: coastal   # harbor water
trials: 7

seed: 12
lipar_literal_angle_filter: yes
""")
    cfg = parse_config(path)
    assert cfg.n_nodes == 24 and cfg.trials == 7 and cfg.seed == 12
    assert cfg.water_type == "coastal"
    assert cfg.lipar_literal_angle_filter is True


def test_overrides_beat_file_values(tmp_path):
    path = write(tmp_path, "water_type: coastal\nn_nodes: 24\n")
    cfg = parse_config(path, {"water_type": "pure", "seed": 5})
    assert cfg.water_type == "pure" and cfg.n_nodes == 24 and cfg.seed == 5


def test_scenario_view_maps_enums_and_validates():
    cfg = RunConfig(case=1, scheme="af", objective="power", trials=3)
    scenario = cfg.scenario()
    assert isinstance(scenario, ScenarioConfig)
    assert scenario.case is PointingCase.PERFECT_PAT
    assert scenario.scheme is RelayScheme.AF
    assert scenario.objective is RouteObjective.POWER
    assert scenario.noise.noise_power_w == pytest.approx(10.0 ** (-11.4))


@pytest.mark.parametrize("text,key", [
    ("n_nodes: few", "n_nodes"),
    ("tx_power_w: 1e", "tx_power_w"),
    ("tx_power_w: inf", "tx_power_w"),
    ("lipar_literal_angle_filter: maybe", "lipar_literal_angle_filter"),
    ("water_type: lake", "water_type"),
    ("scheme: relay", "scheme"),
    ("uncertainty_dist: gaussian", "uncertainty_dist"),
])
def test_typed_parse_errors_name_the_key(tmp_path, text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(write(tmp_path, text + "\n"))


def test_unknown_key_rejected_everywhere(tmp_path):
    with pytest.raises(ConfigError, match="unknown configuration key"):
        parse_config(write(tmp_path, "n_modes: 3\n"))
    with pytest.raises(ConfigError, match="unknown configuration key"):
        parse_config(None, {"n_modes": 3})
    with pytest.raises(ConfigError, match="unknown configuration key"):
        parse_value("n_modes", "3")


def test_malformed_and_duplicate_lines_carry_position(tmp_path):
    with pytest.raises(ConfigError, match=r":1: expected 'key: value'"):
        parse_config(write(tmp_path, "just some words\n"))
    with pytest.raises(ConfigError, match=r":3: duplicate key 'seed'"):
        parse_config(write(tmp_path, "seed: 1\n# x\nseed: 2\n"))


def test_missing_file_is_a_config_error():
    with pytest.raises(ConfigError, match="cannot read config file"):
        parse_config("/does/not/exist.cfg")


def test_out_of_range_values_fail_validation(tmp_path):
    with pytest.raises(ConfigError, match="BER target"):
        parse_config(write(tmp_path, "ber_target: 0.7\n"))
    with pytest.raises(ConfigError, match="case"):
        parse_config(write(tmp_path, "case: 5\n"))
    with pytest.raises(ConfigError, match="trial count"):
        parse_config(None, {"trials": 0})


def test_boolean_spellings():
    for text in ("1", "true", "Yes", "ON"):
        assert parse_value("lipar_literal_angle_filter", text) is True
    for text in ("0", "false", "No", "off"):
        assert parse_value("lipar_literal_angle_filter", text) is False
