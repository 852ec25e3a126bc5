"""Experiment configuration: defaults, validation, manifests."""

import json

import numpy as np
import pytest

from privhvac.config import (ConfigError, DatasetManifest, ExperimentConfig,
                             SweepSpec, WorldSpec, config_from_dict,
                             load_config, load_manifest)


def _write(tmp_path, payload):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(payload))
    return p


# ---------------------------------------------------------------------------
# defaults


def test_empty_config_gives_published_defaults(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{}")
    cfg = load_config(p)
    assert isinstance(cfg, ExperimentConfig)
    zone = cfg.problem.zone
    hvac = cfg.problem.hvac
    assert zone.C == 1000.0 and zone.c_o == 0.1 and zone.c_p == 1.0
    assert zone.R_row is None
    assert hvac.eta_h == 0.9 and hvac.eta_c == 4.0 and hvac.beta == 0.5
    assert hvac.T_a == 12.8 and hvac.T_h_max == 40.0 and hvac.T_out == 30.0
    assert hvac.m_min == 0.084 and hvac.m_max == 1.5
    assert cfg.problem.comfort.T_low == 24.0
    assert cfg.problem.comfort.T_high == 26.0
    assert float(np.asarray(cfg.problem.tariff.r_e)) == 1.5e-4
    assert float(np.asarray(cfg.problem.tariff.r_h)) == 5e-6
    assert cfg.mpc.dt == 60.0
    assert cfg.seed == 0
    assert cfg.world.kind == "synthetic"


def test_blank_file_equals_empty_object(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("")
    assert load_config(p) == config_from_dict({})


def test_dt_lives_in_thermal_block_and_reaches_mpc(tmp_path):
    cfg = load_config(_write(tmp_path, {"thermal": {"dt": 30.0}}))
    assert cfg.mpc.dt == 30.0


# ---------------------------------------------------------------------------
# rejection


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        load_config(_write(tmp_path, {"bogus": 1}))


def test_unknown_nested_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="solar_gain"):
        load_config(_write(tmp_path, {"thermal": {"solar_gain": 2.0}}))
    with pytest.raises(ConfigError, match="widths"):
        load_config(_write(tmp_path, {"attack": {"widths": 5}}))


@pytest.mark.parametrize("field,value", [
    ("C", -5.0), ("C", 0.0), ("c_p", 0.0), ("eta_h", -1.0), ("eta_c", 0.0),
    ("m_max", -1.0), ("dt", 0.0),
])
def test_nonpositive_physical_parameters_rejected(tmp_path, field, value):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, {"thermal": {field: value}}))


def test_inverted_comfort_band_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, {"thermal": {"T_low": 26.0,
                                                  "T_high": 24.0}}))


def test_parse_error_carries_position(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{\n  "seed": oops\n}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_negative_seed_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"seed": -1})


def test_descending_sweep_deltas_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"sweep": {"deltas": [3.0, 1.0]}})


def test_world_kind_validation():
    with pytest.raises(ConfigError):
        config_from_dict({"world": {"kind": "martian"}})
    with pytest.raises(ConfigError):
        config_from_dict({"world": {"kind": "dataset"}})  # needs a path
    with pytest.raises(ConfigError):
        config_from_dict({"world": {"kind": "synthetic", "occupants": 0}})


def test_tariff_accepts_hourly_schedule():
    cfg = config_from_dict({"thermal": {"r_e": [1e-4, 2e-4], "r_h": 5e-6}})
    np.testing.assert_array_equal(np.asarray(cfg.problem.tariff.r_e),
                                  [1e-4, 2e-4])


def test_sweep_spec_defaults():
    spec = SweepSpec()
    assert spec.points == 8 and spec.runs == 10
    assert "identity" in spec.schemes


def test_world_spec_defaults():
    w = WorldSpec()
    assert w.kind == "synthetic" and w.occupants == 4 and w.zones == 3


# ---------------------------------------------------------------------------
# dataset manifests


def test_manifest_roundtrip_and_relative_paths(tmp_path):
    traces = tmp_path / "data" / "t.csv"
    traces.parent.mkdir()
    traces.write_text("step,occupant,zone\n0,a,1\n")
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({
        "traces": ["data/t.csv"], "period": 2, "train_end": 10,
        "eval_end": 12, "occupants": ["a"], "zones": 2}))
    loaded = load_manifest(man)
    assert isinstance(loaded, DatasetManifest)
    assert loaded.period == 2 and loaded.zones == 2
    assert loaded.traces[0].endswith("t.csv")


def test_manifest_missing_trace_file(tmp_path):
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({"traces": ["nope.csv"]}))
    with pytest.raises(ConfigError, match="nope.csv"):
        load_manifest(man)


def test_manifest_split_ordering():
    with pytest.raises(ConfigError):
        DatasetManifest(traces=("x.csv",), train_end=10, eval_end=5)
    with pytest.raises(ConfigError):
        DatasetManifest(traces=("x.csv",), period=0)
