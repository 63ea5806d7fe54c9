import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from photonic_gan.devices import (
    DeviceConfig,
    DeviceParams,
    LaserSpec,
    LossBudget,
    MRGeometry,
    check_wavelength_cap,
    config_from_dict,
    dbm_to_mw,
    load_device_config,
    mw_to_dbm,
    path_loss_db,
    required_laser_power_dbm,
    required_laser_power_mw,
    resonant_wavelength,
    tuning_cost,
)
from photonic_gan.errors import ConstraintError, ModelParseError

ROOT = Path(__file__).resolve().parents[1]

# (latency ns, power mW) as published in the device table
TABLE = {
    "eo_tuning": (20.0, 0.004),
    "to_tuning": (4000.0, 27.5),
    "vcsel": (0.07, 1.3),
    "photodetector": (0.0058, 2.8),
    "soa": (0.3, 2.2),
    "dac": (0.29, 3.0),
    "adc": (0.82, 3.1),
}


def test_table_defaults_verbatim():
    d = DeviceParams()
    for name, (lat, pw) in TABLE.items():
        spec = getattr(d, name)
        assert (spec.latency_ns, spec.power_mw) == (lat, pw), name


def test_loss_defaults():
    c = DeviceConfig().losses
    assert (c.waveguide_db_per_cm, c.splitter_db, c.combiner_db, c.mr_through_db, c.mr_modulation_db,
            c.eo_tuning_db_per_cm) == (1.0, 0.13, 0.9, 0.02, 0.72, 6.0)


def test_wavelength_cap():
    assert check_wavelength_cap(36) == 36
    LaserSpec(-20, 36, 0)
    with pytest.raises(ConstraintError):
        check_wavelength_cap(37)
    with pytest.raises(ConstraintError):
        LaserSpec(-20, 37, 0)


def test_laser_examples():
    assert required_laser_power_dbm(LaserSpec(-20, 1, 0)) == -20
    spec = LaserSpec(-20, 36, 10)
    assert required_laser_power_dbm(spec) == pytest.approx(5.563025007672872, abs=1e-12)
    assert required_laser_power_mw(spec) == pytest.approx(3.6, rel=1e-12)
    step = required_laser_power_dbm(LaserSpec(-20, 32, 3)) - required_laser_power_dbm(LaserSpec(-20, 8, 3))
    assert step == pytest.approx(6.020599913279624, abs=1e-12)


def test_path_loss_examples():
    assert path_loss_db(LossBudget()) == 0
    assert path_loss_db(LossBudget(waveguide_cm=1, splitters=1, combiners=1)) == pytest.approx(2.03, abs=1e-12)
    assert path_loss_db(LossBudget(mrs_through=35, mrs_modulating=1)) == pytest.approx(1.42, abs=1e-12)
    with pytest.raises(ValueError):
        LossBudget(splitters=-1)


def test_tuning_examples():
    zero = tuning_cost(0)
    assert (zero.latency_ns, zero.power_mw) == (0, 0)
    eo = tuning_cost(1.0)
    assert (eo.mode, eo.latency_ns, eo.power_mw) == ("EO", 20.0, 0.004)
    to = tuning_cost(10.0, "TO")
    assert (to.mode, to.latency_ns, to.power_mw) == ("TO", 4000.0, 27.5)
    assert tuning_cost(1.5).mode == "TO"
    with pytest.raises(ValueError):
        tuning_cost(-0.1)
    with pytest.raises(ValueError):
        tuning_cost(1, "XO")


def test_resonant_wavelength():
    assert resonant_wavelength(MRGeometry(1 / (2 * math.pi), 1, 1.0)) == pytest.approx(1.0, rel=1e-15)
    a = resonant_wavelength(MRGeometry(5, 40, 2.4))
    assert a == pytest.approx(1.884955592153876, rel=1e-12)
    assert resonant_wavelength(MRGeometry(5, 40, 4.8)) == pytest.approx(2 * a, rel=1e-15)
    with pytest.raises(ValueError):
        MRGeometry(5, 0, 2.4)


@given(st.floats(-300, 300, allow_nan=False))
def test_dbm_round_trip(dbm):
    assert mw_to_dbm(dbm_to_mw(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)


@given(st.floats(-40, 0), st.integers(1, 36), st.integers(1, 36), st.floats(0, 60), st.floats(0, 60))
def test_laser_power_monotone(s, n1, n2, l1, l2):
    (n1, n2), (l1, l2) = sorted((n1, n2)), sorted((l1, l2))
    assert required_laser_power_dbm(LaserSpec(s, n1, l1)) <= required_laser_power_dbm(LaserSpec(s, n2, l1))
    assert required_laser_power_dbm(LaserSpec(s, n1, l1)) <= required_laser_power_dbm(LaserSpec(s, n1, l2))


def test_example_config_is_the_default():
    assert load_device_config(ROOT / "configs" / "devices_example.yaml") == DeviceConfig()


def test_config_overrides_and_errors(tmp_path):
    cfg = config_from_dict({"devices": {"ADC (8-bit)": {"power_mw": 5.0}}, "ecu_pj_per_byte": 1})
    assert cfg.devices.adc.power_mw == 5.0 and cfg.devices.adc.latency_ns == 0.82
    assert cfg.ecu_pj_per_byte == 1.0
    with pytest.raises(ModelParseError):
        config_from_dict({"bogus": 1})
    with pytest.raises(ModelParseError):
        config_from_dict({"devices": {"Laser": {}}})
    with pytest.raises(ModelParseError):
        load_device_config(tmp_path / "missing.yaml")
    assert config_from_dict(DeviceConfig().to_dict()) == DeviceConfig()
