"""Optoelectronic device constants, optical loss budget and laser sizing.

Units: latency in ns, power in mW, loss in dB, length in cm, wavelength in the
unit of the ring radius (µm in the defaults). EO tuning power is per nm of
resonance shift; TO tuning power is per full free spectral range.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .errors import ConstraintError, ModelParseError

MAX_WAVELENGTHS_PER_WAVEGUIDE = 36


@dataclass(frozen=True)
class DeviceSpec:
    latency_ns: float
    power_mw: float

    def __post_init__(self):
        if not (self.latency_ns > 0 and self.power_mw > 0):
            raise ValueError(f"device latency and power must be > 0, got {self}")

    @property
    def energy_pj(self) -> float:
        """Energy of one activation, ``power * latency`` (mW * ns = pJ)."""
        return self.power_mw * self.latency_ns


# (attribute, row label in the device table / config file)
TABLE_ROWS = (
    ("eo_tuning", "EO Tuning"),
    ("to_tuning", "TO Tuning"),
    ("vcsel", "VCSEL"),
    ("photodetector", "Photodetector"),
    ("soa", "SOA"),
    ("dac", "DAC (8-bit)"),
    ("adc", "ADC (8-bit)"),
)


@dataclass(frozen=True)
class DeviceParams:
    eo_tuning: DeviceSpec = DeviceSpec(20.0, 0.004)
    to_tuning: DeviceSpec = DeviceSpec(4000.0, 27.5)
    vcsel: DeviceSpec = DeviceSpec(0.07, 1.3)
    photodetector: DeviceSpec = DeviceSpec(0.0058, 2.8)
    soa: DeviceSpec = DeviceSpec(0.3, 2.2)
    dac: DeviceSpec = DeviceSpec(0.29, 3.0)
    adc: DeviceSpec = DeviceSpec(0.82, 3.1)


@dataclass(frozen=True)
class LossConstants:
    waveguide_db_per_cm: float = 1.0
    splitter_db: float = 0.13
    combiner_db: float = 0.9
    mr_through_db: float = 0.02
    mr_modulation_db: float = 0.72
    eo_tuning_db_per_cm: float = 6.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss {f.name} must be >= 0")


@dataclass(frozen=True)
class LossBudget:
    """Geometry of one optical path plus the per-component losses it sees."""

    waveguide_cm: float = 0.0
    splitters: int = 0
    combiners: int = 0
    mrs_through: int = 0
    mrs_modulating: int = 0
    eo_tuned_cm: float = 0.0
    constants: LossConstants = LossConstants()

    def __post_init__(self):
        for name in ("waveguide_cm", "splitters", "combiners", "mrs_through", "mrs_modulating", "eo_tuned_cm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class MRGeometry:
    radius: float
    order: int
    n_eff: float

    def __post_init__(self):
        if not (self.radius > 0 and self.n_eff > 0) or int(self.order) != self.order or self.order < 1:
            raise ValueError(f"invalid ring geometry {self}")


@dataclass(frozen=True)
class LaserSpec:
    sensitivity_dbm: float
    n_wavelengths: int
    path_loss_db: float

    def __post_init__(self):
        if int(self.n_wavelengths) != self.n_wavelengths or self.n_wavelengths < 1:
            raise ValueError(f"wavelength count must be a positive integer, got {self.n_wavelengths}")
        check_wavelength_cap(self.n_wavelengths)


@dataclass(frozen=True)
class TuningCost:
    mode: str
    latency_ns: float
    power_mw: float


@dataclass(frozen=True)
class DeviceConfig:
    """Everything the cost model reads about the technology.

    Only ``devices`` and ``losses`` come from published figures; the other
    knobs fill gaps (detector sensitivity, geometry, trimming, ECU cost) and
    are meant to be overridden from a ``--devices`` file.
    """

    devices: DeviceParams = DeviceParams()
    losses: LossConstants = LossConstants()
    detector_sensitivity_dbm: float = -20.0
    eo_to_threshold_nm: float = 1.0
    fsr_nm: float = 10.0
    unit_path_cm: float = 0.5
    ring_radius_um: float = 5.0
    eo_hold_shift_nm: float = 1.0
    to_trim_fsr_fraction: float = 0.1
    ecu_pj_per_byte: float = 0.5
    pcmc_switch_pj: float = 0.0
    pcmc_switch_ns: float = 0.0
    eo_in_stage1: bool = False
    wavelength_cap: int = MAX_WAVELENGTHS_PER_WAVEGUIDE

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("devices", "losses")}
        out["devices"] = {label: asdict(getattr(self.devices, attr)) for attr, label in TABLE_ROWS}
        out["losses"] = asdict(self.losses)
        return out


def check_wavelength_cap(n: int, cap: int = MAX_WAVELENGTHS_PER_WAVEGUIDE) -> int:
    if n > cap:
        raise ConstraintError(f"{n} wavelengths on one waveguide exceeds the {cap}-MR limit")
    return n


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


def resonant_wavelength(g: MRGeometry) -> float:
    return 2.0 * math.pi * g.radius * g.n_eff / g.order


def required_laser_power_dbm(spec: LaserSpec) -> float:
    """Smallest laser power that still clears the detector after all losses."""
    return spec.sensitivity_dbm + spec.path_loss_db + 10.0 * math.log10(spec.n_wavelengths)


def required_laser_power_mw(spec: LaserSpec) -> float:
    return dbm_to_mw(required_laser_power_dbm(spec))


def path_loss_db(budget: LossBudget) -> float:
    c = budget.constants
    return (
        budget.waveguide_cm * c.waveguide_db_per_cm
        + budget.splitters * c.splitter_db
        + budget.combiners * c.combiner_db
        + budget.mrs_through * c.mr_through_db
        + budget.mrs_modulating * c.mr_modulation_db
        + budget.eo_tuned_cm * c.eo_tuning_db_per_cm
    )


def tuning_cost(shift_nm: float, mode: str | None = None, config: DeviceConfig = DeviceConfig()) -> TuningCost:
    """Latency and power to hold a resonance shift.

    ``mode=None`` picks EO up to ``config.eo_to_threshold_nm`` and TO beyond.
    Both scale linearly with the shift: EO per nm, TO per fraction of an FSR.
    """
    if shift_nm < 0:
        raise ValueError(f"tuning shift must be >= 0, got {shift_nm}")
    if mode is None:
        mode = "EO" if shift_nm <= config.eo_to_threshold_nm else "TO"
    d = config.devices
    if mode == "EO":
        return TuningCost("EO", d.eo_tuning.latency_ns * shift_nm, d.eo_tuning.power_mw * shift_nm)
    if mode == "TO":
        frac = shift_nm / config.fsr_nm
        return TuningCost("TO", d.to_tuning.latency_ns * frac, d.to_tuning.power_mw * frac)
    raise ValueError(f"tuning mode must be 'EO' or 'TO', got {mode!r}")


def row_loss_budget(n_cols: int, config: DeviceConfig = DeviceConfig()) -> LossBudget:
    """Loss path of one MR-bank row: comb combiner, fan-out splitter, two banks of rings.

    Each wavelength is modulated by one ring in the activation bank and one in
    the weight bank, and passes the other ``n_cols - 1`` rings of each bank
    off-resonance.
    """
    check_wavelength_cap(n_cols, config.wavelength_cap)
    ring_cm = 2 * math.pi * config.ring_radius_um * 1e-4
    return LossBudget(
        waveguide_cm=config.unit_path_cm,
        splitters=1,
        combiners=1,
        mrs_through=2 * (n_cols - 1),
        mrs_modulating=2,
        eo_tuned_cm=2 * ring_cm,
        constants=config.losses,
    )


def row_laser_power_mw(n_cols: int, config: DeviceConfig = DeviceConfig()) -> float:
    loss = path_loss_db(row_loss_budget(n_cols, config))
    return required_laser_power_mw(LaserSpec(config.detector_sensitivity_dbm, n_cols, loss))


def mr_static_power_mw(config: DeviceConfig = DeviceConfig()) -> float:
    """Holding power of one ring: thermal trim plus the EO bias."""
    trim = tuning_cost(config.to_trim_fsr_fraction * config.fsr_nm, "TO", config).power_mw
    hold = tuning_cost(config.eo_hold_shift_nm, "EO", config).power_mw
    return trim + hold


# ---------------------------------------------------------------------------
# config files

_LABEL_TO_ATTR = {label: attr for attr, label in TABLE_ROWS}


def config_from_dict(doc: dict) -> DeviceConfig:
    if not isinstance(doc, dict):
        raise ModelParseError("device config must be a mapping")
    base = DeviceConfig()
    known = {f.name for f in fields(DeviceConfig)}
    if unknown := set(doc) - known:
        raise ModelParseError(f"unknown device config keys {sorted(unknown)}")
    kwargs = {}
    try:
        if "devices" in doc:
            rows = {}
            for label, entry in (doc["devices"] or {}).items():
                if label not in _LABEL_TO_ATTR:
                    raise ModelParseError(f"unknown device row {label!r}; expected one of {sorted(_LABEL_TO_ATTR)}")
                cur = getattr(base.devices, _LABEL_TO_ATTR[label])
                rows[_LABEL_TO_ATTR[label]] = DeviceSpec(
                    float(entry.get("latency_ns", cur.latency_ns)), float(entry.get("power_mw", cur.power_mw))
                )
            kwargs["devices"] = replace(base.devices, **rows)
        if "losses" in doc:
            kwargs["losses"] = replace(base.losses, **{k: float(v) for k, v in (doc["losses"] or {}).items()})
        for key in known - {"devices", "losses"}:
            if key in doc:
                kwargs[key] = type(getattr(base, key))(doc[key])
    except (TypeError, ValueError, AttributeError) as exc:
        raise ModelParseError(f"bad device config: {exc}") from exc
    return replace(base, **kwargs)


def load_device_config(path) -> DeviceConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ModelParseError(f"cannot read device config {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ModelParseError(f"{path}: malformed YAML: {exc}") from exc
    return config_from_dict(doc or {})
