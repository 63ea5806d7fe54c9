"""Latency, energy, power and throughput of a schedule.

Energies are accumulated in pJ (mW x ns) and reported in J. Dynamic energy
is charged per device activation, static energy (laser comb and ring
tuning hold) per powered interval of each block.

Metric definitions:

* GOPS counts the logical dense workload, two ops per MAC, regardless of how
  many MACs the sparse dataflow skipped: ``gops = 2 * dense_macs / latency_ns``.
* EPB divides total energy by the bits of operands the model consumes at
  8-bit precision: ``epb = energy_J / (8 * sum(input + weight elements))``
  over dense, conv and transposed-conv layers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .devices import DeviceConfig, LaserSpec, mr_static_power_mw, path_loss_db, required_laser_power_mw, row_loss_budget
from .ir import COMPUTE_LAYERS, ModelGraph, TransposedConv2D, count_macs, weight_count
from .schedule import (
    ArchConfig,
    Block,
    Schedule,
    ScheduleOpts,
    StageLatencyModel,
    build_schedule,
    powered_time,
    summarize_schedule,
)
from .sparse import kept_lengths

BREAKDOWN_KEYS = ("laser", "dac", "adc", "vcsel", "pd", "soa", "tuning_static", "ecu")
PJ = 1e-12

__all__ = [
    "BREAKDOWN_KEYS",
    "PerfReport",
    "StageLatencyModel",
    "UnitPower",
    "energy_of",
    "evaluate",
    "gops_epb",
    "latency_of",
    "operand_bits",
    "quick_report",
    "report",
    "peak_power_w",
    "reduced_macs",
    "unit_power",
]


@dataclass(frozen=True)
class PerfReport:
    total_latency_ns: float
    total_energy_j: float
    breakdown_j: dict
    avg_power_w: float
    gops: float
    epb_j_per_bit: float
    dense_macs: int
    reduced_macs: int
    peak_power_w: float = 0.0
    n_ops: int = 0

    @property
    def eliminated_macs(self) -> int:
        return self.dense_macs - self.reduced_macs

    def as_row(self, breakdown: bool = False) -> dict:
        row = {
            "latency_ns": self.total_latency_ns,
            "energy_j": self.total_energy_j,
            "avg_power_w": self.avg_power_w,
            "peak_power_w": self.peak_power_w,
            "gops": self.gops,
            "epb_j_per_bit": self.epb_j_per_bit,
            "dense_macs": self.dense_macs,
            "reduced_macs": self.reduced_macs,
            "ops": self.n_ops,
        }
        if breakdown:
            row.update({f"energy_{k}_j": self.breakdown_j[k] for k in BREAKDOWN_KEYS})
        return row


def latency_of(s: Schedule) -> float:
    """End time of the last op; overlap is already encoded in the schedule."""
    return s.makespan


def laser_spec(n_cols: int, config: DeviceConfig = DeviceConfig()) -> LaserSpec:
    """Comb source feeding one ring-bank row of ``n_cols`` wavelengths."""
    return LaserSpec(config.detector_sensitivity_dbm, n_cols, path_loss_db(row_loss_budget(n_cols, config)))


@dataclass(frozen=True)
class UnitPower:
    """Static and all-on dynamic power of one unit of each kind, in mW."""

    laser: float  # comb power for the K rows of one dense or conv unit
    tuning: float  # ring hold power of one dense or conv unit (two K x N banks)
    norm_tuning: float  # K broadband rings of one normalization unit
    compute_dynamic: float  # every DAC, VCSEL, PD and ADC of a unit firing at once
    act_dynamic: float
    norm_dynamic: float

    @property
    def dense_unit(self) -> float:
        return self.laser + self.tuning + self.compute_dynamic + self.act_dynamic

    @property
    def conv_unit(self) -> float:
        return self.dense_unit + self.norm_tuning + self.norm_dynamic


def unit_power(arch: ArchConfig, config: DeviceConfig = DeviceConfig(), laser: LaserSpec | None = None) -> UnitPower:
    d = config.devices
    K, N = arch.K, arch.N
    laser = laser or laser_spec(N, config)
    mr = mr_static_power_mw(config)
    return UnitPower(
        laser=K * required_laser_power_mw(laser),
        tuning=2 * K * N * mr,
        norm_tuning=K * mr,
        compute_dynamic=(2 * K * N * d.dac.power_mw + N * d.vcsel.power_mw + 2 * K * d.vcsel.power_mw
                         + K * d.photodetector.power_mw + K * d.adc.power_mw),
        act_dynamic=K * (d.photodetector.power_mw + d.soa.power_mw),
        norm_dynamic=K * (d.vcsel.power_mw + d.photodetector.power_mw),
    )


def peak_power_w(arch: ArchConfig, power_gating: bool = True, config: DeviceConfig = DeviceConfig()) -> float:
    """Worst-case instantaneous draw: every device of every powered unit on.

    With power gating only one of the two blocks is ever powered, so the peak
    is the larger block; otherwise both blocks add up.
    """
    up = unit_power(arch, config)
    dense = arch.L * up.dense_unit
    conv = arch.M * up.conv_unit
    return (max(dense, conv) if power_gating else dense + conv) * 1e-3


def energy_of(s, config: DeviceConfig = DeviceConfig(), laser: LaserSpec | None = None) -> dict:
    """Energy breakdown in J, keyed by :data:`BREAKDOWN_KEYS`.

    Accepts a :class:`Schedule` or a :class:`ScheduleSummary`; both give the
    same numbers. Per-layer contributions are summed with ``math.fsum``.
    """
    if isinstance(s, Schedule):
        if len(s) == 0:
            return dict.fromkeys(BREAKDOWN_KEYS, 0.0)
        s = s.summary()
    if s.n_ops == 0:
        return dict.fromkeys(BREAKDOWN_KEYS, 0.0)
    d = config.devices
    parts = {k: [] for k in BREAKDOWN_KEYS}
    for act, assembled in zip(s.layer_activity, s.layer_assembly):
        dac, carrier, det, norm, acts, res, ecu = act
        # stage 1: one DAC conversion per ring written, the carrier comb lit for the stage
        parts["dac"].append(dac * d.dac.energy_pj)
        # stage 2 (detection, two bias VCSELs, one ADC per row); normalization
        # (VCSEL scale plus detection); activation (detection plus SOA);
        # residual add on the coherent-summation path
        parts["vcsel"].append(carrier * d.vcsel.power_mw + (2 * det + norm + 2 * res) * d.vcsel.energy_pj)
        parts["pd"].append((det + norm + acts + res) * d.photodetector.energy_pj)
        parts["adc"].append((det + res) * d.adc.energy_pj)
        parts["soa"].append(acts * d.soa.energy_pj)
        # ECU: operand reads, partial-sum buffering, output re-placement
        parts["ecu"].append((ecu + assembled) * config.ecu_pj_per_byte)
    parts["ecu"].append(len(s.switches) * config.pcmc_switch_pj)

    # static: per powered block
    up = unit_power(s.arch, config, laser)
    on = powered_time(s.gating)
    L, M = s.arch.L, s.arch.M
    parts["laser"].append(up.laser * (L * on[Block.DENSE] + M * on[Block.CONV]))
    parts["tuning_static"].append(up.tuning * (L * on[Block.DENSE] + M * on[Block.CONV])
                                  + up.norm_tuning * M * on[Block.CONV])
    return {k: math.fsum(v) * PJ for k, v in parts.items()}


def operand_bits(graph: ModelGraph, bit_width: int = 8) -> int:
    """Bits of inputs and weights consumed by the compute layers."""
    total = 0
    for i, layer in enumerate(graph.layers):
        if isinstance(layer, COMPUTE_LAYERS):
            total += graph.input_shape_of(i).size + weight_count(layer)
    return bit_width * total


def reduced_macs(graph: ModelGraph, sparse: bool) -> int:
    """MACs actually performed: transposed convs shrink to surviving taps when ``sparse``."""
    macs = count_macs(graph)
    if not sparse:
        return macs.dense_macs
    total = 0
    for i, (layer, m) in enumerate(zip(graph.layers, macs.per_layer)):
        if isinstance(layer, TransposedConv2D):
            shape = graph.input_shape_of(i)
            kept = kept_lengths(layer.kernel, layer.stride, layer.padding, shape.height, shape.width)
            m = int(kept.sum()) * layer.in_ch * layer.out_ch
        total += m
    return total


def gops_epb(graph: ModelGraph, latency_ns: float, energy_j: float, bit_width: int = 8) -> tuple[float, float]:
    if latency_ns <= 0:
        raise ValueError("GOPS undefined for a zero-latency schedule")
    gops = 2.0 * count_macs(graph).dense_macs / latency_ns
    bits = operand_bits(graph, bit_width)
    return gops, (energy_j / bits if bits else 0.0)


def report(graph: ModelGraph, s, config: DeviceConfig = DeviceConfig()) -> PerfReport:
    """Full cost report for a :class:`Schedule` or :class:`ScheduleSummary` of ``graph``."""
    summary = s.summary() if isinstance(s, Schedule) else s
    breakdown = energy_of(summary, config)
    total = math.fsum(breakdown.values())
    latency = summary.makespan
    if latency > 0:
        gops, epb = gops_epb(graph, latency, total, summary.arch.bit_width)
        avg = total / (latency * 1e-9)
    else:
        gops = epb = avg = 0.0
    return PerfReport(
        total_latency_ns=latency,
        total_energy_j=total,
        breakdown_j=breakdown,
        avg_power_w=avg,
        gops=gops,
        epb_j_per_bit=epb,
        dense_macs=count_macs(graph).dense_macs,
        reduced_macs=reduced_macs(graph, summary.opts.sparse),
        peak_power_w=peak_power_w(summary.arch, summary.opts.power_gating, config),
        n_ops=summary.n_ops,
    )


def evaluate(graph: ModelGraph, arch: ArchConfig, opts: ScheduleOpts = ScheduleOpts(),
             config: DeviceConfig = DeviceConfig()) -> tuple[Schedule, PerfReport]:
    """Schedule ``graph`` and account for it in one call."""
    s = build_schedule(graph, arch, opts, config)
    return s, report(graph, s, config)


def quick_report(graph: ModelGraph, arch: ArchConfig, opts: ScheduleOpts = ScheduleOpts(),
                 config: DeviceConfig = DeviceConfig()) -> PerfReport:
    """Same report as :func:`evaluate` without materializing the ops (memoized per segment)."""
    return report(graph, summarize_schedule(graph, arch, opts, config), config)
