"""Mapping GAN layers onto the photonic blocks and timing the result.

The accelerator has ``L`` dense units and ``M`` convolution units, each with
two ``K x N`` microring banks (activations and weights), one normalization
unit paired with every convolution unit, and one activation unit (``K`` SOA
lanes) behind every dense and convolution unit.

Every matrix-vector product of logical size ``R x C`` is cut into
``ceil(R/K) * ceil(C/N)`` tiles. A tile is executed in two stages:

* stage 1: DACs drive the ring banks, the VCSEL comb passes through them;
* stage 2: balanced photodetection, bias added by coherent summation, ADC.

Partial sums of column tiles are accumulated in the electronic control unit.
Schedules are stored column-wise (one numpy array per field) because even
desk-scale models produce hundreds of thousands of tiles; :class:`TileOp`
objects are materialized only on request.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .devices import MAX_WAVELENGTHS_PER_WAVEGUIDE, DeviceConfig, check_wavelength_cap
from .errors import MappingError
from .ir import (
    Activation,
    Conv2D,
    Dense,
    ModelGraph,
    ResidualAdd,
    TensorShape,
    TransposedConv2D,
)
from .kernels import group_ready, mvm_timing, queue_timing
from .sparse import output_groups


class Block(IntEnum):
    DENSE = 0
    CONV = 1
    NORM = 2
    ACT = 3


class OpKind(IntEnum):
    MVM = 0
    NORM = 1
    ACT = 2
    RESIDUAL = 3


ACC_BYTES = 4  # partial sums leave the ADC at 32 bits


@dataclass(frozen=True)
class ArchConfig:
    N: int  # ring-bank columns (wavelengths per waveguide)
    K: int  # ring-bank rows
    L: int  # dense units
    M: int  # convolution (and normalization) units
    bit_width: int = 8
    mrs_per_waveguide_cap: int = MAX_WAVELENGTHS_PER_WAVEGUIDE
    power_budget_w: float = 100.0

    def __post_init__(self):
        for name in ("N", "K", "L", "M"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        check_wavelength_cap(self.N, self.mrs_per_waveguide_cap)
        if not self.power_budget_w > 0:
            raise ValueError("power budget must be > 0")

    @classmethod
    def parse(cls, text: str, **kwargs) -> "ArchConfig":
        parts = [p.strip() for p in text.replace("[", "").replace("]", "").split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected N,K,L,M, got {text!r}")
        return cls(*(int(p) for p in parts), **kwargs)

    @property
    def label(self) -> str:
        return f"[{self.N},{self.K},{self.L},{self.M}]"

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.N, self.K, self.L, self.M)

    def units(self, block: Block) -> int:
        if block == Block.DENSE:
            return self.L
        if block in (Block.CONV, Block.NORM):
            return self.M
        return self.L + self.M


@dataclass(frozen=True)
class ScheduleOpts:
    sparse: bool = False
    pipelined: bool = False
    power_gating: bool = False
    weight_stationary: bool = True

    @classmethod
    def parse(cls, text: str | None) -> "ScheduleOpts":
        """``"sparse,pipeline,gating"``, ``"all"`` or ``"none"``."""
        names = {"sparse": "sparse", "pipeline": "pipelined", "pipelined": "pipelined",
                 "gating": "power_gating", "power_gating": "power_gating"}
        if text is None or text.strip() in ("", "none"):
            return cls()
        if text.strip() == "all":
            return cls(True, True, True)
        flags = {}
        for tok in text.split(","):
            tok = tok.strip()
            if tok not in names:
                raise ValueError(f"unknown optimization {tok!r}; use sparse, pipeline, gating")
            flags[names[tok]] = True
        return cls(**flags)

    @property
    def label(self) -> str:
        on = [n for n, f in (("sparse", self.sparse), ("pipeline", self.pipelined),
                             ("gating", self.power_gating)) if f]
        return ",".join(on) or "none"


@dataclass(frozen=True)
class StageLatencyModel:
    """Per-op durations in ns, derived from the device table.

    A tile occupies stage 1 for ``stage1`` (plus ``eo_extra`` when its weights
    are rewritten and EO settling is counted) and stage 2 for
    ``stage2 + adc``: detection with the bias VCSELs, then one conversion.
    """

    stage1: float
    stage2: float
    adc: float
    norm: float
    activation: float
    eo_extra: float = 0.0

    def __post_init__(self):
        if min(self.stage1, self.stage2, self.adc, self.norm, self.activation) <= 0 or self.eo_extra < 0:
            raise ValueError(f"stage latencies must be > 0, got {self}")

    @classmethod
    def from_config(cls, cfg: DeviceConfig) -> "StageLatencyModel":
        d = cfg.devices
        return cls(
            stage1=d.dac.latency_ns + d.vcsel.latency_ns,
            stage2=d.photodetector.latency_ns + d.vcsel.latency_ns,
            adc=d.adc.latency_ns,
            norm=d.vcsel.latency_ns + d.photodetector.latency_ns,
            activation=d.photodetector.latency_ns + d.soa.latency_ns,
            eo_extra=d.eo_tuning.latency_ns * cfg.eo_hold_shift_nm if cfg.eo_in_stage1 else 0.0,
        )

    @property
    def detect(self) -> float:
        """Stage-2 occupancy of one tile, ADC included."""
        return self.stage2 + self.adc

    @property
    def single_tile(self) -> float:
        return self.stage1 + self.detect


@dataclass(frozen=True)
class TileOp:
    layer: int
    kind: OpKind
    block: Block
    unit: int
    stage: int
    rows: int
    cols: int
    start_ns: float
    dur_ns: float
    reduced: bool = False
    weight_write: bool = False
    dep: int = -1

    @property
    def end_ns(self) -> float:
        return self.start_ns + self.dur_ns


@dataclass
class LayerTiling:
    """Compute tiles of one layer in issue order."""

    block: Block
    rows: np.ndarray
    cols: np.ndarray
    wtile: np.ndarray  # weight-tile id; equal ids share resident weights
    group: np.ndarray  # output row-group each tile contributes to
    group_rows: np.ndarray
    reduced: bool = False

    def __len__(self):
        return int(self.rows.shape[0])

    @property
    def n_groups(self) -> int:
        return int(self.group_rows.shape[0])

    def tile_ops(self, layer_index: int = 0) -> list[TileOp]:
        """Untimed stage-1 ops, one per tile (inspection and small examples)."""
        return [
            TileOp(layer_index, OpKind.MVM, self.block, 0, 1, int(r), int(c), 0.0, 0.0, self.reduced)
            for r, c in zip(self.rows, self.cols)
        ]


def _mvm_tiles(R: int, C: int, K: int, N: int):
    """Row and column extents of every tile of an R x C product, row-tile major."""
    nr, nc = -(-R // K), -(-C // N)
    rows = np.minimum(K, R - K * np.arange(nr))
    cols = np.minimum(N, C - N * np.arange(nc))
    return rows, cols


def tile_layer(layer, arch: ArchConfig, in_shape: TensorShape, out_shape: TensorShape,
               sparse: bool = False) -> LayerTiling:
    """Lower one compute layer to ring-bank tiles.

    Convolutions become one matrix-vector product per output pixel (patch
    extraction). Tiles are issued weight-tile major: for each weight tile, every
    pixel that uses it streams through before the weights change. With
    ``sparse`` a transposed conv uses only surviving taps, so pixels are
    grouped by their tap set and each group gets its own, shorter, weight tiles.
    """
    return _tile(layer, arch.K, arch.N, in_shape, out_shape, sparse)


def _tile(layer, K, N, in_shape, out_shape, sparse):
    if isinstance(layer, Dense):
        rows, cols = _mvm_tiles(layer.out_features, layer.in_features, K, N)
        nr, nc = rows.size, cols.size
        r = np.repeat(rows, nc)
        c = np.tile(cols, nr)
        t = np.arange(nr * nc)
        return LayerTiling(Block.DENSE, r, c, t, t // nc, rows.astype(np.int64))
    if not isinstance(layer, (Conv2D, TransposedConv2D)):
        raise MappingError(f"no block can execute a {type(layer).__name__} layer")

    n_pix = out_shape.height * out_shape.width
    if sparse and isinstance(layer, TransposedConv2D):
        pixel_sets = [
            (len(taps) * layer.in_ch, pix)
            for taps, pix in output_groups(layer.kernel, layer.stride, layer.padding,
                                           in_shape.height, in_shape.width)
        ]
    else:
        pixel_sets = [(layer.kernel ** 2 * layer.in_ch, np.arange(n_pix))]

    out_rows, _ = _mvm_tiles(layer.out_ch, 1, K, N)
    nr = out_rows.size
    parts_r, parts_c, parts_w, parts_g = [], [], [], []
    wt_base = 0
    for length, pix in pixel_sets:
        if length == 0:
            continue
        _, cols = _mvm_tiles(1, length, K, N)
        nc, npx = cols.size, pix.size
        rt = np.repeat(np.arange(nr), nc * npx)
        ct = np.tile(np.repeat(np.arange(nc), npx), nr)
        px = np.tile(pix, nr * nc)
        parts_r.append(out_rows[rt])
        parts_c.append(cols[ct])
        parts_w.append(wt_base + rt * nc + ct)
        parts_g.append(rt * n_pix + px)
        wt_base += nr * nc
    if parts_r:
        cat = np.concatenate
        r, c, w, g = cat(parts_r), cat(parts_c), cat(parts_w), cat(parts_g)
    else:
        r = c = w = g = np.zeros(0, dtype=np.int64)
    group_rows = np.repeat(out_rows, n_pix)
    is_sparse = sparse and isinstance(layer, TransposedConv2D)
    return LayerTiling(Block.CONV, r, c, w, g, group_rows.astype(np.int64), reduced=is_sparse)


# ---------------------------------------------------------------------------
# schedules


_DTYPES = {
    "layer": np.int32, "kind": np.int8, "block": np.int8, "unit": np.int32, "stage": np.int8,
    "rows": np.int32, "cols": np.int32, "reduced": bool, "weight_write": bool,
    "start": np.float64, "dur": np.float64, "dep": np.int64,
}
_COLUMNS = tuple(_DTYPES)

# per-layer activity counters, the inputs of the energy model
ACTIVITY_FIELDS = ("dac_writes", "carrier_col_ns", "detect_rows", "norm_rows", "act_rows",
                   "residual_rows", "ecu_bytes")


def _activity(kind, stage, rows, cols, ww, dur) -> tuple:
    """Device activations of one layer's ops (rows of ring banks, columns lit, bytes moved)."""
    s1 = (kind == OpKind.MVM) & (stage == 1)
    s2 = (kind == OpKind.MVM) & (stage == 2)
    r = rows.astype(np.int64)
    c = cols.astype(np.int64)
    written = (r * c)[s1 & ww]
    dac = int((r * c)[s1].sum() + written.sum())
    detect = int(r[s2].sum())
    ecu = int(c[s1].sum() + written.sum()) + ACC_BYTES * detect
    return (
        dac,
        float(np.sum((c * dur)[s1])),
        detect,
        int(r[kind == OpKind.NORM].sum()),
        int(r[kind == OpKind.ACT].sum()),
        int(r[kind == OpKind.RESIDUAL].sum()),
        ecu,
    )


def _makespan(spans) -> float:
    return max((span[1] for span in spans if span is not None), default=0.0)


def gating_intervals(layer_block, layer_span, power_gating: bool):
    """Powered ``(block, start, end)`` intervals of the dense and conv blocks.

    Without gating both blocks stay on for the whole run. With gating a block
    is powered from the first to the last op of each run of consecutive layers
    it executes.
    """
    makespan = _makespan(layer_span)
    if not power_gating:
        return [(int(Block.DENSE), 0.0, makespan), (int(Block.CONV), 0.0, makespan)]
    intervals = []
    for blk, span in zip(layer_block, layer_span):
        if span is None:
            continue
        if intervals and intervals[-1][0] == blk:
            intervals[-1] = (blk, intervals[-1][1], max(intervals[-1][2], span[1]))
        else:
            intervals.append((blk, span[0], span[1]))
    return intervals


def powered_time(gating) -> dict:
    """Total powered ns per block from a list of gating intervals (or a schedule)."""
    if isinstance(gating, (Schedule, ScheduleSummary)):
        gating = gating.gating
    total = {Block.DENSE: 0.0, Block.CONV: 0.0}
    for blk, a, z in gating:
        total[Block(blk)] += z - a
    return total


@dataclass(frozen=True)
class ScheduleSummary:
    """What the cost model needs from a schedule, without the per-op columns."""

    arch: ArchConfig
    opts: ScheduleOpts
    layer_block: tuple
    layer_fused: tuple
    layer_assembly: tuple
    layer_span: tuple
    layer_activity: tuple
    switches: tuple
    n_ops: int

    @property
    def makespan(self) -> float:
        return _makespan(self.layer_span)

    @property
    def gating(self):
        return gating_intervals(self.layer_block, self.layer_span, self.opts.power_gating)


@dataclass
class Schedule:
    """Timed ops in column form, plus power-gating and routing events.

    ``gating`` rows are ``(block, start, end)`` powered intervals for the dense
    and convolution blocks (normalization and activation units follow their
    parent block). ``switches`` rows are ``(time, from_block, to_block)`` PCMC
    reconfigurations. ``layer_span`` holds each layer's ``(start, end)``.
    """

    arch: ArchConfig
    opts: ScheduleOpts
    layer: np.ndarray
    kind: np.ndarray
    block: np.ndarray
    unit: np.ndarray
    stage: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    reduced: np.ndarray
    weight_write: np.ndarray
    start: np.ndarray
    dur: np.ndarray
    dep: np.ndarray
    switches: list = field(default_factory=list)
    layer_block: tuple = ()  # parent block (DENSE/CONV) of every graph layer
    layer_fused: tuple = ()  # layer may overlap its predecessor (pipelined chains)
    layer_assembly: tuple = ()  # output elements re-placed by the ECU after a reduced layer
    layer_span: tuple = ()
    gating: list = field(default_factory=list)

    def __post_init__(self):
        n_layers = max(len(self.layer_block), int(self.layer.max()) + 1 if len(self) else 0)
        if not self.layer_span:
            self.layer_span = tuple(column_spans(self, n_layers))
        if not self.layer_fused:
            self.layer_fused = (False,) * n_layers
        if not self.layer_assembly:
            self.layer_assembly = (0,) * n_layers
        if not self.gating:
            self.gating = gating_intervals(self.layer_block, self.layer_span, self.opts.power_gating)

    @property
    def end(self) -> np.ndarray:
        return self.start + self.dur

    @property
    def makespan(self) -> float:
        return _makespan(self.layer_span)

    def __len__(self):
        return int(self.start.shape[0])

    def op(self, i: int) -> TileOp:
        return TileOp(int(self.layer[i]), OpKind(int(self.kind[i])), Block(int(self.block[i])),
                      int(self.unit[i]), int(self.stage[i]), int(self.rows[i]), int(self.cols[i]),
                      float(self.start[i]), float(self.dur[i]), bool(self.reduced[i]),
                      bool(self.weight_write[i]), int(self.dep[i]))

    def ops(self) -> list[TileOp]:
        return [self.op(i) for i in range(len(self))]

    def parent_block(self) -> np.ndarray:
        """DENSE or CONV for every op; activation units L.. belong to the conv block."""
        parent = np.where(self.block == Block.DENSE, Block.DENSE, Block.CONV)
        is_act = self.block == Block.ACT
        parent[is_act] = np.where(self.unit[is_act] < self.arch.L, Block.DENSE, Block.CONV)
        return parent

    def summary(self) -> ScheduleSummary:
        activity = []
        for li in range(len(self.layer_span)):
            m = self.layer == li
            activity.append(_activity(self.kind[m], self.stage[m], self.rows[m], self.cols[m],
                                      self.weight_write[m], self.dur[m]))
        return ScheduleSummary(self.arch, self.opts, tuple(self.layer_block), tuple(self.layer_fused),
                               tuple(self.layer_assembly), tuple(self.layer_span), tuple(activity),
                               tuple(self.switches), len(self))

    @classmethod
    def from_ops(cls, ops, arch, opts=ScheduleOpts(), switches=(), layer_block=(),
                 layer_fused=()) -> "Schedule":
        """Assemble a schedule from :class:`TileOp` objects (spans and gating are derived)."""
        ops = list(ops)
        get = {
            "layer": lambda o: o.layer, "kind": lambda o: int(o.kind), "block": lambda o: int(o.block),
            "unit": lambda o: o.unit, "stage": lambda o: o.stage, "rows": lambda o: o.rows,
            "cols": lambda o: o.cols, "reduced": lambda o: o.reduced,
            "weight_write": lambda o: o.weight_write, "start": lambda o: o.start_ns,
            "dur": lambda o: o.dur_ns, "dep": lambda o: o.dep,
        }
        arrays = {k: np.array([f(o) for o in ops], dtype=_DTYPES[k]) for k, f in get.items()}
        return cls(arch, opts, switches=list(switches), layer_block=tuple(layer_block),
                   layer_fused=tuple(layer_fused), **arrays)

    def to_csv(self, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "block", "unit", "stage", "start_ns", "dur_ns", "kind", "rows", "cols",
                    "reduced", "weight_write"])
        names = [b.name.lower() for b in Block]
        kinds = [k.name.lower() for k in OpKind]
        for i in range(len(self)):
            w.writerow([int(self.layer[i]), names[self.block[i]], int(self.unit[i]), int(self.stage[i]),
                        repr(float(self.start[i])), repr(float(self.dur[i])), kinds[self.kind[i]],
                        int(self.rows[i]), int(self.cols[i]), int(self.reduced[i]),
                        int(self.weight_write[i])])
        return buf.getvalue()


def column_spans(s: Schedule, n_layers: int | None = None):
    """``(start, end)`` of every layer computed from the op columns (None for empty layers)."""
    n_layers = len(s.layer_span) if n_layers is None else n_layers
    lo = np.full(n_layers, np.inf)
    hi = np.full(n_layers, -np.inf)
    if len(s):
        np.minimum.at(lo, s.layer, s.start)
        np.maximum.at(hi, s.layer, s.start + s.dur)
    return [(float(a), float(z)) if np.isfinite(a) else None for a, z in zip(lo, hi)]


class _Builder:
    """Accumulates column chunks and hands out op ids."""

    def __init__(self):
        self.chunks = {name: [] for name in _COLUMNS}
        self.count = 0

    def add(self, layer, kind, block, unit, stage, rows, cols, reduced, weight_write, start, dur, dep):
        n = int(np.size(start))
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        vals = dict(layer=layer, kind=kind, block=block, unit=unit, stage=stage, rows=rows, cols=cols,
                    reduced=reduced, weight_write=weight_write, start=start, dur=dur, dep=dep)
        for k, v in vals.items():
            v = np.asarray(v, dtype=_DTYPES[k])
            self.chunks[k].append(np.full(n, v, dtype=_DTYPES[k]) if v.ndim == 0 else v)
        ids = np.arange(self.count, self.count + n, dtype=np.int64)
        self.count += n
        return ids

    def arrays(self):
        return {k: np.concatenate(parts) if parts else np.zeros(0, dtype=_DTYPES[k])
                for k, parts in self.chunks.items()}


def _time_segment(layers, in_shapes, out_shapes, block, K, N, U, sparse, pipelined, stationary,
                  times: StageLatencyModel):
    """Time one segment from t = 0 on ``U`` units.

    A segment is a single layer, or a compute layer plus the activation that
    consumes it. Activation units are numbered from 0 here; the caller adds
    the offset of the conv block. Returns ``(columns, spans, fused)`` with
    spans relative to the segment start.
    """
    b = _Builder()
    fused = [False] * len(layers)
    layer = layers[0]
    if isinstance(layer, (Dense, Conv2D, TransposedConv2D)):
        tiling = _tile(layer, K, N, in_shapes[0], out_shapes[0], sparse)
        n = len(tiling)
        unit = np.arange(n) % U
        ww = np.ones(n, dtype=bool)
        if block == Block.CONV and stationary and n > U:
            ww[U:] = tiling.wtile[U:] != tiling.wtile[:-U]
        d1 = times.stage1 + times.eo_extra * ww
        s1, s2 = mvm_timing(U, 0.0, d1, times.detect, pipelined)
        ids1 = b.add(0, OpKind.MVM, block, unit, 1, tiling.rows, tiling.cols, tiling.reduced, ww, s1, d1, -1)
        ids2 = b.add(0, OpKind.MVM, block, unit, 2, tiling.rows, tiling.cols, tiling.reduced, False,
                     s2, times.detect, ids1)
        end2 = s2 + times.detect
        layer_end = float(end2.max()) if n else 0.0
        ready, last = group_ready(tiling.group, end2, tiling.n_groups)
        covered = last >= 0
        safe = np.maximum(last, 0)
        g_unit = np.where(covered, unit[safe] if n else 0, np.arange(tiling.n_groups) % U)
        ready = np.where(covered, ready, 0.0)
        deps = np.where(covered, ids2[safe] if n else -1, -1)

        norm = getattr(layer, "follow_norm", None)
        if norm is not None:
            r = ready if pipelined else np.full_like(ready, layer_end)
            ns = queue_timing(r, g_unit, U, times.norm, 0.0)
            deps = b.add(0, OpKind.NORM, Block.NORM, g_unit, 1, tiling.group_rows, 1, False, False,
                         ns, times.norm, deps)
            ready = ns + times.norm
            layer_end = max(layer_end, float(ready.max()))
        if len(layers) > 1:
            fused[1] = pipelined
            r = ready if pipelined else np.full_like(ready, layer_end)
            st = queue_timing(r, g_unit, U, times.activation, 0.0)
            b.add(1, OpKind.ACT, Block.ACT, g_unit, 1, tiling.group_rows, 1, False, False, st,
                  times.activation, deps if pipelined else -1)
    else:
        # element-wise layer on its own: lanes of K elements dealt round-robin
        size = out_shapes[0].size
        n_ops = -(-size // K)
        rows = np.minimum(K, size - K * np.arange(n_ops))
        units = np.arange(n_ops) % U
        if isinstance(layer, Activation):
            st = queue_timing(np.zeros(n_ops), units, U, times.activation, 0.0)
            b.add(0, OpKind.ACT, Block.ACT, units, 1, rows, 1, False, False, st, times.activation, -1)
        elif isinstance(layer, ResidualAdd):
            st = queue_timing(np.zeros(n_ops), units, U, times.detect, 0.0)
            b.add(0, OpKind.RESIDUAL, block, units, 2, rows, 1, False, False, st, times.detect, -1)
        else:
            raise MappingError(f"no block can execute a {type(layer).__name__} layer")
    cols = b.arrays()
    end = cols["start"] + cols["dur"]
    spans = []
    for j in range(len(layers)):
        m = cols["layer"] == j
        spans.append((float(cols["start"][m].min()), float(end[m].max())) if m.any() else None)
    return cols, spans, fused


@lru_cache(maxsize=1 << 16)
def _segment_summary(*key):
    cols, spans, fused = _time_segment(*key)
    activity = []
    for j in range(len(spans)):
        m = cols["layer"] == j
        activity.append(_activity(cols["kind"][m], cols["stage"][m], cols["rows"][m], cols["cols"][m],
                                  cols["weight_write"][m], cols["dur"][m]))
    return tuple(spans), tuple(fused), tuple(activity), int(cols["start"].shape[0])


def _segments(graph: ModelGraph):
    """Split the graph into segments and assign each its parent block."""
    layers = graph.layers
    block = Block.DENSE if graph.input_shape.is_vector else Block.CONV
    out, i = [], 0
    while i < len(layers):
        layer = layers[i]
        if isinstance(layer, Dense):
            block = Block.DENSE
        elif isinstance(layer, (Conv2D, TransposedConv2D)):
            block = Block.CONV
        compute = isinstance(layer, (Dense, Conv2D, TransposedConv2D))
        if compute and i + 1 < len(layers) and isinstance(layers[i + 1], Activation):
            out.append(((i, i + 1), block))
            i += 2
        else:
            out.append(((i,), block))
            i += 1
    return out


def _segment_key(graph, idx, block, arch, opts, times):
    shapes = graph.shapes
    layer = graph.layers[idx[0]]
    reduced = opts.sparse and isinstance(layer, TransposedConv2D)
    return (
        tuple(graph.layers[i] for i in idx),
        tuple(graph.input_shape_of(i) for i in idx),
        tuple(shapes[i] for i in idx),
        int(block), arch.K, arch.N, arch.units(block),
        reduced, opts.pipelined, opts.weight_stationary, times,
    )


def _assembly(graph, idx, opts):
    return [graph.shapes[i].size if opts.sparse and isinstance(graph.layers[i], TransposedConv2D) else 0
            for i in idx]


def build_schedule(graph: ModelGraph, arch: ArchConfig, opts: ScheduleOpts = ScheduleOpts(),
                   config: DeviceConfig = DeviceConfig()) -> Schedule:
    """Place every layer of ``graph`` onto the architecture and time it.

    Layers execute in order; a layer starts once everything before it is
    done, except that with ``opts.pipelined`` an activation fused behind a
    dense or conv layer (and that layer's normalization) processes each
    output row-group as soon as it is complete, and stage 1 of consecutive
    tiles overlaps stage 2 on every unit.
    """
    check_wavelength_cap(arch.N, config.wavelength_cap)
    times = StageLatencyModel.from_config(config)
    b = _Builder()
    t_now = 0.0
    prev = None
    layer_block, layer_fused, assembly, spans, switches = [], [], [], [], []
    for idx, block in _segments(graph):
        if prev is not None and block != prev:
            switches.append((t_now, int(prev), int(block)))
            t_now = t_now + config.pcmc_switch_ns
        cols, rel_spans, fused = _time_segment(*_segment_key(graph, idx, block, arch, opts, times))
        unit = cols["unit"]
        if block == Block.CONV:
            unit = np.where(cols["kind"] == OpKind.ACT, unit + arch.L, unit)
        dep = np.where(cols["dep"] >= 0, cols["dep"] + b.count, -1)
        b.add(cols["layer"] + idx[0], cols["kind"], cols["block"], unit, cols["stage"], cols["rows"],
              cols["cols"], cols["reduced"], cols["weight_write"], t_now + cols["start"], cols["dur"], dep)
        spans += [None if sp is None else (t_now + sp[0], t_now + sp[1]) for sp in rel_spans]
        layer_block += [int(block)] * len(idx)
        layer_fused += fused
        assembly += _assembly(graph, idx, opts)
        t_now = _makespan(spans)
        prev = block
    return Schedule(arch, opts, **b.arrays(), switches=switches, layer_block=tuple(layer_block),
                    layer_fused=tuple(layer_fused), layer_assembly=tuple(assembly), layer_span=tuple(spans))


def summarize_schedule(graph: ModelGraph, arch: ArchConfig, opts: ScheduleOpts = ScheduleOpts(),
                       config: DeviceConfig = DeviceConfig()) -> ScheduleSummary:
    """Same result as ``build_schedule(...).summary()``, bit for bit, without keeping the ops.

    Segment timings are memoized on (layers, shapes, K, N, unit count,
    toggles, stage latencies), which is what makes grid searches cheap:
    a dense layer's timing does not depend on M, nor a conv layer's on L.
    """
    check_wavelength_cap(arch.N, config.wavelength_cap)
    times = StageLatencyModel.from_config(config)
    t_now = 0.0
    prev = None
    layer_block, layer_fused, assembly, spans, activity, switches = [], [], [], [], [], []
    n_ops = 0
    for idx, block in _segments(graph):
        if prev is not None and block != prev:
            switches.append((t_now, int(prev), int(block)))
            t_now = t_now + config.pcmc_switch_ns
        rel_spans, fused, act, n = _segment_summary(*_segment_key(graph, idx, block, arch, opts, times))
        spans += [None if sp is None else (t_now + sp[0], t_now + sp[1]) for sp in rel_spans]
        layer_block += [int(block)] * len(idx)
        layer_fused += fused
        activity += act
        assembly += _assembly(graph, idx, opts)
        n_ops += n
        t_now = _makespan(spans)
        prev = block
    return ScheduleSummary(arch, opts, tuple(layer_block), tuple(layer_fused), tuple(assembly),
                           tuple(spans), tuple(activity), tuple(switches), n_ops)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


def validate_schedule(s: Schedule, arch: ArchConfig | None = None) -> list[Violation]:
    """Check every schedule invariant; returns all violations found (empty when valid)."""
    arch = arch or s.arch
    out: list[Violation] = []
    n = len(s)
    if arch.N > arch.mrs_per_waveguide_cap:
        out.append(Violation("wavelength_cap", f"N={arch.N} exceeds {arch.mrs_per_waveguide_cap} per waveguide"))
    if n == 0:
        return out
    tol = 1e-9 * max(1.0, s.makespan)
    end = s.end
    names = [blk.name.lower() for blk in Block]

    if np.any(s.dur <= 0) or np.any(s.start < -tol):
        out.append(Violation("timing", "ops with non-positive duration or negative start"))
    bad = np.flatnonzero((s.rows < 1) | (s.rows > arch.K) | (s.cols < 1) | (s.cols > arch.N))
    for i in bad[:20]:
        out.append(Violation("extent", f"op {i} uses {s.rows[i]}x{s.cols[i]} of a {arch.K}x{arch.N} bank"))
    limit = np.array([arch.L, arch.M, arch.M, arch.L + arch.M])[s.block]
    for i in np.flatnonzero((s.unit < 0) | (s.unit >= limit))[:20]:
        out.append(Violation("unit", f"op {i} on {names[s.block[i]]} unit {s.unit[i]} out of range"))
    if np.any(s.stage[(s.kind == OpKind.MVM)] < 1) or np.any(s.stage > 2):
        out.append(Violation("stage", "stage outside {1, 2}"))

    # one op at a time on every (block, unit, stage) resource
    order = np.lexsort((s.start, s.stage, s.unit, s.block))
    same = ((s.block[order][1:] == s.block[order][:-1]) & (s.unit[order][1:] == s.unit[order][:-1])
            & (s.stage[order][1:] == s.stage[order][:-1]))
    clash = same & (s.start[order][1:] < end[order][:-1] - tol)
    for j in np.flatnonzero(clash)[:50]:
        a, c = order[j], order[j + 1]
        out.append(Violation(
            "overlap",
            f"{names[s.block[a]]} unit {s.unit[a]} stage {s.stage[a]}: op {a} "
            f"[{s.start[a]:.4f}, {end[a]:.4f}) overlaps op {c} [{s.start[c]:.4f}, {end[c]:.4f}) ns",
        ))

    has_dep = s.dep >= 0
    late = np.flatnonzero(has_dep & (s.start < np.where(has_dep, end[np.maximum(s.dep, 0)], 0) - tol))
    for i in late[:20]:
        out.append(Violation("dependency", f"op {i} starts at {s.start[i]:.4f} before op {s.dep[i]} ends"))

    # layer barriers: a layer may only overlap its predecessor when fused into a pipelined chain
    spans = column_spans(s)
    done = -np.inf
    for li, span in enumerate(spans):
        if span is None:
            continue
        fused = li < len(s.layer_fused) and s.layer_fused[li] and s.opts.pipelined
        if not fused and span[0] < done - tol:
            out.append(Violation("barrier", f"layer {li} starts at {span[0]:.4f} before earlier layers end ({done:.4f})"))
        done = max(done, span[1])

    if s.opts.power_gating:
        dense = [(a, z) for blk, a, z in s.gating if blk == Block.DENSE]
        conv = [(a, z) for blk, a, z in s.gating if blk == Block.CONV]
        for a0, z0 in dense:
            for a1, z1 in conv:
                if a0 < z1 - tol and a1 < z0 - tol:
                    out.append(Violation(
                        "gating", f"dense block [{a0:.4f}, {z0:.4f}) and conv block [{a1:.4f}, {z1:.4f}) both powered"))
        parent = s.parent_block()
        for blk, ivs in ((Block.DENSE, dense), (Block.CONV, conv)):
            idx = np.flatnonzero(parent == blk)
            inside = np.zeros(idx.size, dtype=bool)
            for a, z in ivs:
                inside |= (s.start[idx] >= a - tol) & (end[idx] <= z + tol)
            for i in idx[~inside][:20]:
                out.append(Violation("gating", f"op {i} runs on the {names[blk]} block while it is gated off"))
    return out


def instant_sweep(s: Schedule) -> bool:
    """True when no instant has both the dense and conv blocks powered."""
    events = []
    for blk, a, z in s.gating:
        if z > a:
            events.append((a, 1, blk))
            events.append((z, -1, blk))
    events.sort(key=lambda e: (e[0], e[1]))  # close before open at the same instant
    live = {int(Block.DENSE): 0, int(Block.CONV): 0}
    for _, delta, blk in events:
        live[blk] += delta
        if live[int(Block.DENSE)] > 0 and live[int(Block.CONV)] > 0:
            return False
    return True
