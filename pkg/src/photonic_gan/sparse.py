"""Zero-skipping transposed convolution.

A transposed conv slides its kernel over a zero-inserted, border-padded copy
of the input. Which taps of a given output land on real input pixels depends
only on geometry: the output coordinate modulo the stride fixes the interior
pattern, and outputs near the border lose the taps that fall on padding. All
of that is precomputed here; execution then gathers only the surviving
(input, weight) pairs and writes each result straight into its output slot.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ModelValidationError
from .ir import expanded_size, tconv_output_size
from .kernels import gather_tconv
from .numerics import _batched, _check_conv_args, _common_dtype, tconv_forward_dense


def _check_geometry(k, s, p, i):
    if k < 1 or s < 1 or p < 0 or p > k - 1 or i < 1:
        raise ModelValidationError(f"illegal transposed-conv geometry k={k} s={s} p={p} i={i}")
    if tconv_output_size(i, k, s, p) < 1:
        raise ModelValidationError(f"transposed conv k={k} s={s} p={p} on {i} pixels has no output")


@dataclass(frozen=True)
class ZeroInsertionPlan:
    input_size: int
    kernel: int
    stride: int
    padding: int
    expanded: int
    source: tuple[int, ...]  # per expanded coordinate: input index or -1 for an inserted zero

    @classmethod
    def build(cls, i, k, s, p):
        _check_geometry(k, s, p, i)
        e = expanded_size(i, k, s, p)
        border = k - 1 - p
        src = [-1] * e
        for idx in range(i):
            src[border + idx * s] = idx
        return cls(i, k, s, p, e, tuple(src))

    @property
    def real_positions(self) -> int:
        """Real input pixels per channel on the 2-D expanded grid."""
        return sum(1 for v in self.source if v >= 0) ** 2


@dataclass(frozen=True)
class SparsityPattern:
    phase: tuple[int, int]
    taps: tuple[int, ...]  # flattened u*k + v over the flipped kernel, interior outputs
    n_outputs: int  # outputs of this phase class on the given input size
    border_counts: tuple[int, ...]  # kept taps for each output of the class, row-major

    @property
    def kept_count(self) -> int:
        return len(self.taps)


@dataclass(frozen=True)
class ReducedWorkload:
    lengths: np.ndarray  # (out_h, out_w) reduced dot-product length per output, one channel pair
    reduced_macs: int
    dense_macs: int

    @property
    def ratio(self) -> float:
        return self.reduced_macs / self.dense_macs


@lru_cache(maxsize=4096)
def axis_taps(i: int, k: int, s: int, p: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """For each output coordinate on one axis: the (tap, input index) pairs that survive."""
    _check_geometry(k, s, p, i)
    q = k - 1 - p
    o = tconv_output_size(i, k, s, p)
    result = []
    for y in range(o):
        kept = []
        for u in range(k):
            pos = y + u - q  # coordinate in the un-bordered, zero-inserted grid
            if pos >= 0 and pos % s == 0 and pos // s < i:
                kept.append((u, pos // s))
        result.append(tuple(kept))
    return tuple(result)


def axis_tables(i, k, s, p):
    """Dense array form of :func:`axis_taps` for the gather kernel."""
    taps = axis_taps(i, k, s, p)
    width = max(1, max((len(t) for t in taps), default=1))
    cnt = np.array([len(t) for t in taps], dtype=np.int64)
    tap = np.zeros((len(taps), width), dtype=np.int64)
    idx = np.zeros((len(taps), width), dtype=np.int64)
    for y, kept in enumerate(taps):
        for j, (u, iy) in enumerate(kept):
            tap[y, j] = u
            idx[y, j] = iy
    return cnt, tap, idx


def build_patterns(k: int, s: int, p: int, i: int) -> list[SparsityPattern]:
    """One pattern per output phase class ``(y mod s, x mod s)``, row-major."""
    _check_geometry(k, s, p, i)
    q = k - 1 - p
    o = tconv_output_size(i, k, s, p)
    taps = axis_taps(i, k, s, p)
    patterns = []
    for py in range(s):
        us = [u for u in range(k) if (u + py - q) % s == 0]
        ys = list(range(py, o, s))
        for px in range(s):
            vs = [v for v in range(k) if (v + px - q) % s == 0]
            xs = list(range(px, o, s))
            counts = tuple(len(taps[y]) * len(taps[x]) for y in ys for x in xs)
            patterns.append(SparsityPattern(
                phase=(py, px),
                taps=tuple(u * k + v for u in us for v in vs),
                n_outputs=len(ys) * len(xs),
                border_counts=counts,
            ))
    return patterns


def kept_lengths(k, s, p, ih, iw=None) -> np.ndarray:
    """Reduced dot-product length (taps per channel pair) of every output pixel."""
    iw = ih if iw is None else iw
    ty = np.array([len(t) for t in axis_taps(ih, k, s, p)], dtype=np.int64)
    tx = np.array([len(t) for t in axis_taps(iw, k, s, p)], dtype=np.int64)
    return np.outer(ty, tx)


def output_groups(k, s, p, ih, iw=None):
    """Partition output pixels by their exact surviving-tap set.

    Returns ``[(taps, flat_output_indices), ...]`` in order of first
    appearance; ``taps`` are flattened ``u*k + v`` indices. Pixels in one
    group share a reduced weight vector, which is what lets a weight tile stay
    resident while the group streams through. The index arrays are read-only.
    """
    iw = ih if iw is None else iw
    return _output_groups(k, s, p, ih, iw)


@lru_cache(maxsize=1024)
def _output_groups(k, s, p, ih, iw):
    ay, ax = axis_taps(ih, k, s, p), axis_taps(iw, k, s, p)
    ow = len(ax)
    groups: dict[tuple[int, ...], list[int]] = {}
    for y, ty in enumerate(ay):
        for x, tx in enumerate(ax):
            key = tuple(u * k + v for u, _ in ty for v, _ in tx)
            groups.setdefault(key, []).append(y * ow + x)
    return tuple(_frozen(key, v) for key, v in groups.items())


def _frozen(key, v):
    idx = np.asarray(v, dtype=np.int64)
    idx.setflags(write=False)
    return key, idx


def tconv_forward_sparse(x, w, stride=1, padding=0, bias=None, return_macs=False):
    """Transposed convolution that skips inserted and padding zeros.

    Same signature and result as
    :func:`photonic_gan.numerics.tconv_forward_dense`; exact for integer data.
    """
    w = np.asarray(w)
    xb, squeeze = _batched(x)
    _check_conv_args(xb, w, stride, padding, in_axis=0)
    k = w.shape[2]
    _check_geometry(k, stride, padding, xb.shape[2])
    _check_geometry(k, stride, padding, xb.shape[3])
    dt = _common_dtype(xb, w)
    wf = np.ascontiguousarray(w.astype(dt)[:, :, ::-1, ::-1])
    out, macs = gather_tconv(
        np.ascontiguousarray(xb.astype(dt)), wf, k, stride, padding,
        axis_tables(xb.shape[2], k, stride, padding),
        axis_tables(xb.shape[3], k, stride, padding),
    )
    if bias is not None:
        out = out + np.asarray(bias).astype(out.dtype)[None, :, None, None]
    out = out[0] if squeeze else out
    return (out, macs) if return_macs else out


def savings(k, s, p, i, in_ch=1, out_ch=1) -> ReducedWorkload:
    """MAC accounting for one layer geometry.

    The dense count is read off the instrumented oracle, the reduced count is
    the sum of surviving taps over all outputs.
    """
    _check_geometry(k, s, p, i)
    probe = np.zeros((1, i, i), dtype=np.int64)
    kernel = np.zeros((1, 1, k, k), dtype=np.int64)
    _, dense = tconv_forward_dense(probe, kernel, s, p, return_macs=True)
    lengths = kept_lengths(k, s, p, i)
    scale = in_ch * out_ch
    return ReducedWorkload(lengths, int(lengths.sum()) * scale, int(dense) * scale)
