"""Numeric inner loops: direct 2-D correlation and the gathered transposed conv.

Every kernel exists twice: an ``@njit`` loop nest and a vectorized numpy
version. Both count the multiplies they actually perform, so the returned MAC
totals are instrumented rather than derived from a formula. Arrays are always
4-D ``(batch, channels, height, width)`` here; callers add the batch axis.
"""
import numpy as np

from . import _jit
from ._jit import njit


@njit
def _correlate_jit(xp, w, stride, oh, ow):
    nb, nc = xp.shape[0], xp.shape[1]
    no, k = w.shape[0], w.shape[2]
    out = np.zeros((nb, no, oh, ow), dtype=xp.dtype)
    macs = 0
    for b in range(nb):
        for o in range(no):
            for y in range(oh):
                for x in range(ow):
                    acc = out[b, o, y, x]
                    y0 = y * stride
                    x0 = x * stride
                    for c in range(nc):
                        for u in range(k):
                            for v in range(k):
                                acc += xp[b, c, y0 + u, x0 + v] * w[o, c, u, v]
                                macs += 1
                    out[b, o, y, x] = acc
    return out, macs


def _correlate_numpy(xp, w, stride, oh, ow):
    nb = xp.shape[0]
    no, nc, k = w.shape[0], w.shape[1], w.shape[2]
    out = np.zeros((nb, no, oh, ow), dtype=xp.dtype)
    macs = 0
    for u in range(k):
        for v in range(k):
            patch = xp[:, :, u:u + stride * (oh - 1) + 1:stride, v:v + stride * (ow - 1) + 1:stride]
            out += np.einsum("oc,bchw->bohw", w[:, :, u, v], patch)
            macs += nb * no * nc * oh * ow
    return out, macs


def correlate2d(xp, w, stride, oh, ow):
    """Valid cross-correlation of a pre-padded batch ``xp`` with ``w[o, c, u, v]``."""
    if _jit.USE_NUMBA:
        out, macs = _correlate_jit(xp, w, stride, oh, ow)
        return out, int(macs)
    return _correlate_numpy(xp, w, stride, oh, ow)


@njit
def _gather_tconv_jit(x, wf, cnt_y, tap_y, idx_y, cnt_x, tap_x, idx_x):
    nb, nc = x.shape[0], x.shape[1]
    no = wf.shape[1]
    oh, ow = cnt_y.shape[0], cnt_x.shape[0]
    out = np.zeros((nb, no, oh, ow), dtype=x.dtype)
    macs = 0
    for b in range(nb):
        for o in range(no):
            for y in range(oh):
                for xx in range(ow):
                    acc = out[b, o, y, xx]
                    for t in range(cnt_y[y]):
                        u = tap_y[y, t]
                        iy = idx_y[y, t]
                        for t2 in range(cnt_x[xx]):
                            v = tap_x[xx, t2]
                            ix = idx_x[xx, t2]
                            for c in range(nc):
                                acc += x[b, c, iy, ix] * wf[c, o, u, v]
                                macs += 1
                    out[b, o, y, xx] = acc
    return out, macs


def _tap_ranges(k, s, q, i, o):
    """For each correlation tap ``u``: (first output, first input, count) on one axis."""
    ranges = []
    for u in range(k):
        # output y reads input iy where y = q - u + s*iy
        iy_lo = max(0, -((q - u) // s)) if q - u < 0 else 0
        iy_hi = min(i, (o - 1 - (q - u)) // s + 1) if o - 1 - (q - u) >= 0 else 0
        n = iy_hi - iy_lo
        ranges.append((q - u + s * iy_lo, iy_lo, max(n, 0)))
    return ranges


def _gather_tconv_numpy(x, wf, k, s, p, oh, ow):
    nb, nc, ih, iw = x.shape
    no = wf.shape[1]
    q = k - 1 - p
    out = np.zeros((nb, no, oh, ow), dtype=x.dtype)
    macs = 0
    rows, cols = _tap_ranges(k, s, q, ih, oh), _tap_ranges(k, s, q, iw, ow)
    for u, (y0, iy0, ny) in enumerate(rows):
        if ny == 0:
            continue
        for v, (x0, ix0, nx) in enumerate(cols):
            if nx == 0:
                continue
            src = x[:, :, iy0:iy0 + ny, ix0:ix0 + nx]
            dst = (slice(None), slice(None), slice(y0, y0 + s * (ny - 1) + 1, s), slice(x0, x0 + s * (nx - 1) + 1, s))
            out[dst] += np.einsum("co,bchw->bohw", wf[:, :, u, v], src)
            macs += nb * no * nc * ny * nx
    return out, macs


def gather_tconv(x, wf, k, s, p, axis_y, axis_x):
    """Transposed conv touching only taps that land on real input pixels.

    ``wf`` is the spatially flipped kernel in ``(in, out, k, k)`` layout;
    ``axis_y``/``axis_x`` are the per-axis (count, tap, index) tables.
    """
    oh, ow = axis_y[0].shape[0], axis_x[0].shape[0]
    if _jit.USE_NUMBA:
        out, macs = _gather_tconv_jit(x, wf, *axis_y, *axis_x)
        return out, int(macs)
    return _gather_tconv_numpy(x, wf, k, s, p, oh, ow)


# ---------------------------------------------------------------------------
# schedule timing
#
# Tiles of one layer are dealt round-robin to ``n_units`` units. A unit runs
# its tiles in issue order; stage 2 of a tile follows its own stage 1. When
# ``pipelined`` is set, stage 1 of the next tile may start as soon as the
# previous stage 1 is done, otherwise it waits for the previous stage 2.


@njit
def _mvm_timing_jit(n_units, t0, d1, d2, pipelined):
    n = d1.shape[0]
    s1 = np.empty(n)
    s2 = np.empty(n)
    free1 = np.full(n_units, t0)
    free2 = np.full(n_units, t0)
    for t in range(n):
        u = t % n_units
        start = free1[u]
        if not pipelined and free2[u] > start:
            start = free2[u]
        s1[t] = start
        end1 = start + d1[t]
        free1[u] = end1
        st2 = end1 if end1 > free2[u] else free2[u]
        s2[t] = st2
        free2[u] = st2 + d2
    return s1, s2


def _mvm_timing_numpy(n_units, t0, d1, d2, pipelined):
    n = d1.shape[0]
    s1 = np.empty(n)
    s2 = np.empty(n)
    for u in range(min(n_units, n)):
        idx = np.arange(u, n, n_units)
        du = d1[idx]
        j = np.arange(idx.size, dtype=np.float64)
        if pipelined:
            end1 = t0 + np.cumsum(du)
            # end2[j] = max(end1[j], end2[j-1]) + d2, unrolled as a running max
            end2 = np.maximum.accumulate(end1 - j * d2) + (j + 1) * d2
            s1[idx] = end1 - du
            s2[idx] = end2 - d2
        else:
            start = t0 + np.concatenate(([0.0], np.cumsum(du + d2)[:-1]))
            s1[idx] = start
            s2[idx] = start + du
    return s1, s2


def mvm_timing(n_units, t0, d1, d2, pipelined):
    """Stage-1 and stage-2 start times for every tile of a layer."""
    d1 = np.ascontiguousarray(d1, dtype=np.float64)
    if _jit.USE_NUMBA:
        return _mvm_timing_jit(n_units, float(t0), d1, float(d2), bool(pipelined))
    return _mvm_timing_numpy(n_units, float(t0), d1, float(d2), bool(pipelined))


@njit
def _queue_timing_jit(ready, unit, n_units, dur, t0):
    n = ready.shape[0]
    start = np.empty(n)
    free = np.full(n_units, t0)
    for g in range(n):
        u = unit[g]
        s = ready[g] if ready[g] > free[u] else free[u]
        start[g] = s
        free[u] = s + dur
    return start


def _queue_timing_numpy(ready, unit, n_units, dur, t0):
    start = np.empty(ready.shape[0])
    order = np.argsort(unit, kind="stable")
    bounds = np.searchsorted(unit[order], np.arange(n_units + 1))
    for u in range(n_units):
        idx = order[bounds[u]:bounds[u + 1]]
        if idx.size == 0:
            continue
        r = np.maximum(ready[idx], t0)
        j = np.arange(idx.size, dtype=np.float64)
        end = np.maximum.accumulate(r - j * dur) + (j + 1) * dur
        start[idx] = end - dur
    return start


def queue_timing(ready, unit, n_units, dur, t0=0.0):
    """Start times for fixed-duration ops served in index order by their unit."""
    ready = np.ascontiguousarray(ready, dtype=np.float64)
    unit = np.ascontiguousarray(unit, dtype=np.int64)
    if _jit.USE_NUMBA:
        return _queue_timing_jit(ready, unit, int(n_units), float(dur), float(t0))
    return _queue_timing_numpy(ready, unit, int(n_units), float(dur), float(t0))


@njit
def _group_ready_jit(group, end, n_groups):
    ready = np.full(n_groups, -np.inf)
    last = np.full(n_groups, -1)
    for t in range(group.shape[0]):
        g = group[t]
        if end[t] >= ready[g]:
            ready[g] = end[t]
            last[g] = t
    return ready, last


def _group_ready_numpy(group, end, n_groups):
    ready = np.full(n_groups, -np.inf)
    last = np.full(n_groups, -1, dtype=np.int64)
    if group.size:
        order = np.lexsort((np.arange(group.size), end, group))
        tail = np.flatnonzero(np.r_[group[order][1:] != group[order][:-1], True])
        last[group[order[tail]]] = order[tail]
        ready[group[order[tail]]] = end[order[tail]]
    return ready, last


def group_ready(group, end, n_groups):
    """Latest end time per group and the op that reaches it (later op wins ties); -1 if empty."""
    group = np.ascontiguousarray(group, dtype=np.int64)
    end = np.ascontiguousarray(end, dtype=np.float64)
    if _jit.USE_NUMBA:
        return _group_ready_jit(group, end, int(n_groups))
    return _group_ready_numpy(group, end, int(n_groups))
