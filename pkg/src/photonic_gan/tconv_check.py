"""Sparse-versus-dense transposed-conv verification suite.

Two sweeps, both integer so the comparison is bit-exact:

* exhaustive: every legal single-channel geometry with ``i <= 4``,
  ``k <= 3``, ``s in {1, 2, 3}``, fed every binary input of ``i x i`` pixels
  in one batch;
* randomized: multi-channel int8 cases drawn from a seeded generator.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .ir import tconv_output_size
from .numerics import tconv_forward_dense
from .sparse import tconv_forward_sparse


@dataclass(frozen=True)
class CheckRow:
    sweep: str  # "exhaustive" or "random"
    i: int
    k: int
    s: int
    p: int
    in_ch: int
    out_ch: int
    cases: int
    dense_macs: int
    reduced_macs: int
    match: bool


def legal_geometries(max_i=4, max_k=3, strides=(1, 2, 3)):
    for i in range(1, max_i + 1):
        for k in range(1, max_k + 1):
            for s in strides:
                for p in range(k):
                    if tconv_output_size(i, k, s, p) >= 1:
                        yield i, k, s, p


def binary_inputs(i: int) -> np.ndarray:
    """All ``2**(i*i)`` binary ``1 x i x i`` maps as one ``(B, 1, i, i)`` batch."""
    codes = np.arange(2 ** (i * i), dtype=np.int64)
    bits = (codes[:, None] >> np.arange(i * i)) & 1
    return bits.reshape(-1, 1, i, i)


def _compare(x, w, s, p):
    dense, dm = tconv_forward_dense(x, w, s, p, return_macs=True)
    sparse, rm = tconv_forward_sparse(x, w, s, p, return_macs=True)
    return bool(dense.dtype == sparse.dtype and np.array_equal(dense, sparse)), dm, rm


def exhaustive_sweep(seed: int = 0, max_i=4, max_k=3, strides=(1, 2, 3)) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    rows = []
    for i, k, s, p in legal_geometries(max_i, max_k, strides):
        x = binary_inputs(i)
        w = rng.integers(-128, 128, size=(1, 1, k, k), dtype=np.int64)
        ok, dm, rm = _compare(x, w, s, p)
        rows.append(CheckRow("exhaustive", i, k, s, p, 1, 1, x.shape[0], dm, rm, ok))
    return rows


def random_sweep(n_cases: int = 500, seed: int = 0, max_i=8, max_k=5, max_ch=4) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n_cases:
        i = int(rng.integers(1, max_i + 1))
        k = int(rng.integers(1, max_k + 1))
        s = int(rng.integers(1, 4))
        p = int(rng.integers(0, k))
        if tconv_output_size(i, k, s, p) < 1:
            continue
        ci, co = (int(v) for v in rng.integers(1, max_ch + 1, size=2))
        x = rng.integers(-128, 128, size=(ci, i, i), dtype=np.int64)
        w = rng.integers(-128, 128, size=(ci, co, k, k), dtype=np.int64)
        ok, dm, rm = _compare(x, w, s, p)
        rows.append(CheckRow("random", i, k, s, p, ci, co, 1, dm, rm, ok))
    return rows


def rows_to_csv(rows, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep", "i", "k", "s", "p", "in_ch", "out_ch", "cases", "dense_macs", "reduced_macs", "match"])
    for r in rows:
        w.writerow([r.sweep, r.i, r.k, r.s, r.p, r.in_ch, r.out_ch, r.cases, r.dense_macs, r.reduced_macs,
                    int(r.match)])
    return buf.getvalue()
