"""Reference executor for every layer type; the correctness oracle.

Tensors are plain numpy arrays in ``(channels, height, width)`` order, with an
optional leading batch axis on the conv entry points. Integer inputs are
accumulated in int64, so integer and quantized runs are exact.

Weight layouts follow the common framework convention: dense ``(out, in)``,
conv ``(out_ch, in_ch, k, k)``, transposed conv ``(in_ch, out_ch, k, k)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelValidationError, ShapeError
from .ir import (
    Activation,
    Conv2D,
    Dense,
    ModelGraph,
    NormKind,
    ResidualAdd,
    TransposedConv2D,
    conv_output_size,
    tconv_output_size,
)
from .kernels import correlate2d

QMAX = 127


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int = 0
    bit_width: int = 8


def _common_dtype(*arrays):
    if all(np.issubdtype(a.dtype, np.integer) or a.dtype == bool for a in arrays):
        return np.int64
    return np.float64


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected a (C, H, W) or (B, C, H, W) tensor, got shape {x.shape}")


def _check_conv_args(x, w, stride, padding, in_axis):
    k = w.shape[2]
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"kernel must be 4-D with square taps, got {w.shape}")
    if x.shape[1] != w.shape[in_axis]:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {w.shape[in_axis]}")
    if stride < 1 or padding < 0 or padding > k - 1:
        raise ModelValidationError(f"illegal stride/padding ({stride}, {padding}) for kernel {k}")


def dense_forward(x, w, b=None):
    """``y = W x (+ b)`` on the flattened input."""
    w = np.asarray(w)
    xv = np.asarray(x).reshape(-1)
    if w.ndim != 2 or w.shape[1] != xv.size:
        raise ShapeError(f"weight {w.shape} incompatible with input of {xv.size} elements")
    dt = _common_dtype(xv, w) if b is None else _common_dtype(xv, w, np.asarray(b))
    y = w.astype(dt) @ xv.astype(dt)
    if b is not None:
        b = np.asarray(b)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        y = y + b.astype(dt)
    return y.reshape(-1, 1, 1)


def conv_forward(x, w, stride=1, padding=0, bias=None, return_macs=False):
    w = np.asarray(w)
    xb, squeeze = _batched(x)
    _check_conv_args(xb, w, stride, padding, in_axis=1)
    k = w.shape[2]
    oh = conv_output_size(xb.shape[2], k, stride, padding)
    ow = conv_output_size(xb.shape[3], k, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv of {xb.shape[2:]} with kernel {k} yields empty output")
    dt = _common_dtype(xb, w)
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    xp = np.ascontiguousarray(np.pad(xb.astype(dt), pad))
    out, macs = correlate2d(xp, np.ascontiguousarray(w.astype(dt)), stride, oh, ow)
    if bias is not None:
        out = out + np.asarray(bias).astype(out.dtype)[None, :, None, None]
    out = out[0] if squeeze else out
    return (out, macs) if return_macs else out


def zero_insert(x, stride, border):
    """Spread ``x`` onto a grid with ``stride - 1`` zeros between pixels and ``border`` zeros around."""
    nb, nc, ih, iw = x.shape
    eh = (ih - 1) * stride + 1 + 2 * border
    ew = (iw - 1) * stride + 1 + 2 * border
    expanded = np.zeros((nb, nc, eh, ew), dtype=x.dtype)
    expanded[:, :, border:eh - border:stride, border:ew - border:stride] = x
    return expanded


def tconv_forward_dense(x, w, stride=1, padding=0, bias=None, return_macs=False):
    """Transposed convolution by explicit zero insertion then ordinary convolution.

    This path materializes the expanded map and multiplies every tap, zeros
    included; it exists to check :func:`photonic_gan.sparse.tconv_forward_sparse`.
    """
    w = np.asarray(w)
    xb, squeeze = _batched(x)
    _check_conv_args(xb, w, stride, padding, in_axis=0)
    k = w.shape[2]
    dt = _common_dtype(xb, w)
    expanded = zero_insert(xb.astype(dt), stride, k - 1 - padding)
    # correlating with the flipped, channel-swapped kernel is the scatter definition
    wc = np.ascontiguousarray(w.astype(dt).transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    oh = tconv_output_size(xb.shape[2], k, stride, padding)
    ow = tconv_output_size(xb.shape[3], k, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"transposed conv of {xb.shape[2:]} with kernel {k} yields empty output")
    out, macs = correlate2d(np.ascontiguousarray(expanded), wc, 1, oh, ow)
    if bias is not None:
        out = out + np.asarray(bias).astype(out.dtype)[None, :, None, None]
    out = out[0] if squeeze else out
    return (out, macs) if return_macs else out


def norm_forward(x, kind, gamma=None, beta=None, eps=1e-5, mean=None, var=None):
    """Batch norm with stored statistics, or instance norm with live ones."""
    if not eps > 0:
        raise ModelValidationError(f"norm epsilon must be > 0, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    c = x.shape[0]
    gamma = np.ones(c) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = np.zeros(c) if beta is None else np.asarray(beta, dtype=np.float64)
    if kind == "instance":
        mu = x.mean(axis=(1, 2))
        sigma2 = x.var(axis=(1, 2))
    elif kind == "batch":
        mu = np.zeros(c) if mean is None else np.asarray(mean, dtype=np.float64)
        sigma2 = np.ones(c) if var is None else np.asarray(var, dtype=np.float64)
    else:
        raise ModelValidationError(f"unknown norm kind {kind!r}")
    scale = gamma / np.sqrt(sigma2 + eps)
    return (x - mu[:, None, None]) * scale[:, None, None] + beta[:, None, None]


def apply_norm(x, norm: NormKind):
    return norm_forward(x, norm.kind, norm.gamma, norm.beta, norm.epsilon, norm.mean, norm.var)


def activation_forward(x, kind, slope=None):
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        a = 0.2 if slope is None else slope
        if not 0 < a < 1:
            raise ModelValidationError(f"leaky_relu slope must be in (0, 1), got {a}")
        return np.where(x > 0, x, a * x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    raise ModelValidationError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# int8 quantization


def quantize(x):
    """Symmetric per-tensor int8: ``scale = max|x| / 127``, round half to even."""
    x = np.asarray(x, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    scale = peak / QMAX if peak > 0 else 1.0
    q = np.clip(np.rint(x / scale), -QMAX, QMAX).astype(np.int8)
    return q, QuantParams(scale)


def dequantize(q, params: QuantParams):
    return np.asarray(q, dtype=np.float64) * params.scale


def _layer_forward(layer, x, w, b, tconv_fn):
    if isinstance(layer, Dense):
        return dense_forward(x, w, b)
    if isinstance(layer, Conv2D):
        return conv_forward(x, w, layer.stride, layer.padding, b)
    return tconv_fn(x, w, layer.stride, layer.padding, b)


def quantized_forward(layer, x, w, tconv_fn=tconv_forward_dense):
    """Run a dense/conv/tconv layer on int8 operands with integer MACs.

    Returns ``(y, bound)``: the dequantized output and the worst-case
    elementwise deviation from the float computation.
    """
    qx, px = quantize(x)
    qw, pw = quantize(w)
    acc = _layer_forward(layer, qx.astype(np.int64), qw.astype(np.int64), None, tconv_fn)
    y = acc.astype(np.float64) * (px.scale * pw.scale)
    return y, quantization_error_bound(layer, x, w, px, pw)


def taps_per_output(layer) -> int:
    if isinstance(layer, Dense):
        return layer.in_features
    return layer.kernel ** 2 * layer.in_ch


def quantization_error_bound(layer, x, w, px: QuantParams, pw: QuantParams) -> float:
    """Largest possible ``|y_int8 - y_float|`` over one output element.

    Each product ``(x + dx)(w + dw) - xw = x dw + w dx + dx dw`` with
    ``|dx| <= sx/2`` and ``|dw| <= sw/2``, summed over at most ``taps`` terms.
    A small relative term covers float rounding in the reference itself.
    """
    taps = taps_per_output(layer)
    xmax = float(np.max(np.abs(x))) if np.size(x) else 0.0
    wmax = float(np.max(np.abs(w))) if np.size(w) else 0.0
    sx, sw = px.scale, pw.scale
    bound = taps * (xmax * sw / 2 + wmax * sx / 2 + sx * sw / 4)
    return bound + 1e-12 * taps * (xmax + sx) * (wmax + sw)


# ---------------------------------------------------------------------------
# whole-graph execution


def init_params(graph: ModelGraph, seed: int = 0):
    """Deterministic random weights for every compute layer (graphs carry no weights)."""
    rng = np.random.default_rng(seed)
    params = []
    for layer in graph.layers:
        if isinstance(layer, Dense):
            w = rng.normal(0, 1 / np.sqrt(layer.in_features), (layer.out_features, layer.in_features))
            b = rng.normal(0, 0.1, layer.out_features) if layer.has_bias else None
        elif isinstance(layer, (Conv2D, TransposedConv2D)):
            fan_in = layer.kernel ** 2 * layer.in_ch
            shape = (layer.out_ch, layer.in_ch) if isinstance(layer, Conv2D) else (layer.in_ch, layer.out_ch)
            w = rng.normal(0, 1 / np.sqrt(fan_in), shape + (layer.kernel, layer.kernel))
            b = rng.normal(0, 0.1, layer.out_ch) if layer.has_bias else None
        else:
            w = b = None
        params.append((w, b))
    return params


def execute(graph: ModelGraph, x, params, tconv_fn=tconv_forward_dense):
    """Run the graph on one input; returns the output of every layer."""
    x = np.asarray(x, dtype=np.float64).reshape(graph.input_shape.as_tuple())
    outputs = []
    for layer, (w, b) in zip(graph.layers, params):
        if isinstance(layer, (Dense, Conv2D, TransposedConv2D)):
            x = _layer_forward(layer, x, w, b, tconv_fn)
            if getattr(layer, "follow_norm", None) is not None:
                x = apply_norm(x, layer.follow_norm)
        elif isinstance(layer, Activation):
            x = activation_forward(x, layer.kind, layer.slope)
        elif isinstance(layer, ResidualAdd):
            x = x + outputs[layer.source_layer_index]
        outputs.append(np.asarray(x, dtype=np.float64))
    return outputs
