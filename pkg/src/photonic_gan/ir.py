"""GAN layer-graph representation, shape inference and model-file I/O.

A :class:`ModelGraph` is a linear chain of layers. Skip connections are
expressed with :class:`ResidualAdd`, which names an earlier layer whose output
is added to the running tensor. Vectors are ``TensorShape(c, 1, 1)``; a
:class:`Dense` layer flattens whatever it receives.

Model files are YAML documents with ``name``, ``input_shape`` and
``layers``; see ``docs/model_format.md`` for the schema.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import yaml

from .errors import ModelParseError, ModelValidationError, ShapeError

DEFAULT_EPSILON = 1e-5

ACTIVATION_KINDS = ("relu", "leaky_relu", "tanh", "sigmoid")
NORM_KINDS = ("batch", "instance")


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int = 1
    width: int = 1

    def __post_init__(self):
        for dim in (self.channels, self.height, self.width):
            if int(dim) != dim or dim < 1:
                raise ShapeError(f"tensor dimensions must be positive integers, got {self.as_tuple()}")

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width

    @property
    def is_vector(self) -> bool:
        return self.height == 1 and self.width == 1

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def __str__(self):
        return "x".join(str(d) for d in self.as_tuple())


@dataclass(frozen=True)
class NormKind:
    """Normalization fused after a convolution.

    ``mean``/``var``/``gamma``/``beta`` are optional per-channel constants.
    Batch norm uses the stored ``mean``/``var`` (defaults 0 and 1); instance
    norm ignores them and measures statistics on the live tensor.
    """

    kind: str
    epsilon: float = DEFAULT_EPSILON
    mean: tuple[float, ...] | None = None
    var: tuple[float, ...] | None = None
    gamma: tuple[float, ...] | None = None
    beta: tuple[float, ...] | None = None

    def validate(self, channels: int, index: int | None = None) -> None:
        if self.kind not in NORM_KINDS:
            raise ModelValidationError(f"unknown norm kind {self.kind!r}", index)
        if not self.epsilon > 0:
            raise ModelValidationError(f"norm epsilon must be > 0, got {self.epsilon}", index)
        for name in ("mean", "var", "gamma", "beta"):
            vals = getattr(self, name)
            if vals is not None and len(vals) != channels:
                raise ModelValidationError(
                    f"norm {name} has {len(vals)} entries for {channels} channels", index
                )
        if self.var is not None and min(self.var) < 0:
            raise ModelValidationError("norm var must be non-negative", index)


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int
    has_bias: bool = True

    @property
    def type_name(self) -> str:
        return "dense"


@dataclass(frozen=True)
class Conv2D:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    follow_norm: NormKind | None = None
    has_bias: bool = False

    @property
    def type_name(self) -> str:
        return "conv"


@dataclass(frozen=True)
class TransposedConv2D:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    follow_norm: NormKind | None = None
    has_bias: bool = False

    @property
    def type_name(self) -> str:
        return "tconv"


@dataclass(frozen=True)
class Activation:
    kind: str
    slope: float | None = None

    def __post_init__(self):
        if self.kind == "leaky_relu" and self.slope is None:
            object.__setattr__(self, "slope", 0.2)

    @property
    def type_name(self) -> str:
        return "activation"


@dataclass(frozen=True)
class ResidualAdd:
    source_layer_index: int

    @property
    def type_name(self) -> str:
        return "residual_add"


LayerSpec = Union[Dense, Conv2D, TransposedConv2D, Activation, ResidualAdd]
ConvLike = (Conv2D, TransposedConv2D)
COMPUTE_LAYERS = (Dense, Conv2D, TransposedConv2D)


@dataclass(frozen=True)
class ModelGraph:
    name: str
    input_shape: TensorShape
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @cached_property
    def shapes(self) -> list[TensorShape]:
        return infer_shapes(self)

    @property
    def output_shape(self) -> TensorShape:
        return self.shapes[-1] if self.layers else self.input_shape

    def input_shape_of(self, index: int) -> TensorShape:
        return self.input_shape if index == 0 else self.shapes[index - 1]

    def __len__(self):
        return len(self.layers)


@dataclass(frozen=True)
class MacCount:
    dense_macs: int
    per_layer: tuple[int, ...]


def _check_positive(value, what, index):
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ModelValidationError(f"{what} must be an integer >= 1, got {value!r}", index)


def validate_layer(layer, index: int) -> None:
    """Hyperparameter checks that do not need shapes."""
    if isinstance(layer, Dense):
        _check_positive(layer.in_features, "in_features", index)
        _check_positive(layer.out_features, "out_features", index)
    elif isinstance(layer, ConvLike):
        _check_positive(layer.in_ch, "in_ch", index)
        _check_positive(layer.out_ch, "out_ch", index)
        _check_positive(layer.kernel, "kernel", index)
        _check_positive(layer.stride, "stride", index)
        if int(layer.padding) != layer.padding or layer.padding < 0:
            raise ModelValidationError(f"padding must be >= 0, got {layer.padding!r}", index)
        if layer.padding > layer.kernel - 1:
            raise ModelValidationError(
                f"padding {layer.padding} exceeds kernel-1 = {layer.kernel - 1}", index
            )
        if layer.follow_norm is not None:
            layer.follow_norm.validate(layer.out_ch, index)
    elif isinstance(layer, Activation):
        if layer.kind not in ACTIVATION_KINDS:
            raise ModelValidationError(f"unknown activation {layer.kind!r}", index)
        if layer.kind == "leaky_relu" and not 0 < layer.slope < 1:
            raise ModelValidationError(f"leaky_relu slope must be in (0, 1), got {layer.slope}", index)
    elif isinstance(layer, ResidualAdd):
        src = layer.source_layer_index
        if isinstance(src, bool) or int(src) != src or not 0 <= src < index:
            raise ModelValidationError(
                f"residual source {src!r} must name an earlier layer (< {index})", index
            )
    else:
        raise ModelValidationError(f"unsupported layer type {type(layer).__name__}", index)


def conv_output_size(i: int, k: int, s: int, p: int) -> int:
    return (i + 2 * p - k) // s + 1


def tconv_output_size(i: int, k: int, s: int, p: int) -> int:
    return (i - 1) * s - 2 * p + k


def expanded_size(i: int, k: int, s: int, p: int) -> int:
    """Side of the zero-inserted, border-padded map a transposed conv slides over."""
    return i + (i - 1) * (s - 1) + 2 * (k - p - 1)


def layer_output_shape(layer, in_shape: TensorShape, index: int, history=()) -> TensorShape:
    if isinstance(layer, Dense):
        if in_shape.size != layer.in_features:
            raise ShapeError(
                f"dense expects {layer.in_features} inputs, got {in_shape} ({in_shape.size})", index
            )
        return TensorShape(layer.out_features)
    if isinstance(layer, ConvLike):
        if in_shape.channels != layer.in_ch:
            raise ShapeError(f"expects {layer.in_ch} input channels, got {in_shape.channels}", index)
        size = conv_output_size if isinstance(layer, Conv2D) else tconv_output_size
        oh = size(in_shape.height, layer.kernel, layer.stride, layer.padding)
        ow = size(in_shape.width, layer.kernel, layer.stride, layer.padding)
        if oh < 1 or ow < 1:
            raise ShapeError(f"{layer.type_name} on {in_shape} yields empty output", index)
        return TensorShape(layer.out_ch, oh, ow)
    if isinstance(layer, Activation):
        return in_shape
    if isinstance(layer, ResidualAdd):
        src_shape = history[layer.source_layer_index]
        if src_shape != in_shape:
            raise ShapeError(
                f"residual source layer {layer.source_layer_index} has shape {src_shape}, "
                f"running tensor is {in_shape}",
                index,
            )
        return in_shape
    raise ModelValidationError(f"unsupported layer type {type(layer).__name__}", index)


def infer_shapes(graph: ModelGraph) -> list[TensorShape]:
    """Output shape of every layer, in order."""
    shapes: list[TensorShape] = []
    current = graph.input_shape
    for index, layer in enumerate(graph.layers):
        validate_layer(layer, index)
        current = layer_output_shape(layer, current, index, shapes)
        shapes.append(current)
    return shapes


def layer_macs(layer, in_shape: TensorShape, out_shape: TensorShape) -> int:
    if isinstance(layer, Dense):
        return layer.in_features * layer.out_features
    if isinstance(layer, ConvLike):
        # transposed convs are counted over the zero-inserted map, so every
        # output pixel pays the full k*k*in_ch taps
        return out_shape.height * out_shape.width * layer.kernel ** 2 * layer.in_ch * layer.out_ch
    return 0


def count_macs(graph: ModelGraph) -> MacCount:
    per_layer = tuple(
        layer_macs(layer, graph.input_shape_of(i), graph.shapes[i]) for i, layer in enumerate(graph.layers)
    )
    return MacCount(sum(per_layer), per_layer)


def weight_count(layer) -> int:
    """Multiplicative weights only (what the MR weight banks hold)."""
    if isinstance(layer, Dense):
        return layer.in_features * layer.out_features
    if isinstance(layer, ConvLike):
        return layer.kernel ** 2 * layer.in_ch * layer.out_ch
    return 0


def param_count(graph: ModelGraph) -> int:
    """Trainable parameters: weights, biases and norm scale/shift."""
    total = 0
    for layer in graph.layers:
        total += weight_count(layer)
        if isinstance(layer, Dense) and layer.has_bias:
            total += layer.out_features
        if isinstance(layer, ConvLike):
            if layer.has_bias:
                total += layer.out_ch
            if layer.follow_norm is not None:
                total += 2 * layer.out_ch
    return total


def validate_graph(graph: ModelGraph) -> ModelGraph:
    if not graph.layers:
        raise ModelValidationError("model has no layers")
    graph.shapes  # runs inference, raising on the first bad layer
    return graph


# ---------------------------------------------------------------------------
# file I/O


def _norm_from_dict(raw, default_eps, index):
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ModelParseError(f"layer {index}: norm must be a mapping with a 'kind'")
    unknown = set(raw) - {"kind", "epsilon", "mean", "var", "gamma", "beta"}
    if unknown:
        raise ModelParseError(f"layer {index}: unknown norm fields {sorted(unknown)}")
    vec = {k: tuple(float(v) for v in raw[k]) for k in ("mean", "var", "gamma", "beta") if raw.get(k) is not None}
    return NormKind(kind=str(raw["kind"]), epsilon=float(raw.get("epsilon", default_eps)), **vec)


_LAYER_FIELDS = {
    "dense": ({"in_features", "out_features"}, {"bias"}),
    "conv": ({"in_ch", "out_ch", "kernel"}, {"stride", "padding", "norm", "bias"}),
    "tconv": ({"in_ch", "out_ch", "kernel"}, {"stride", "padding", "norm", "bias"}),
    "activation": ({"kind"}, {"slope"}),
    "residual_add": ({"source"}, set()),
}


def _layer_from_dict(raw, index, default_eps):
    if not isinstance(raw, dict) or "type" not in raw:
        raise ModelParseError(f"layer {index}: expected a mapping with a 'type' field")
    kind = raw["type"]
    if kind not in _LAYER_FIELDS:
        raise ModelParseError(f"layer {index}: unknown layer type {kind!r}")
    required, optional = _LAYER_FIELDS[kind]
    present = set(raw) - {"type"}
    if missing := required - present:
        raise ModelParseError(f"layer {index}: missing fields {sorted(missing)}")
    if unknown := present - required - optional:
        raise ModelParseError(f"layer {index}: unknown fields {sorted(unknown)}")
    try:
        if kind == "dense":
            return Dense(int(raw["in_features"]), int(raw["out_features"]), bool(raw.get("bias", True)))
        if kind in ("conv", "tconv"):
            cls = Conv2D if kind == "conv" else TransposedConv2D
            return cls(
                in_ch=int(raw["in_ch"]),
                out_ch=int(raw["out_ch"]),
                kernel=int(raw["kernel"]),
                stride=int(raw.get("stride", 1)),
                padding=int(raw.get("padding", 0)),
                follow_norm=_norm_from_dict(raw.get("norm"), default_eps, index),
                has_bias=bool(raw.get("bias", False)),
            )
        if kind == "activation":
            slope = raw.get("slope")
            return Activation(str(raw["kind"]), None if slope is None else float(slope))
        return ResidualAdd(int(raw["source"]))
    except (TypeError, ValueError) as exc:
        raise ModelParseError(f"layer {index}: {exc}") from exc


def graph_from_dict(doc) -> ModelGraph:
    if not isinstance(doc, dict):
        raise ModelParseError("model document must be a mapping")
    for key in ("name", "input_shape", "layers"):
        if key not in doc:
            raise ModelParseError(f"model document lacks '{key}'")
    shape = doc["input_shape"]
    if isinstance(shape, int):
        shape = [shape]
    if not isinstance(shape, (list, tuple)) or not 1 <= len(shape) <= 3:
        raise ModelParseError("input_shape must be [channels] or [channels, height, width]")
    try:
        input_shape = TensorShape(*(int(d) for d in shape))
    except (TypeError, ValueError) as exc:
        raise ModelParseError(f"input_shape: {exc}") from exc
    if not isinstance(doc["layers"], list):
        raise ModelParseError("'layers' must be a list")
    eps = float(doc.get("norm_epsilon", DEFAULT_EPSILON))
    layers = tuple(_layer_from_dict(raw, i, eps) for i, raw in enumerate(doc["layers"]))
    return validate_graph(ModelGraph(str(doc["name"]), input_shape, layers))


def _norm_to_dict(norm: NormKind):
    out = {"kind": norm.kind, "epsilon": norm.epsilon}
    for key in ("mean", "var", "gamma", "beta"):
        if getattr(norm, key) is not None:
            out[key] = list(getattr(norm, key))
    return out


def layer_to_dict(layer) -> dict:
    if isinstance(layer, Dense):
        return {"type": "dense", "in_features": layer.in_features,
                "out_features": layer.out_features, "bias": layer.has_bias}
    if isinstance(layer, ConvLike):
        out = {"type": layer.type_name, "in_ch": layer.in_ch, "out_ch": layer.out_ch,
               "kernel": layer.kernel, "stride": layer.stride, "padding": layer.padding}
        if layer.follow_norm is not None:
            out["norm"] = _norm_to_dict(layer.follow_norm)
        if layer.has_bias:
            out["bias"] = True
        return out
    if isinstance(layer, Activation):
        out = {"type": "activation", "kind": layer.kind}
        if layer.slope is not None:
            out["slope"] = layer.slope
        return out
    return {"type": "residual_add", "source": layer.source_layer_index}


def graph_to_dict(graph: ModelGraph) -> dict:
    return {
        "name": graph.name,
        "input_shape": list(graph.input_shape.as_tuple()),
        "layers": [layer_to_dict(layer) for layer in graph.layers],
    }


def load_model(path) -> ModelGraph:
    """Parse and validate a YAML model file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelParseError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelParseError(f"{path}: malformed YAML: {exc}") from exc
    return graph_from_dict(doc)


def save_model(graph: ModelGraph, path, header: str | None = None) -> None:
    body = yaml.safe_dump(graph_to_dict(graph), sort_keys=False, default_flow_style=None)
    if header:
        body = "".join(f"# {line}\n" if line else "#\n" for line in header.splitlines()) + body
    Path(path).write_text(body)


def bundled_models_dir() -> Path:
    return Path(__file__).parent / "models"


def bundled_models() -> dict[str, ModelGraph]:
    return {p.stem: load_model(p) for p in sorted(bundled_models_dir().glob("*.yaml"))}
