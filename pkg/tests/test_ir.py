import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphs import random_graph
from photonic_gan.errors import ModelParseError, ModelValidationError, ShapeError
from photonic_gan.ir import (
    Conv2D,
    Dense,
    ModelGraph,
    TensorShape,
    TransposedConv2D,
    bundled_models,
    bundled_models_dir,
    count_macs,
    graph_from_dict,
    load_model,
    param_count,
    save_model,
)
from photonic_gan.numerics import conv_forward, execute, init_params, tconv_forward_dense

# frozen from an independent sum of the weight/bias/norm tensors built by init_params
BUNDLED_PARAMS = {"dcgan_like": 74720, "cgan_like": 576400, "artgan_like": 191904, "cyclegan_like": 55632}
BUNDLED_OUTPUT = {"dcgan_like": (3, 32, 32), "cgan_like": (784, 1, 1), "artgan_like": (3, 32, 32),
                  "cyclegan_like": (3, 16, 16)}


def one(layer, shape):
    return graph_from_dict({"name": "t", "input_shape": list(shape), "layers": [layer]})


def test_minimal_dense_graph(tmp_path):
    path = tmp_path / "m.yaml"
    path.write_text("name: m\ninput_shape: [2]\nlayers:\n- {type: dense, in_features: 2, out_features: 3}\n")
    g = load_model(path)
    assert len(g) == 1
    assert g.output_shape == TensorShape(3)


def test_padding_equal_to_kernel_names_layer():
    doc = {"name": "bad", "input_shape": [1, 5, 5], "layers": [
        {"type": "activation", "kind": "relu"},
        {"type": "conv", "in_ch": 1, "out_ch": 1, "kernel": 3, "padding": 3}]}
    with pytest.raises(ModelValidationError, match="layer 1") as info:
        graph_from_dict(doc)
    assert info.value.layer_index == 1


@pytest.mark.parametrize("layer, shape, out", [
    ({"type": "tconv", "in_ch": 1, "out_ch": 1, "kernel": 3, "stride": 2, "padding": 1}, [1, 2, 2], (1, 3, 3)),
    ({"type": "conv", "in_ch": 1, "out_ch": 1, "kernel": 3, "stride": 1, "padding": 1}, [1, 5, 5], (1, 5, 5)),
    ({"type": "dense", "in_features": 4, "out_features": 7}, [4], (7, 1, 1)),
])
def test_shape_examples(layer, shape, out):
    assert one(layer, shape).output_shape.as_tuple() == out


def test_mac_examples():
    assert count_macs(one({"type": "dense", "in_features": 4, "out_features": 7}, [4])).dense_macs == 28
    conv = one({"type": "conv", "in_ch": 1, "out_ch": 1, "kernel": 3, "padding": 1}, [1, 5, 5])
    assert count_macs(conv).dense_macs == 225
    _, oracle = conv_forward(np.ones((1, 5, 5)), np.ones((1, 1, 3, 3)), 1, 1, return_macs=True)
    assert oracle == 225
    tconv = one({"type": "tconv", "in_ch": 1, "out_ch": 1, "kernel": 3, "stride": 2, "padding": 1}, [1, 2, 2])
    _, oracle = tconv_forward_dense(np.ones((1, 2, 2)), np.ones((1, 1, 3, 3)), 2, 1, return_macs=True)
    assert count_macs(tconv).dense_macs == oracle == 81


def test_shape_mismatch_names_layer():
    doc = {"name": "bad", "input_shape": [4], "layers": [
        {"type": "dense", "in_features": 4, "out_features": 3},
        {"type": "dense", "in_features": 4, "out_features": 3}]}
    with pytest.raises(ShapeError, match="layer 1"):
        graph_from_dict(doc)


def test_residual_must_point_backwards():
    doc = {"name": "bad", "input_shape": [4], "layers": [
        {"type": "dense", "in_features": 4, "out_features": 4}, {"type": "residual_add", "source": 1}]}
    with pytest.raises(ModelValidationError, match="layer 1"):
        graph_from_dict(doc)


@pytest.mark.parametrize("doc", [
    "not a mapping",
    {"name": "x", "input_shape": [2]},
    {"name": "x", "input_shape": [2], "layers": [{"type": "pool"}]},
    {"name": "x", "input_shape": [2], "layers": [{"type": "dense", "in_features": 2}]},
    {"name": "x", "input_shape": [2], "layers": [{"type": "dense", "in_features": 2, "out_features": 1, "x": 1}]},
])
def test_parse_errors(doc):
    with pytest.raises(ModelParseError):
        graph_from_dict(doc)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ModelParseError, match="nope.yaml"):
        load_model(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed\n")
    with pytest.raises(ModelParseError):
        load_model(bad)


def test_exit_codes_are_distinct():
    from photonic_gan.errors import ConstraintError, MappingError
    codes = [e.exit_code for e in (ModelParseError, ModelValidationError, ConstraintError, MappingError)]
    assert len(set(codes)) == len(codes) and 0 not in codes


def independent_param_count(graph):
    total = 0
    for layer, (w, b) in zip(graph.layers, init_params(graph)):
        if w is not None:
            total += w.size + (0 if b is None else b.size)
        if getattr(layer, "follow_norm", None) is not None:
            total += 2 * layer.out_ch
    return total


@pytest.mark.parametrize("name", sorted(BUNDLED_PARAMS))
def test_bundled_models(name):
    g = bundled_models()[name]
    assert param_count(g) == independent_param_count(g) == BUNDLED_PARAMS[name]
    header = (bundled_models_dir() / f"{name}.yaml").read_text()
    assert int(re.search(r"parameters: (\d+)", header).group(1)) == BUNDLED_PARAMS[name]
    outs = execute(g, np.zeros(g.input_shape.as_tuple()), init_params(g))
    for o, s in zip(outs, g.shapes):
        assert o.size == s.size and (s.is_vector or o.shape == s.as_tuple())
    assert g.output_shape.as_tuple() == BUNDLED_OUTPUT[name]


def test_bundled_param_counts_against_torch():
    torch = pytest.importorskip("torch")
    for g in bundled_models().values():
        total = 0
        for layer in g.layers:
            if isinstance(layer, Dense):
                mod = torch.nn.Linear(layer.in_features, layer.out_features, bias=layer.has_bias)
            elif isinstance(layer, (Conv2D, TransposedConv2D)):
                cls = torch.nn.Conv2d if isinstance(layer, Conv2D) else torch.nn.ConvTranspose2d
                mod = cls(layer.in_ch, layer.out_ch, layer.kernel, layer.stride, layer.padding, bias=layer.has_bias)
                if layer.follow_norm is not None:
                    total += 2 * layer.out_ch
            else:
                continue
            total += sum(p.numel() for p in mod.parameters())
        assert total == param_count(g)


def test_round_trip_bundled(tmp_path):
    for g in bundled_models().values():
        path = tmp_path / f"{g.name}.yaml"
        save_model(g, path, header="round trip")
        assert load_model(path) == g


@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(tmp_path_factory, seed):
    g = random_graph(np.random.default_rng(seed))
    path = tmp_path_factory.mktemp("rt") / "g.yaml"
    save_model(g, path)
    assert load_model(path) == g


@given(st.integers(0, 2**32 - 1))
def test_shapes_agree_with_executor(seed):
    g = random_graph(np.random.default_rng(seed))
    outs = execute(g, np.ones(g.input_shape.as_tuple()), init_params(g, seed % 1000))
    for o, s in zip(outs, g.shapes):
        assert o.size == s.size
        if not s.is_vector:
            assert o.shape == s.as_tuple()


@given(st.integers(0, 2**32 - 1))
def test_macs_match_instrumented_oracle(seed):
    g = random_graph(np.random.default_rng(seed))
    per = count_macs(g).per_layer
    params = init_params(g)
    for i, layer in enumerate(g.layers):
        shape = g.input_shape_of(i).as_tuple()
        x = np.ones(shape)
        w = params[i][0]
        if isinstance(layer, Conv2D):
            _, macs = conv_forward(x, w, layer.stride, layer.padding, return_macs=True)
        elif isinstance(layer, TransposedConv2D):
            _, macs = tconv_forward_dense(x, w, layer.stride, layer.padding, return_macs=True)
        elif isinstance(layer, Dense):
            macs = w.size
        else:
            macs = 0
        assert per[i] == macs


def test_graph_is_frozen():
    g = ModelGraph("x", TensorShape(2), [Dense(2, 3)])
    assert isinstance(g.layers, tuple)
    with pytest.raises(ShapeError):
        TensorShape(0)
