"""Feature extraction: counting oracles, scalar layout, run configs."""

import numpy as np
import pytest

from abacus.errors import ShapeError
from abacus.features import (SCALAR_FEATURES, FeatureLayout, FeatureVector,
                             Optimizer, RunConfig, count_flops, count_layers,
                             count_params, extract_features)
from abacus.graph import OpType, infer_shapes
from abacus.nsm import build_nsm

from conftest import bn, conv, linear, make_graph, node, pool


# ---------------------------------------------------------------------------
# Independent counting oracles: enumerate tensor elements / MAC groups with
# explicit loops and ndarray sizes instead of re-deriving the closed forms.

def oracle_params(g):
    total = 0
    for n in g.nodes:
        if n.op_type is OpType.CONV2D:
            weights = np.ones((n.attr("out_channels"), n.attr("in_channels"),
                               n.attr("kernel_h"), n.attr("kernel_w")))
            total += weights.size + np.ones(n.attr("out_channels")).size
        elif n.op_type is OpType.LINEAR:
            weights = np.ones((n.attr("features_out"), n.attr("features_in")))
            total += weights.size + np.ones(n.attr("features_out")).size
        elif n.op_type is OpType.BATCHNORM2D:
            total += np.ones((2, n.attr("num_features"))).size
    return total


def oracle_flops(shaped):
    total = 0
    for n in shaped.nodes:
        per_sample = n.output_shape[1:]
        op = n.op_type
        if op is OpType.CONV2D:
            out_c, oh, ow = per_sample
            window = np.ones((n.attr("in_channels"),
                              n.attr("kernel_h"), n.attr("kernel_w"))).size
            for _ in range(out_c):
                for _ in range(oh):
                    total += 2 * window * ow  # one mul + one add per MAC
        elif op is OpType.LINEAR:
            total += 2 * np.ones((n.attr("features_in"),
                                  n.attr("features_out"))).size
        elif op is OpType.BATCHNORM2D:
            total += 4 * np.ones(per_sample).size
        elif op in (OpType.RELU, OpType.ADD):
            total += np.ones(per_sample).size
        elif op in (OpType.MAXPOOL2D, OpType.AVGPOOL2D):
            _, oh, ow = per_sample
            window = n.attr("kernel_h") * n.attr("kernel_w")
            for _ in range(oh):
                total += window * ow * per_sample[0]
    return total


# ---------------------------------------------------------------------------
# count_params

def test_conv_params_spot_value(single_conv):
    assert count_params(single_conv) == 448
    assert oracle_params(single_conv) == 448


def test_relu_only_graph_has_no_params():
    assert count_params(make_graph([node(0, "ReLU")], [])) == 0


def test_linear_params_spot_value():
    g = make_graph([linear(0, 512, 10)], [])
    assert count_params(g) == 5130
    assert oracle_params(g) == 5130


def test_params_match_oracle_on_random_graphs():
    from abacus.netgen import GenSpec, generate_random_network

    for seed in range(30):
        g = generate_random_network(GenSpec(node_count=(5, 30),
                                            channel_range=(8, 64), seed=seed))
        assert count_params(g) == oracle_params(g)


# ---------------------------------------------------------------------------
# count_flops

def test_conv_flops_spot_value(single_conv):
    shaped = infer_shapes(single_conv, batch=1)
    assert count_flops(shaped) == 884_736
    assert oracle_flops(shaped) == 884_736


def test_relu_flops_one_per_element():
    g = make_graph([node(0, "ReLU")], [], input_shape=(16, 32, 32))
    assert count_flops(infer_shapes(g, batch=1)) == 16 * 32 * 32


def test_flops_empty_graph():
    from abacus.graph import ComputationGraph

    g = ComputationGraph(nodes=[], edges=[], input_shape=(3, 32, 32))
    assert count_flops(g) == 0


def test_flops_per_sample_independent_of_batch(single_conv):
    one = count_flops(infer_shapes(single_conv, batch=1))
    many = count_flops(infer_shapes(single_conv, batch=64))
    assert one == many


def test_flops_require_shapes(single_conv):
    with pytest.raises(ShapeError):
        count_flops(single_conv)


def test_flops_match_oracle_on_random_graphs():
    from abacus.netgen import GenSpec, generate_random_network

    for seed in range(20):
        g = generate_random_network(GenSpec(node_count=(5, 25),
                                            channel_range=(8, 48),
                                            input_shape=(3, 16, 16), seed=seed))
        shaped = infer_shapes(g, batch=1)
        assert count_flops(shaped) == oracle_flops(shaped)


# ---------------------------------------------------------------------------
# count_layers

def test_layers_chain():
    g = make_graph([conv(0, 3, 8), bn(1, 8), node(2, "ReLU")],
                   [[0, 1], [1, 2]])
    assert count_layers(g) == 3


def test_layers_single_node():
    assert count_layers(make_graph([node(0, "ReLU")], [])) == 1


def test_layers_seven_node_graph():
    nodes = [conv(0, 3, 16), bn(1, 16), node(2, "ReLU"), pool(3),
             conv(4, 16, 16), bn(5, 16), node(6, "ReLU")]
    g = make_graph(nodes, [[i, i + 1] for i in range(6)])
    assert count_layers(g) == 7


def test_bare_other_not_counted():
    g = make_graph([conv(0, 3, 8), node(1, "Mystery")], [[0, 1]])
    assert count_layers(g) == 1


# ---------------------------------------------------------------------------
# extract_features

def _identity_config(g):
    return RunConfig.for_graph(g, batch_size=1, learning_rate=0.1, epochs=1)


def test_feature_vector_slots(single_conv):
    fv = extract_features(single_conv, _identity_config(single_conv),
                          build_nsm(single_conv))
    names = list(fv.layout.names)
    assert names[:10] == list(SCALAR_FEATURES)
    assert fv.values[names.index("flops")] == 884_736
    assert fv.values[names.index("params")] == 448
    assert len(fv.values) == 10 + 144


def test_batch_only_changes_batch_slot(single_conv):
    m = build_nsm(single_conv)
    a = extract_features(single_conv,
                         RunConfig.for_graph(single_conv, batch_size=16), m)
    b = extract_features(single_conv,
                         RunConfig.for_graph(single_conv, batch_size=128), m)
    (diff,) = np.nonzero(a.values != b.values)
    assert list(a.layout.names[i] for i in diff) == ["batch_size"]


def test_single_node_graph_has_zero_structural_tail():
    g = make_graph([node(0, "ReLU")], [])
    fv = extract_features(g, _identity_config(g), build_nsm(g))
    assert not fv.values[10:].any()


def test_embedding_segment_gets_emb_names():
    g = make_graph([node(0, "ReLU")], [])
    fv = extract_features(g, _identity_config(g), np.zeros(8))
    assert fv.layout.structural == "embedding"
    assert fv.layout.names[10:] == tuple(f"emb_{i}" for i in range(8))


def test_layout_digest_tracks_names():
    a = FeatureLayout.from_feature_names(["x", "y"])
    b = FeatureLayout.from_feature_names(["x", "z"])
    assert a.digest() != b.digest()
    assert a.digest() == FeatureLayout.from_feature_names(["x", "y"]).digest()


def test_feature_vector_validates_length():
    layout = FeatureLayout.from_feature_names(["x", "y"])
    with pytest.raises(ValueError):
        FeatureVector(values=np.zeros(3), layout=layout)


def test_run_config_validates():
    with pytest.raises(ValueError):
        RunConfig(batch_size=0, input_h=32, input_w=32, channels=3,
                  learning_rate=0.1, epochs=1)
    with pytest.raises(ValueError):
        RunConfig(batch_size=1, input_h=32, input_w=32, channels=3,
                  learning_rate=0.1, epochs=1, optimizer="sgd")


def test_optimizer_from_string():
    assert Optimizer.from_string("adam") is Optimizer.ADAM
    assert Optimizer.from_string("SGD") is Optimizer.SGD
    assert Optimizer.from_string("unheard-of") is Optimizer.OTHER
