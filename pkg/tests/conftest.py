"""Shared graph-building helpers for the test suite."""

import pytest

from abacus.graph import graph_from_dict


def conv(nid, in_c, out_c, k=3, s=1, p=1):
    return {"id": nid, "op": "Conv2D",
            "attrs": {"kernel_h": k, "kernel_w": k, "stride": s, "padding": p,
                      "in_channels": in_c, "out_channels": out_c}}


def pool(nid, op="MaxPool2D", k=2, s=2, p=0):
    return {"id": nid, "op": op,
            "attrs": {"kernel_h": k, "kernel_w": k, "stride": s, "padding": p}}


def bn(nid, features):
    return {"id": nid, "op": "BatchNorm2D", "attrs": {"num_features": features}}


def linear(nid, f_in, f_out):
    return {"id": nid, "op": "Linear",
            "attrs": {"features_in": f_in, "features_out": f_out}}


def node(nid, op, **attrs):
    return {"id": nid, "op": op, "attrs": attrs}


def make_graph(nodes, edges, input_shape=(3, 32, 32)):
    return graph_from_dict({"input_shape": list(input_shape),
                            "nodes": nodes, "edges": edges})


@pytest.fixture
def conv_relu_chain():
    """Conv2D -> ReLU on a (3, 32, 32) input."""
    return make_graph([conv(0, 3, 16), node(1, "ReLU")], [[0, 1]])


@pytest.fixture
def single_conv():
    """The spot-value graph: one Conv2D 3->16, k=3, s=1, p=1 at (3, 32, 32)."""
    return make_graph([conv(0, 3, 16)], [])
