"""Network structural matrix: vocabulary, counts, flattening, CSV."""

import random

import numpy as np

from abacus.graph import graph_from_dict, graph_to_dict
from abacus.nsm import (build_nsm, default_vocabulary, flatten_nsm, nsm_to_csv)

from conftest import bn, conv, make_graph, node


def test_vocabulary_is_sorted_with_other_last():
    names = default_vocabulary().names
    assert len(names) == 12
    assert names[-1] == "Other"
    assert list(names[:-1]) == sorted(names[:-1])


def test_chain_counts():
    g = make_graph([conv(0, 3, 16), bn(1, 16), node(2, "ReLU")],
                   [[0, 1], [1, 2]])
    m = build_nsm(g)
    vocab = m.vocabulary
    assert m.counts[vocab.index("Conv2D"), vocab.index("BatchNorm2D")] == 1
    assert m.counts[vocab.index("BatchNorm2D"), vocab.index("ReLU")] == 1
    assert m.counts.sum() == 2  # total == edge count


def test_parallel_branches_accumulate():
    g = make_graph([conv(0, 3, 8), node(1, "ReLU"), conv(2, 3, 8),
                    node(3, "ReLU"), node(4, "Add")],
                   [[0, 1], [2, 3], [1, 4], [3, 4]])
    m = build_nsm(g)
    vocab = m.vocabulary
    assert m.counts[vocab.index("Conv2D"), vocab.index("ReLU")] == 2
    assert m.counts[vocab.index("ReLU"), vocab.index("Add")] == 2
    assert m.counts.sum() == 4


def test_flatten_is_row_major():
    g = make_graph([conv(0, 3, 16), bn(1, 16), node(2, "ReLU")],
                   [[0, 1], [1, 2]])
    m = build_nsm(g)
    flat = flatten_nsm(m)
    assert flat.shape == (144,)
    for i in range(12):
        for j in range(12):
            assert flat[i * 12 + j] == m.counts[i, j]


def test_empty_graph_flattens_to_zeros():
    g = make_graph([node(0, "ReLU")], [])
    assert not flatten_nsm(build_nsm(g)).any()
    assert flatten_nsm(build_nsm(g)).size == 144


def _permute(g, rng):
    """Relabel node ids with a random bijection and shuffle list orders."""
    doc = graph_to_dict(g)
    ids = [n["id"] for n in doc["nodes"]]
    new_ids = ids[:]
    rng.shuffle(new_ids)
    mapping = dict(zip(ids, new_ids))
    nodes = [{**n, "id": mapping[n["id"]]} for n in doc["nodes"]]
    edges = [[mapping[a], mapping[b]] for a, b in doc["edges"]]
    rng.shuffle(nodes)
    rng.shuffle(edges)
    return graph_from_dict({"input_shape": doc["input_shape"],
                            "nodes": nodes, "edges": edges})


def test_permutation_invariance():
    from abacus.netgen import GenSpec, generate_random_network

    rng = random.Random(3)
    for seed in range(20):
        g = generate_random_network(GenSpec(node_count=(5, 25), seed=seed))
        base = build_nsm(g).counts
        for _ in range(3):
            assert np.array_equal(base, build_nsm(_permute(g, rng)).counts)


def test_csv_shape():
    g = make_graph([conv(0, 3, 16), node(1, "ReLU")], [[0, 1]])
    lines = nsm_to_csv(build_nsm(g)).strip().split("\n")
    assert len(lines) == 13  # header + 12 rows
    assert lines[0].startswith(",Add,")
    assert all(len(line.split(",")) == 13 for line in lines[1:])
