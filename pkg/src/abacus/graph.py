"""Computation-graph data model: loading, validation, ordering, shape inference.

A network is a DAG of typed operator nodes. Tensors are implicit: each node
has one output tensor whose shape is filled in by ``infer_shapes``, and each
directed edge feeds that output to the consumer. The graph file format is
JSON with three top-level keys::

    {
      "input_shape": [C, H, W],
      "nodes": [{"id": 0, "op": "Conv2D", "attrs": {"kernel_h": 3, ...}}, ...],
      "edges": [[0, 1], ...]
    }

Graphs are treated as immutable after load; every operation here is a pure
function and safe to call concurrently.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import CycleError, ParseError, ShapeError

log = logging.getLogger("abacus")


class OpType(str, Enum):
    CONV2D = "Conv2D"
    LINEAR = "Linear"
    BATCHNORM2D = "BatchNorm2D"
    RELU = "ReLU"
    MAXPOOL2D = "MaxPool2D"
    AVGPOOL2D = "AvgPool2D"
    ADD = "Add"
    CONCAT = "Concat"
    FLATTEN = "Flatten"
    DROPOUT = "Dropout"
    SOFTMAX = "Softmax"
    OTHER = "Other"


# Attributes that must be present for each operator kind. All must be
# positive integers except padding, which may be zero.
REQUIRED_ATTRS: dict[OpType, tuple[str, ...]] = {
    OpType.CONV2D: ("kernel_h", "kernel_w", "stride", "padding",
                    "in_channels", "out_channels"),
    OpType.LINEAR: ("features_in", "features_out"),
    OpType.BATCHNORM2D: ("num_features",),
    OpType.MAXPOOL2D: ("kernel_h", "kernel_w", "stride", "padding"),
    OpType.AVGPOOL2D: ("kernel_h", "kernel_w", "stride", "padding"),
}

_ZERO_OK = frozenset({"padding"})


def op_type_from_string(name: str) -> OpType:
    """Map an operator name to the closed enumeration, falling back to Other."""
    try:
        return OpType(name)
    except ValueError:
        log.warning("unknown operator %r mapped to Other", name)
        return OpType.OTHER


@dataclass(frozen=True)
class OperatorNode:
    id: int
    op_type: OpType
    attrs: dict[str, int] = field(default_factory=dict)
    output_shape: tuple[int, ...] | None = None

    def attr(self, name: str) -> int:
        from .errors import MissingAttr

        if name not in self.attrs:
            raise MissingAttr(f"node {self.id} ({self.op_type.value}) missing attr {name!r}")
        return self.attrs[name]


@dataclass
class ComputationGraph:
    nodes: list[OperatorNode]
    edges: list[tuple[int, int]]
    input_shape: tuple[int, ...]

    def node_by_id(self, node_id: int) -> OperatorNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def in_edges(self) -> dict[int, list[int]]:
        """Map node id -> list of predecessor ids, in edge-list order."""
        preds: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for src, dst in self.edges:
            if dst in preds:
                preds[dst].append(src)
        return preds


@dataclass
class ValidationReport:
    ok: bool
    issues: list[tuple[object, str]]


def load_graph(path: str | Path) -> ComputationGraph:
    """Parse a graph file. Structural problems are left for validate()."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    return graph_from_dict(doc, source=str(path))


def graph_from_dict(doc: dict, source: str = "<dict>") -> ComputationGraph:
    """Build a graph from the parsed file-format document."""
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    try:
        input_shape = tuple(int(d) for d in doc["input_shape"])
        raw_nodes = doc["nodes"]
        raw_edges = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: missing or malformed top-level field: {exc}") from exc

    nodes = []
    for item in raw_nodes:
        try:
            node = OperatorNode(
                id=int(item["id"]),
                op_type=op_type_from_string(str(item["op"])),
                attrs={str(k): int(v) for k, v in item.get("attrs", {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{source}: malformed node entry {item!r}: {exc}") from exc
        nodes.append(node)

    edges = []
    for item in raw_edges:
        try:
            src, dst = item
            edges.append((int(src), int(dst)))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{source}: malformed edge entry {item!r}: {exc}") from exc

    return ComputationGraph(nodes=nodes, edges=edges, input_shape=input_shape)


def graph_to_dict(g: ComputationGraph) -> dict:
    return {
        "input_shape": list(g.input_shape),
        "nodes": [{"id": n.id, "op": n.op_type.value, "attrs": dict(n.attrs)}
                  for n in g.nodes],
        "edges": [[src, dst] for src, dst in g.edges],
    }


def save_graph(g: ComputationGraph, path: str | Path) -> None:
    """Write the graph in the same format load_graph reads."""
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def validate(g: ComputationGraph) -> ValidationReport:
    """Report all dangling edges, cycles, and missing/invalid attributes."""
    issues: list[tuple[object, str]] = []
    structure_broken = False

    seen: set[int] = set()
    for n in g.nodes:
        if n.id in seen:
            issues.append((n.id, f"duplicate node id {n.id}"))
            structure_broken = True
        seen.add(n.id)

    for i, (src, dst) in enumerate(g.edges):
        for endpoint in (src, dst):
            if endpoint not in seen:
                issues.append((i, f"edge {i} ({src}->{dst}) references missing node {endpoint}"))
                structure_broken = True

    for n in g.nodes:
        for name in REQUIRED_ATTRS.get(n.op_type, ()):
            if name not in n.attrs:
                issues.append((n.id, f"node {n.id} ({n.op_type.value}) missing attr {name!r}"))
            else:
                value = n.attrs[name]
                low = 0 if name in _ZERO_OK else 1
                if value < low:
                    issues.append((n.id, f"node {n.id} ({n.op_type.value}) attr {name!r}="
                                         f"{value} must be >= {low}"))

    if not structure_broken:
        try:
            topological_order(g)
        except CycleError as exc:
            issues.append((None, str(exc)))

    return ValidationReport(ok=not issues, issues=issues)


def topological_order(g: ComputationGraph) -> list[int]:
    """Kahn's algorithm with ties broken by ascending node id."""
    indegree = {n.id: 0 for n in g.nodes}
    succs: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for src, dst in g.edges:
        succs[src].append(dst)
        indegree[dst] += 1

    ready = [nid for nid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for succ in succs[nid]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(ready, succ)
    if len(order) != len(g.nodes):
        stuck = sorted(nid for nid, deg in indegree.items() if deg > 0)
        raise CycleError(f"cycle detected among nodes {stuck}")
    return order


def _conv_spatial(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


_SINGLE_INPUT = frozenset({
    OpType.CONV2D, OpType.LINEAR, OpType.BATCHNORM2D, OpType.RELU,
    OpType.MAXPOOL2D, OpType.AVGPOOL2D, OpType.FLATTEN, OpType.DROPOUT,
    OpType.SOFTMAX,
})


def _node_output_shape(node: OperatorNode, inputs: list[tuple[int, ...]]) -> tuple[int, ...]:
    op = node.op_type
    if op in _SINGLE_INPUT and len(inputs) != 1:
        raise ShapeError(f"node {node.id} ({op.value}) expects exactly one input, "
                         f"got {len(inputs)}")

    if op is OpType.CONV2D or op in (OpType.MAXPOOL2D, OpType.AVGPOOL2D):
        shape = inputs[0]
        if len(shape) != 4:
            raise ShapeError(f"node {node.id} ({op.value}) needs a 4-d input, got {shape}")
        batch, channels, h, w = shape
        kh, kw = node.attr("kernel_h"), node.attr("kernel_w")
        stride, pad = node.attr("stride"), node.attr("padding")
        h_out = _conv_spatial(h, kh, stride, pad)
        w_out = _conv_spatial(w, kw, stride, pad)
        if h_out < 1 or w_out < 1:
            raise ShapeError(f"node {node.id} ({op.value}) computes non-positive "
                             f"spatial dims {h_out}x{w_out} from {shape}")
        if op is OpType.CONV2D:
            if node.attr("in_channels") != channels:
                raise ShapeError(f"node {node.id} (Conv2D) expects {node.attr('in_channels')} "
                                 f"input channels, got {channels}")
            return (batch, node.attr("out_channels"), h_out, w_out)
        return (batch, channels, h_out, w_out)

    if op is OpType.LINEAR:
        shape = inputs[0]
        if len(shape) != 2:
            raise ShapeError(f"node {node.id} (Linear) needs a 2-d input, got {shape}")
        if shape[1] != node.attr("features_in"):
            raise ShapeError(f"node {node.id} (Linear) expects {node.attr('features_in')} "
                             f"input features, got {shape[1]}")
        return (shape[0], node.attr("features_out"))

    if op is OpType.BATCHNORM2D:
        shape = inputs[0]
        if len(shape) != 4:
            raise ShapeError(f"node {node.id} (BatchNorm2D) needs a 4-d input, got {shape}")
        if shape[1] != node.attr("num_features"):
            raise ShapeError(f"node {node.id} (BatchNorm2D) expects {node.attr('num_features')} "
                             f"channels, got {shape[1]}")
        return shape

    if op is OpType.FLATTEN:
        shape = inputs[0]
        return (shape[0], math.prod(shape[1:]))

    if op is OpType.ADD:
        first = inputs[0]
        for shape in inputs[1:]:
            if shape != first:
                raise ShapeError(f"node {node.id} (Add) has mismatched inputs "
                                 f"{first} vs {shape}")
        return first

    if op is OpType.CONCAT:
        first = inputs[0]
        if len(first) < 2:
            raise ShapeError(f"node {node.id} (Concat) needs inputs of rank >= 2, got {first}")
        channels = first[1]
        for shape in inputs[1:]:
            if len(shape) != len(first) or shape[0] != first[0] or shape[2:] != first[2:]:
                raise ShapeError(f"node {node.id} (Concat) has incompatible inputs "
                                 f"{first} vs {shape}")
            channels += shape[1]
        return (first[0], channels) + first[2:]

    # ReLU / Dropout / Softmax are elementwise; Other passes its first input
    # through unchanged.
    return inputs[0]


def infer_shapes(g: ComputationGraph, batch: int) -> ComputationGraph:
    """Return a copy of the graph with every node's output_shape filled.

    Every in-degree-0 node consumes the model input, which is the graph's
    input_shape with the batch dimension prepended.
    """
    if batch < 1:
        raise ShapeError(f"batch must be positive, got {batch}")
    order = topological_order(g)
    preds = g.in_edges()
    model_input = (batch,) + tuple(g.input_shape)

    index = {n.id: n for n in g.nodes}
    shapes: dict[int, tuple[int, ...]] = {}
    for nid in order:
        node = index[nid]
        inputs = [shapes[p] for p in sorted(preds[nid])]
        if not inputs:
            inputs = [model_input]
        shapes[nid] = _node_output_shape(node, inputs)

    new_nodes = [replace(n, output_shape=shapes[n.id]) for n in g.nodes]
    return ComputationGraph(nodes=new_nodes, edges=list(g.edges),
                            input_shape=tuple(g.input_shape))


def node_param_count(node: OperatorNode) -> int:
    """Learnable parameters (weights plus biases) held by one operator."""
    op = node.op_type
    if op is OpType.CONV2D:
        out_c = node.attr("out_channels")
        return out_c * node.attr("in_channels") * node.attr("kernel_h") * node.attr("kernel_w") + out_c
    if op is OpType.LINEAR:
        f_out = node.attr("features_out")
        return f_out * node.attr("features_in") + f_out
    if op is OpType.BATCHNORM2D:
        return 2 * node.attr("num_features")
    return 0


def estimate_memory_shape_inference(g: ComputationGraph, batch: int,
                                    bytes_per_element: int = 4) -> int:
    """Memory baseline in bytes: weights + every output tensor + the input.

    This is the classic shape-derived lower bound; it systematically
    underestimates real training footprints and is kept for comparison runs.
    """
    if bytes_per_element < 1:
        raise ValueError(f"bytes_per_element must be positive, got {bytes_per_element}")
    elements = batch * math.prod(g.input_shape)
    for node in g.nodes:
        if node.output_shape is None:
            raise ShapeError(f"node {node.id} has no inferred shape; run infer_shapes first")
        if node.output_shape[0] != batch:
            raise ShapeError(f"node {node.id} shape {node.output_shape} was inferred at a "
                             f"different batch than {batch}")
        elements += math.prod(node.output_shape)
        elements += node_param_count(node)
    return bytes_per_element * elements
