"""Feature extraction: run-configuration features plus a structural segment.

A feature vector concatenates ten run/model scalars (batch size, input
height, input width, channels, learning rate, epochs, optimizer index,
layer count, per-sample forward FLOPs, parameter count) with a structural
segment, either the flattened structural matrix or a graph embedding. The
layout descriptor names every column and records the counting conventions
so datasets are self-describing.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeError
from .graph import ComputationGraph, OpType, infer_shapes, node_param_count
from .nsm import NSM, flatten_nsm

# One multiply-accumulate is counted as two floating-point operations.
FLOPS_PER_MAC = 2

SCALAR_FEATURES = ("batch_size", "input_h", "input_w", "channels",
                   "learning_rate", "epochs", "optimizer", "layers",
                   "flops", "params")


class Optimizer(Enum):
    SGD = 0
    ADAM = 1
    RMSPROP = 2
    ADAGRAD = 3
    OTHER = 4

    @classmethod
    def from_string(cls, name: str) -> "Optimizer":
        try:
            return cls[name.upper()]
        except KeyError:
            return cls.OTHER


@dataclass
class RunConfig:
    batch_size: int
    input_h: int
    input_w: int
    channels: int
    learning_rate: float
    epochs: int
    optimizer: Optimizer = Optimizer.SGD

    def __post_init__(self):
        for name in ("batch_size", "input_h", "input_w", "channels", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not isinstance(self.optimizer, Optimizer):
            raise ValueError(f"optimizer must be an Optimizer, got {self.optimizer!r}")

    @classmethod
    def for_graph(cls, g: ComputationGraph, batch_size: int, learning_rate: float = 0.1,
                  epochs: int = 1, optimizer: Optimizer = Optimizer.SGD) -> "RunConfig":
        """Config whose input dimensions are taken from the graph."""
        channels, h, w = g.input_shape
        return cls(batch_size=batch_size, input_h=h, input_w=w, channels=channels,
                   learning_rate=learning_rate, epochs=epochs, optimizer=optimizer)


@dataclass(frozen=True)
class FeatureLayout:
    """Ordered column names plus the conventions behind the counted columns."""

    names: tuple[str, ...]
    structural: str  # "nsm" or "embedding"
    conventions: tuple[tuple[str, str], ...] = (
        ("flops", "per-sample forward pass, one MAC = 2 FLOPs"),
        ("optimizer", "small-integer category index"),
        ("layers", "all nodes except attribute-free Other nodes"),
    )

    def __len__(self) -> int:
        return len(self.names)

    def digest(self) -> str:
        """Stable hash over the ordered column names and structural kind."""
        payload = json.dumps({"names": list(self.names), "structural": self.structural})
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_feature_names(cls, names: list[str] | tuple[str, ...]) -> "FeatureLayout":
        structural = "embedding" if any(n.startswith("emb_") for n in names) else "nsm"
        return cls(names=tuple(names), structural=structural)


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: FeatureLayout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.layout),):
            raise ValueError(f"expected {len(self.layout)} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def count_params(g: ComputationGraph) -> int:
    """Total learnable parameters over all nodes."""
    return sum(node_param_count(n) for n in g.nodes)


def _elements_per_sample(shape: tuple[int, ...]) -> int:
    return math.prod(shape[1:])


def count_flops(g: ComputationGraph) -> int:
    """Per-sample forward FLOPs, summed over nodes.

    Requires inferred shapes (any batch; counts are per sample). Convolutions
    and linear layers count one multiply and one add per MAC; batch norm
    counts four ops per element, ReLU and Add one per element, pooling one
    per kernel element per output element. The remaining kinds move data and
    count zero.
    """
    total = 0
    for node in g.nodes:
        if node.output_shape is None:
            raise ShapeError(f"node {node.id} has no inferred shape; run infer_shapes first")
        elems = _elements_per_sample(node.output_shape)
        op = node.op_type
        if op is OpType.CONV2D:
            macs_per_element = node.attr("kernel_h") * node.attr("kernel_w") * node.attr("in_channels")
            total += FLOPS_PER_MAC * macs_per_element * elems
        elif op is OpType.LINEAR:
            total += FLOPS_PER_MAC * node.attr("features_in") * node.attr("features_out")
        elif op is OpType.BATCHNORM2D:
            total += 4 * elems
        elif op in (OpType.RELU, OpType.ADD):
            total += elems
        elif op in (OpType.MAXPOOL2D, OpType.AVGPOOL2D):
            total += node.attr("kernel_h") * node.attr("kernel_w") * elems
    return total


def count_layers(g: ComputationGraph) -> int:
    """Nodes that compute or carry parameters: everything except bare Other."""
    return sum(1 for n in g.nodes if not (n.op_type is OpType.OTHER and not n.attrs))


def structural_segment(structural: NSM | np.ndarray) -> tuple[np.ndarray, list[str], str]:
    """Normalize the structural argument to (values, column names, kind)."""
    if isinstance(structural, NSM):
        flat = flatten_nsm(structural).astype(np.float64)
        names = [f"nsm__{src}__{dst}"
                 for src in structural.vocabulary.names
                 for dst in structural.vocabulary.names]
        return flat, names, "nsm"
    vec = np.asarray(structural, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"structural segment must be 1-d, got shape {vec.shape}")
    return vec, [f"emb_{i}" for i in range(vec.size)], "embedding"


def extract_features(g: ComputationGraph, cfg: RunConfig,
                     structural: NSM | np.ndarray) -> FeatureVector:
    """Assemble the full feature vector for one (graph, config) pair.

    FLOPs and parameters are computed from the graph at its own input shape;
    the structural segment must come from the same graph.
    """
    shaped = infer_shapes(g, batch=1)
    seg_values, seg_names, seg_kind = structural_segment(structural)
    scalars = np.array([
        cfg.batch_size,
        cfg.input_h,
        cfg.input_w,
        cfg.channels,
        cfg.learning_rate,
        cfg.epochs,
        cfg.optimizer.value,
        count_layers(g),
        count_flops(shaped),
        count_params(g),
    ], dtype=np.float64)
    layout = FeatureLayout(names=tuple(SCALAR_FEATURES) + tuple(seg_names),
                           structural=seg_kind)
    return FeatureVector(values=np.concatenate([scalars, seg_values]), layout=layout)


def features_csv_header(layout: FeatureLayout) -> str:
    return ",".join(layout.names)


def features_csv_row(fv: FeatureVector) -> str:
    return ",".join(repr(float(v)) for v in fv.values)
