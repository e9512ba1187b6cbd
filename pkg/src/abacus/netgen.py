"""Random network generator and the deterministic synthetic cost oracle.

The generator grows convolutional networks block by block: conv/norm/relu
runs on a main line, occasional pooling, and fork-join blocks whose parallel
branches keep the spatial size (same-padding, stride-1 convs only) so that
the joining Add or Concat is always shape-consistent. Channel mismatches at
an Add are repaired with 1x1 convolution adapters. Every graph it returns
passes validate() and infer_shapes().

The cost oracle is a closed form over quantities the feature extractor also
sees (FLOPs, layers, parameters, activation sizes) but with two deliberate
non-smooth terms: memory is rounded up to an allocator step, and every
convolution whose channel product crosses a threshold adds a fixed spike.
Predictors therefore have to learn a genuinely discontinuous target instead
of inverting the formula.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .errors import GenerationError, ShapeError
from .features import (Optimizer, RunConfig, count_flops, count_layers,
                       count_params)
from .graph import (ComputationGraph, OperatorNode, OpType, infer_shapes,
                    validate)

_CHANNEL_LADDER = tuple(range(8, 129, 8)) + (160, 192, 224, 256, 320, 384, 448, 512)


@dataclass
class GenSpec:
    node_count: tuple[int, int] = (5, 60)
    branch_prob: float = 0.25
    pool_prob: float = 0.12
    channel_range: tuple[int, int] = (8, 256)
    kernel_choices: tuple[int, ...] = (1, 3, 5, 7)
    input_shape: tuple[int, int, int] = (3, 32, 32)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.node_count
        if not 1 <= lo <= hi:
            raise ValueError(f"node_count range {self.node_count} is empty or non-positive")
        for name in ("branch_prob", "pool_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} {getattr(self, name)} outside [0,1]")
        clo, chi = self.channel_range
        if not 1 <= clo <= chi:
            raise ValueError(f"channel_range {self.channel_range} is empty or non-positive")
        if not self.kernel_choices:
            raise ValueError("kernel_choices is empty")
        if any(k < 1 or k % 2 == 0 for k in self.kernel_choices):
            raise ValueError(f"kernel_choices {self.kernel_choices} must be odd "
                             "and positive (same-padding grammar)")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape {self.input_shape} must be (C,H,W), positive")


class _Builder:
    """One generation attempt; ids are assigned in dataflow order."""

    def __init__(self, spec: GenSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.nodes: list[OperatorNode] = []
        self.edges: list[tuple[int, int]] = []
        channels, h, w = spec.input_shape
        self.tail: int | None = None  # None = graph input
        self.channels, self.h, self.w = channels, h, w
        lo, hi = spec.channel_range
        choices = [c for c in _CHANNEL_LADDER if lo <= c <= hi] or [lo]
        # One width per graph: convolutions all produce self.width channels,
        # so activation totals track topology instead of per-conv dice rolls.
        # Concat joins still widen the stream until the next convolution.
        self.width = rng.choice(choices)

    def add_node(self, op: OpType, attrs: dict[str, int] | None = None,
                 parents: list[int] | None = None) -> int:
        nid = len(self.nodes)
        self.nodes.append(OperatorNode(id=nid, op_type=op, attrs=attrs or {}))
        if parents is None:
            parents = [] if self.tail is None else [self.tail]
        for p in parents:
            self.edges.append((p, nid))
        return nid

    def conv(self, in_channels: int, out_channels: int, kernel: int,
             parents: list[int] | None = None) -> int:
        attrs = {"kernel_h": kernel, "kernel_w": kernel, "stride": 1,
                 "padding": (kernel - 1) // 2,
                 "in_channels": in_channels, "out_channels": out_channels}
        return self.add_node(OpType.CONV2D, attrs, parents)

    def remaining(self, budget: int) -> int:
        return budget - len(self.nodes)

    def grow(self, budget: int) -> None:
        while self.remaining(budget) > 0:
            left = self.remaining(budget)
            if left == 3 and self.h is not None and self.rng.random() < 0.7 \
                    and self.channels * self.h * self.w <= 65536:
                self._head()
                return
            fork_cost = self._fork_cost_bound()
            if left >= fork_cost and self.rng.random() < self.spec.branch_prob:
                self._fork_join(budget)
            elif left >= 2 and self.rng.random() < 0.55:
                self._conv_block(budget)
            elif self.h >= 2 and self.w >= 2 and self.rng.random() < self.spec.pool_prob:
                self._pool()
            else:
                self._filler()

    def _conv_block(self, budget: int) -> None:
        kernel = self.rng.choice(self.spec.kernel_choices)
        self.tail = self.conv(self.channels, self.width, kernel)
        self.channels = self.width
        if self.remaining(budget) >= 1 and self.rng.random() < 0.7:
            self.tail = self.add_node(OpType.BATCHNORM2D, {"num_features": self.channels})
        if self.remaining(budget) >= 1 and self.rng.random() < 0.8:
            self.tail = self.add_node(OpType.RELU)

    def _pool(self) -> None:
        op = OpType.MAXPOOL2D if self.rng.random() < 0.7 else OpType.AVGPOOL2D
        self.tail = self.add_node(op, {"kernel_h": 2, "kernel_w": 2, "stride": 2,
                                       "padding": 0})
        self.h //= 2
        self.w //= 2

    def _filler(self) -> None:
        choice = self.rng.random()
        if choice < 0.4:
            self.tail = self.add_node(OpType.RELU)
        elif choice < 0.7:
            self.tail = self.add_node(OpType.BATCHNORM2D, {"num_features": self.channels})
        else:
            self.tail = self.add_node(OpType.DROPOUT)

    # Worst case per branch: 2 convs + 2 relus = 4 nodes, plus one 1x1
    # adapter per extra branch and the join node itself -> 4n + (n-1) + 1.
    _FORK_COST_2 = 11
    _FORK_COST_3 = 16

    def _fork_cost_bound(self) -> int:
        return self._FORK_COST_2

    def _fork_join(self, budget: int) -> None:
        n_branches = 3 if self.remaining(budget) >= self._FORK_COST_3 \
            and self.rng.random() < 0.2 else 2
        use_add = self.rng.random() < 0.5
        fork_point = self.tail
        fork_channels = self.channels

        tails: list[int] = []
        channel_out: list[int] = []
        for _ in range(n_branches):
            branch_tail = fork_point
            c = fork_channels
            for _ in range(self.rng.randint(1, 2)):
                kernel = self.rng.choice((1, 3))
                parents = [] if branch_tail is None else [branch_tail]
                branch_tail = self.conv(c, self.width, kernel, parents)
                c = self.width
                if self.rng.random() < 0.5:
                    branch_tail = self.add_node(OpType.RELU, parents=[branch_tail])
            tails.append(branch_tail)
            channel_out.append(c)

        if use_add:
            target = channel_out[0]
            for i in range(1, n_branches):
                if channel_out[i] != target:
                    tails[i] = self.conv(channel_out[i], target, 1, [tails[i]])
                    channel_out[i] = target
            self.tail = self.add_node(OpType.ADD, parents=tails)
            self.channels = target
        else:
            self.tail = self.add_node(OpType.CONCAT, parents=tails)
            self.channels = sum(channel_out)

    def _head(self) -> None:
        flat = self.channels * self.h * self.w
        self.tail = self.add_node(OpType.FLATTEN)
        classes = self.rng.choice((10, 100, 1000))
        self.tail = self.add_node(OpType.LINEAR, {"features_in": flat,
                                                  "features_out": classes})
        self.tail = self.add_node(OpType.SOFTMAX)
        self.h = self.w = None  # nothing may follow the head

    def build(self) -> ComputationGraph:
        budget = self.rng.randint(*self.spec.node_count)
        self.grow(budget)
        return ComputationGraph(nodes=self.nodes, edges=self.edges,
                                input_shape=tuple(self.spec.input_shape))


def generate_random_network(spec: GenSpec, max_retries: int = 10) -> ComputationGraph:
    """Generate one valid network; deterministic for a fixed spec."""
    for attempt in range(max_retries):
        rng = random.Random(spec.seed * 1_000_003 + attempt)
        g = _Builder(spec, rng).build()
        report = validate(g)
        if not report.ok:
            continue
        try:
            infer_shapes(g, batch=1)
        except ShapeError:
            continue
        return g
    raise GenerationError(f"no valid graph after {max_retries} attempts for seed {spec.seed}")


@dataclass
class SyntheticCostParams:
    """Closed-form oracle coefficients; see synthetic_cost for the formula."""

    # (batch upper bound, seconds per FLOP); None bound = open-ended regime.
    batch_regimes: tuple[tuple[int | None, float], ...] = (
        (32, 5.0e-11), (96, 3.5e-11), (192, 6.0e-11), (None, 4.5e-11))
    layer_overhead_s: float = 0.01
    step_mib: float = 64.0
    spike_threshold: int = 512
    spike_mib: float = 256.0

    def __post_init__(self):
        if not self.batch_regimes:
            raise ValueError("batch_regimes is empty")
        if self.batch_regimes[-1][0] is not None:
            raise ValueError("last batch regime must be open-ended (None bound)")
        for bound, coeff in self.batch_regimes:
            if coeff <= 0:
                raise ValueError(f"non-positive regime coefficient {coeff}")
        for name in ("layer_overhead_s", "step_mib", "spike_threshold", "spike_mib"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def coefficient(self, batch: int) -> float:
        for bound, coeff in self.batch_regimes:
            if bound is None or batch <= bound:
                return coeff
        raise AssertionError("unreachable: last regime is open-ended")


@dataclass
class SyntheticCost:
    time_s: float
    mem_mib: float


_BYTES_PER_ELEMENT = 4
_MIB = 1024 * 1024


def synthetic_cost(g: ComputationGraph, cfg: RunConfig,
                   params: SyntheticCostParams | None = None) -> SyntheticCost:
    """Deterministic (time, memory) ground truth for a graph and run config.

    time_s  = epochs * (flops * batch * coeff(batch) + layers * overhead)
    mem_mib = step_up(weight_mib + batch * activation_mib + spikes * spike_mib)

    where activation_mib covers the input tensor plus every node output for
    one sample, and a spike is charged per Conv2D with
    in_channels * out_channels > spike_threshold.
    """
    p = params or SyntheticCostParams()
    shaped = infer_shapes(g, batch=1)

    flops = count_flops(shaped)
    layers = count_layers(g)
    time_s = cfg.epochs * (flops * cfg.batch_size * p.coefficient(cfg.batch_size)
                           + layers * p.layer_overhead_s)

    act_elements = math.prod(g.input_shape)
    for node in shaped.nodes:
        act_elements += math.prod(node.output_shape[1:])
    weight_mib = count_params(g) * _BYTES_PER_ELEMENT / _MIB
    act_mib = act_elements * _BYTES_PER_ELEMENT / _MIB

    spikes = sum(1 for n in g.nodes if n.op_type is OpType.CONV2D
                 and n.attr("in_channels") * n.attr("out_channels") > p.spike_threshold)

    raw_mib = weight_mib + cfg.batch_size * act_mib + spikes * p.spike_mib
    mem_mib = math.ceil(raw_mib / p.step_mib) * p.step_mib
    return SyntheticCost(time_s=time_s, mem_mib=mem_mib)


# ---------------------------------------------------------------------------
# Synthetic dataset assembly

_BATCH_CHOICES = (16, 32, 64, 128, 256)
_LR_CHOICES = (0.001, 0.003, 0.01, 0.03, 0.1)
_OPTIMIZER_CHOICES = (Optimizer.SGD, Optimizer.ADAM, Optimizer.RMSPROP,
                      Optimizer.ADAGRAD)


def sample_run_config(g: ComputationGraph, rng: random.Random) -> RunConfig:
    return RunConfig.for_graph(
        g,
        batch_size=rng.choice(_BATCH_CHOICES),
        learning_rate=rng.choice(_LR_CHOICES),
        epochs=rng.randint(1, 5),
        optimizer=rng.choice(_OPTIMIZER_CHOICES))


def build_dataset(spec: GenSpec, n_graphs: int, configs_per_graph: int = 3,
                  cost_params: SyntheticCostParams | None = None,
                  structural=None, graph_prefix: str = "g",
                  machine_id: str = "synth-0",
                  framework_id: str = "synthetic"):
    """Generate graphs under spec and label them with the cost oracle.

    structural maps a graph to its structural feature block; the default
    builds the NSM over the default vocabulary. Returns (dataset, graphs).
    """
    from .nsm import build_nsm
    from .features import extract_features
    from .predictor import DataPoint, Dataset

    if n_graphs < 1 or configs_per_graph < 1:
        raise ValueError("n_graphs and configs_per_graph must be positive")
    structural_fn = structural if structural is not None else build_nsm
    params = cost_params or SyntheticCostParams()

    dataset: Dataset | None = None
    graphs: list[ComputationGraph] = []
    for i in range(n_graphs):
        g = generate_random_network(replace(spec, seed=spec.seed + i))
        graphs.append(g)
        block = structural_fn(g)
        cfg_rng = random.Random((spec.seed + i) * 7_919 + 1)
        for j in range(configs_per_graph):
            cfg = sample_run_config(g, cfg_rng)
            fv = extract_features(g, cfg, block)
            cost = synthetic_cost(g, cfg, params)
            point = DataPoint(graph_id=f"{graph_prefix}{i:05d}",
                              machine_id=machine_id, framework_id=framework_id,
                              features=fv, time_s=cost.time_s, mem_mib=cost.mem_mib)
            if dataset is None:
                dataset = Dataset(layout=fv.layout)
            dataset.append(point)
    return dataset, graphs
