"""Network structural matrix: directed operator-pair edge counts.

The matrix is square over a fixed operator vocabulary; the entry at
(row i, column j) counts the edges whose source node has the i-th operator
kind and whose sink node has the j-th. Because each edge is counted exactly
once, the matrix is independent of traversal order and of node numbering.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .graph import ComputationGraph, OpType


def default_vocabulary() -> "OperatorVocabulary":
    """The closed operator enumeration, lexicographically sorted, Other last."""
    names = sorted(op.value for op in OpType if op is not OpType.OTHER)
    names.append(OpType.OTHER.value)
    return OperatorVocabulary(tuple(names))


@dataclass(frozen=True)
class OperatorVocabulary:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("vocabulary contains duplicate operator names")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, op: OpType | str) -> int:
        name = op.value if isinstance(op, OpType) else op
        try:
            return self.names.index(name)
        except ValueError:
            return self.names.index(OpType.OTHER.value)


@dataclass
class NSM:
    vocabulary: OperatorVocabulary
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        dim = len(self.vocabulary)
        if self.counts.shape != (dim, dim):
            raise ValueError(f"counts must be {dim}x{dim}, got {self.counts.shape}")

    def total(self) -> int:
        return int(self.counts.sum())


def build_nsm(g: ComputationGraph, vocabulary: OperatorVocabulary | None = None) -> NSM:
    """Count each edge once into the (source kind, sink kind) cell."""
    vocab = vocabulary or default_vocabulary()
    index = {n.id: vocab.index(n.op_type) for n in g.nodes}
    counts = np.zeros((len(vocab), len(vocab)), dtype=np.int64)
    for src, dst in g.edges:
        counts[index[src], index[dst]] += 1
    return NSM(vocabulary=vocab, counts=counts)


def flatten_nsm(m: NSM) -> np.ndarray:
    """Row-major flattening in vocabulary order."""
    return m.counts.reshape(-1).copy()


def nsm_to_csv(m: NSM) -> str:
    """Render the matrix as CSV with operator names on both axes."""
    out = io.StringIO()
    names = m.vocabulary.names
    out.write("," + ",".join(names) + "\n")
    for i, name in enumerate(names):
        row = ",".join(str(int(v)) for v in m.counts[i])
        out.write(f"{name},{row}\n")
    return out.getvalue()
