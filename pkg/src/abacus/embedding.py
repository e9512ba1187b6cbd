"""Graph embeddings: Weisfeiler-Lehman tokens plus a skipgram model.

Each node contributes one token per depth 0..d: depth 0 is the operator
name, depth k hashes the node's depth-(k-1) token together with the sorted
depth-(k-1) tokens of its in-neighbors (computation graphs are directed, so
only producers shape a node's context). The hash is the first 8 bytes of
blake2b, hex-encoded — stable across runs and machines.

Training is PV-DBOW: every graph holds one vector that must score its own
tokens above `negative_samples` tokens drawn from the corpus unigram
distribution raised to 3/4. After the SGD passes, each graph vector is
refit against the frozen token table under the *expected* negative-sampling
objective (sampled negatives replaced by their expectation, plus a tiny L2
term that makes the optimum unique). embed() for new graphs runs the same
refit, which is what makes re-embedding a corpus graph a fixed point: its
stored vector already sits at that optimum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import EmptyCorpus, VersionMismatch
from .graph import ComputationGraph

EMBEDDING_MAGIC = "ABACUS-EMB-1"
HASH_ALGORITHM = "blake2b-64"
OBJECTIVE_NOTE = ("skipgram with negative sampling (unigram^0.75); "
                  "graph vectors refit to the expected objective after SGD")

_UNIGRAM_POWER = 0.75
# The refit objective needs enough curvature in every direction that L-BFGS
# runs stop at the unique optimum rather than drifting along flat valleys:
# with gradient tolerance 1e-10, distance between two stops is bounded by
# gtol / (2 * lambda) = 5e-8, well inside the 1e-6 fixed-point contract.
_L2_LAMBDA = 1e-3
_MIN_ALPHA_FACTOR = 1e-4


def _stable_hash(text: str) -> str:
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


@dataclass(frozen=True)
class WLTokenBag:
    graph_id: str
    tokens: tuple[str, ...]


def wl_tokens(g: ComputationGraph, d: int, graph_id: str = "") -> WLTokenBag:
    """Tokens of every node at depths 0..d; |nodes|*(d+1) tokens in total."""
    if d < 0:
        raise ValueError(f"depth must be non-negative, got {d}")
    preds: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for src, dst in g.edges:
        preds[dst].append(src)
    labels = {n.id: n.op_type.value for n in g.nodes}
    tokens = [labels[n.id] for n in sorted(g.nodes, key=lambda n: n.id)]
    for _ in range(d):
        labels = {nid: _stable_hash(own + "|" + ",".join(sorted(labels[p] for p in preds[nid])))
                  for nid, own in labels.items()}
        tokens.extend(labels[n.id] for n in sorted(g.nodes, key=lambda n: n.id))
    return WLTokenBag(graph_id=graph_id, tokens=tuple(tokens))


# ---------------------------------------------------------------------------
# Skipgram objective (one positive pair + explicit negatives)

def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def pair_objective(v: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray) -> float:
    """Negative log likelihood of one observed pair with given negatives."""
    loss = -_log_sigmoid(float(v @ u_pos))
    if len(u_neg):
        loss -= float(np.sum(_log_sigmoid(-(u_neg @ v))))
    return float(loss)


def pair_gradients(v: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray):
    """Gradients of pair_objective wrt (v, u_pos, each u_neg)."""
    g_pos = expit(float(v @ u_pos)) - 1.0
    grad_v = g_pos * u_pos
    grad_pos = g_pos * v
    if len(u_neg):
        g_neg = expit(u_neg @ v)  # sigmoid of positive score per negative
        grad_v = grad_v + g_neg @ u_neg
        grad_negs = g_neg[:, None] * v[None, :]
    else:
        grad_negs = np.zeros((0, v.size))
    return grad_v, grad_pos, grad_negs


@dataclass
class EmbeddingModel:
    dims: int
    depth: int
    epochs: int
    learning_rate: float
    negative_samples: int
    seed: int
    tokens: list[str]                       # row order of token_vectors
    token_vectors: np.ndarray               # (vocab, dims)
    token_counts: np.ndarray                # (vocab,) corpus frequencies
    graph_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    hash_algorithm: str = HASH_ALGORITHM
    objective: str = OBJECTIVE_NOTE

    def token_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def negative_probs(self) -> np.ndarray:
        w = self.token_counts.astype(np.float64) ** _UNIGRAM_POWER
        return w / w.sum()


def _seeded_vector(seed: int, key: str, dims: int) -> np.ndarray:
    """Deterministic small uniform init, word2vec style."""
    entropy = int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "big")
    rng = np.random.default_rng((seed, entropy))
    return rng.uniform(-0.5 / dims, 0.5 / dims, size=dims)


def _bag_weights(pos_idx: np.ndarray, probs: np.ndarray, k: int):
    """Per-token weights of the expected objective: positive counts and
    len(bag)*k expected negative draws."""
    w_pos = np.bincount(pos_idx, minlength=len(probs)).astype(np.float64)
    w_neg = (len(pos_idx) * k) * probs
    return w_pos, w_neg


def _expected_loss_grad(v: np.ndarray, pos_idx: np.ndarray, token_vectors: np.ndarray,
                        probs: np.ndarray, k: int):
    """Expected negative-sampling objective over a bag, and its gradient in v."""
    w_pos, w_neg = _bag_weights(pos_idx, probs, k)
    s = token_vectors @ v
    loss = -float(w_pos @ _log_sigmoid(s)) - float(w_neg @ _log_sigmoid(-s)) \
        + _L2_LAMBDA * float(v @ v)
    grad = (w_pos * (expit(s) - 1.0) + w_neg * expit(s)) @ token_vectors \
        + 2.0 * _L2_LAMBDA * v
    return loss, grad


def _refit_vector(v0: np.ndarray, pos_idx: np.ndarray, token_vectors: np.ndarray,
                  probs: np.ndarray, k: int) -> np.ndarray:
    """Minimize the expected objective to (near) machine precision.

    L-BFGS gets close; damped Newton steps then push the gradient below
    1e-12, so every start converges to the same unique optimum and
    re-embedding a corpus graph is a genuine fixed point.
    """
    res = minimize(_expected_loss_grad, v0, args=(pos_idx, token_vectors, probs, k),
                   jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "ftol": 0.0, "gtol": 1e-10})
    v = np.asarray(res.x, dtype=np.float64)
    w_pos, w_neg = _bag_weights(pos_idx, probs, k)
    w_all = w_pos + w_neg
    loss, grad = _expected_loss_grad(v, pos_idx, token_vectors, probs, k)
    for _ in range(50):
        if np.max(np.abs(grad)) < 1e-12:
            break
        sig = expit(token_vectors @ v)
        curve = w_all * sig * (1.0 - sig)
        hess = token_vectors.T @ (curve[:, None] * token_vectors)
        hess[np.diag_indices_from(hess)] += 2.0 * _L2_LAMBDA
        step = np.linalg.solve(hess, grad)
        for _ in range(30):
            cand = v - step
            cand_loss, cand_grad = _expected_loss_grad(cand, pos_idx, token_vectors,
                                                       probs, k)
            if cand_loss <= loss:
                v, loss, grad = cand, cand_loss, cand_grad
                break
            step = step / 2.0
        else:  # pragma: no cover - convex objective; halving always succeeds
            break
    return v


def train_embeddings(corpus: list[WLTokenBag], dims: int = 64, epochs: int = 10,
                     learning_rate: float = 0.025, negative_samples: int = 5,
                     seed: int = 0, depth: int = 2) -> EmbeddingModel:
    """PV-DBOW over token bags; deterministic for a fixed seed."""
    if not corpus:
        raise EmptyCorpus("cannot train embeddings on an empty corpus")
    if dims < 1 or negative_samples < 1:
        raise ValueError("dims and negative_samples must be positive")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    seen = set()
    for bag in corpus:
        if not bag.graph_id:
            raise ValueError("every corpus bag needs a non-empty graph_id")
        if bag.graph_id in seen:
            raise ValueError(f"duplicate graph_id {bag.graph_id!r} in corpus")
        seen.add(bag.graph_id)

    tokens: list[str] = []
    index: dict[str, int] = {}
    counts: list[int] = []
    for bag in corpus:
        for t in bag.tokens:
            if t not in index:
                index[t] = len(tokens)
                tokens.append(t)
                counts.append(0)
            counts[index[t]] += 1
    token_counts = np.array(counts, dtype=np.int64)
    token_vectors = np.zeros((len(tokens), dims))
    graph_vectors = {bag.graph_id: _seeded_vector(seed, bag.graph_id, dims)
                     for bag in corpus}

    model = EmbeddingModel(dims=dims, depth=depth, epochs=epochs,
                           learning_rate=learning_rate,
                           negative_samples=negative_samples, seed=seed,
                           tokens=tokens, token_vectors=token_vectors,
                           token_counts=token_counts, graph_vectors=graph_vectors)
    if epochs == 0:
        return model

    probs = model.negative_probs()
    cum = np.cumsum(probs)
    bag_idx = [np.array([index[t] for t in bag.tokens], dtype=np.int64)
               for bag in corpus]
    rng = np.random.default_rng(seed)
    total_steps = epochs * sum(len(b) for b in bag_idx)
    min_alpha = learning_rate * _MIN_ALPHA_FACTOR

    step = 0
    for _ in range(epochs):
        for bag, idx in zip(corpus, bag_idx):
            v = graph_vectors[bag.graph_id]
            for pos in idx:
                alpha = max(learning_rate * (1.0 - step / total_steps), min_alpha)
                step += 1
                neg = np.searchsorted(cum, rng.random(negative_samples))
                neg = np.minimum(neg, len(cum) - 1)  # float-rounding guard
                neg = neg[neg != pos]  # word2vec skips accidental positives
                u_pos = token_vectors[pos]
                grad_v, grad_pos, grad_negs = pair_gradients(v, u_pos, token_vectors[neg])
                token_vectors[pos] = u_pos - alpha * grad_pos
                if len(neg):
                    token_vectors[neg] -= alpha * grad_negs
                v = v - alpha * grad_v
            graph_vectors[bag.graph_id] = v

    for bag, idx in zip(corpus, bag_idx):
        graph_vectors[bag.graph_id] = _refit_vector(
            graph_vectors[bag.graph_id], idx, token_vectors, probs, negative_samples)
    return model


def embed(g: ComputationGraph, m: EmbeddingModel, graph_id: str = "",
          init: np.ndarray | None = None) -> np.ndarray:
    """Vector for a (possibly unseen) graph with the token table frozen.

    Tokens outside the model's vocabulary are skipped; a graph with no known
    tokens keeps its seeded initialization.
    """
    bag = wl_tokens(g, m.depth, graph_id=graph_id)
    index = m.token_index()
    pos_idx = np.array([index[t] for t in bag.tokens if t in index], dtype=np.int64)
    if init is None:
        v0 = _seeded_vector(m.seed, graph_id or "|".join(sorted(bag.tokens)), m.dims)
    else:
        v0 = np.asarray(init, dtype=np.float64)
        if v0.shape != (m.dims,):
            raise ValueError(f"init shape {v0.shape} != ({m.dims},)")
    if len(pos_idx) == 0 or m.epochs == 0:
        return v0
    return _refit_vector(v0, pos_idx, m.token_vectors, m.negative_probs(),
                         m.negative_samples)


def corpus_loss(m: EmbeddingModel, corpus: list[WLTokenBag]) -> float:
    """Deterministic total objective (expected negatives) of stored vectors."""
    index = m.token_index()
    probs = m.negative_probs()
    total = 0.0
    for bag in corpus:
        pos_idx = np.array([index[t] for t in bag.tokens if t in index], dtype=np.int64)
        v = m.graph_vectors[bag.graph_id]
        loss, _ = _expected_loss_grad(v, pos_idx, m.token_vectors, probs,
                                      m.negative_samples)
        total += loss
    return total


# ---------------------------------------------------------------------------
# Persistence (text artifact, bit-identical across runs)

def save_embeddings(m: EmbeddingModel, path: str) -> None:
    doc = {
        "format": EMBEDDING_MAGIC,
        "hash_algorithm": m.hash_algorithm,
        "objective": m.objective,
        "dims": m.dims, "depth": m.depth, "epochs": m.epochs,
        "learning_rate": m.learning_rate,
        "negative_samples": m.negative_samples, "seed": m.seed,
        "tokens": m.tokens,
        "token_counts": [int(c) for c in m.token_counts],
        "token_vectors": [[float(x) for x in row] for row in m.token_vectors],
        "graph_vectors": {gid: [float(x) for x in vec]
                          for gid, vec in m.graph_vectors.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=None, separators=(",", ":"))


def load_embeddings(path: str) -> EmbeddingModel:
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict) or doc.get("format") != EMBEDDING_MAGIC:
        raise VersionMismatch(f"{path} is not an {EMBEDDING_MAGIC} artifact")
    return EmbeddingModel(
        dims=doc["dims"], depth=doc["depth"], epochs=doc["epochs"],
        learning_rate=doc["learning_rate"],
        negative_samples=doc["negative_samples"], seed=doc["seed"],
        tokens=list(doc["tokens"]),
        token_vectors=np.array(doc["token_vectors"], dtype=np.float64).reshape(
            len(doc["tokens"]), doc["dims"]),
        token_counts=np.array(doc["token_counts"], dtype=np.int64),
        graph_vectors={gid: np.array(vec, dtype=np.float64)
                       for gid, vec in doc["graph_vectors"].items()},
        hash_algorithm=doc["hash_algorithm"], objective=doc["objective"])
