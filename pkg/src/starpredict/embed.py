"""Node embeddings for the co-occurrence graph.

Biased second-order random walks explore each node's neighborhood, then a
skip-gram model with negative sampling turns walk windows into vectors.
Walk generation derives one MINSTD stream per walk from the seed so results
never depend on execution order; training is single-threaded and
deterministic for a fixed backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cograph import CoocGraph
from .errors import EmptyDistributionError, ValidationError
from .kernels import sgns, walks as walk_kernels
from .model import StudentId
from .seeds import minstd_state, rng_for

NEG_TABLE_POWER = 0.75


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 10
    walk_length: int = 80
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValidationError("p and q must be positive")
        if self.walks_per_node < 1:
            raise ValidationError("walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValidationError("walk_length must be >= 2")


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 64
    window: int = 10
    negatives_per_positive: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    rng_seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValidationError("dim must be >= 2")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValidationError("negatives_per_positive must be >= 1")
        # epochs = 0 is allowed: training then returns the initialization
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")


@dataclass(eq=False)
class WalkSet:
    """Generated walks plus the graph context training needs."""

    nodes: tuple[StudentId, ...]
    array: np.ndarray      # (n_walks, walk_length) int64, -1 past each end
    lengths: np.ndarray    # (n_walks,) int64
    weighted_degrees: np.ndarray

    @property
    def n_walks(self) -> int:
        return int(self.array.shape[0])

    def sequences(self):
        for i in range(self.n_walks):
            yield [self.nodes[j] for j in self.array[i, : self.lengths[i]]]


@dataclass(eq=False)
class EmbeddingMatrix:
    """Center vectors per student; context vectors kept for inspection."""

    students: tuple[StudentId, ...]
    vectors: np.ndarray
    context_vectors: np.ndarray

    def __post_init__(self):
        n, _dim = self.vectors.shape
        if len(self.students) != n or self.context_vectors.shape != self.vectors.shape:
            raise ValidationError("embedding table shapes disagree")
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("embedding vectors must be finite")
        self._index = {s: i for i, s in enumerate(self.students)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __contains__(self, sid: StudentId) -> bool:
        return sid in self._index

    def vector(self, sid: StudentId) -> np.ndarray:
        return self.vectors[self._index[sid]]


def transition_distribution(g: CoocGraph, prev: StudentId | None,
                            cur: StudentId, cfg: WalkConfig) -> dict[StudentId, float]:
    """P(next | prev, cur) over neighbors of cur.

    alpha = 1/p toward prev, 1 toward common neighbors of prev, 1/q
    otherwise; at the walk start (prev None) alpha is 1 everywhere. The
    returned probabilities are weight-scaled and normalized.
    """
    indptr, indices, weights = g.csr()
    ci = g.nodes.index(cur)
    lo, hi = int(indptr[ci]), int(indptr[ci + 1])
    if hi == lo:
        raise EmptyDistributionError(f"node {cur!r} has no neighbors")
    neigh = indices[lo:hi]
    w = weights[lo:hi]
    if prev is None:
        alpha = np.ones(neigh.shape[0])
    else:
        pi = g.nodes.index(prev)
        plo, phi = int(indptr[pi]), int(indptr[pi + 1])
        prev_adj = set(indices[plo:phi].tolist())
        alpha = np.empty(neigh.shape[0])
        for t, x in enumerate(neigh.tolist()):
            if x == pi:
                alpha[t] = 1.0 / cfg.p
            elif x in prev_adj:
                alpha[t] = 1.0
            else:
                alpha[t] = 1.0 / cfg.q
    scores = alpha * w
    probs = scores / scores.sum()
    return {g.nodes[int(x)]: float(pr) for x, pr in zip(neigh, probs)}


def generate_walks(g: CoocGraph, cfg: WalkConfig) -> WalkSet:
    """walks_per_node walks from every node; per-walk RNG streams derived
    from (rng_seed, round, node) so ordering cannot matter."""
    if g.n_nodes == 0:
        raise ValidationError("cannot walk an empty graph")
    indptr, indices, weights = g.csr()
    n = g.n_nodes
    starts = np.empty(n * cfg.walks_per_node, dtype=np.int64)
    seeds = np.empty(n * cfg.walks_per_node, dtype=np.int64)
    k = 0
    for r in range(cfg.walks_per_node):
        for i in range(n):
            starts[k] = i
            seeds[k] = minstd_state("walk", cfg.rng_seed, r, i)
            k += 1
    array, lengths = walk_kernels.simulate_walks(
        indptr, indices, weights, starts, seeds, cfg.p, cfg.q, cfg.walk_length)
    return WalkSet(nodes=g.nodes, array=array, lengths=lengths,
                   weighted_degrees=g.weighted_degrees())


def init_embedding(n: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_for("sgns-init", seed)
    W = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))
    C = np.zeros((n, dim))
    return W, C


def train_skipgram(walkset: WalkSet, cfg: SkipGramConfig) -> EmbeddingMatrix:
    if walkset.n_walks == 0:
        raise ValidationError("walks must be nonempty")
    n = len(walkset.nodes)
    W, C = init_embedding(n, cfg.dim, cfg.rng_seed)
    pairs_per_pass = sgns.count_pairs(walkset.lengths, cfg.window)
    total_pairs = pairs_per_pass * cfg.epochs
    neg_weights = walkset.weighted_degrees ** NEG_TABLE_POWER
    neg_cum = np.cumsum(neg_weights)
    if total_pairs > 0 and neg_cum[-1] > 0:
        sgns.train(
            walkset.array, walkset.lengths, W, C, neg_cum,
            cfg.window, cfg.negatives_per_positive, cfg.epochs,
            cfg.learning_rate, total_pairs,
            minstd_state("sgns-neg", cfg.rng_seed),
        )
    return EmbeddingMatrix(students=walkset.nodes, vectors=W, context_vectors=C)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def sgns_loss_and_grads(w_u: np.ndarray, c_v: np.ndarray, c_negs: np.ndarray):
    """Objective and analytic gradients for one (center, context, negatives)
    triple: L = log sigmoid(w.v) + sum_k log sigmoid(-w.n_k). Reference used
    by the finite-difference gradient check."""
    sv = _sigmoid(float(w_u @ c_v))
    loss = np.log(sv)
    grad_w = (1.0 - sv) * c_v
    grad_v = (1.0 - sv) * w_u
    grad_negs = np.empty_like(c_negs)
    for k in range(c_negs.shape[0]):
        score = float(w_u @ c_negs[k])
        loss += np.log(_sigmoid(-score))
        grad_w = grad_w - _sigmoid(score) * c_negs[k]
        grad_negs[k] = -_sigmoid(score) * w_u
    return float(loss), grad_w, grad_v, grad_negs


def write_embedding(emb: EmbeddingMatrix, path) -> None:
    """CSV export: student_id,v0,...,v{dim-1}."""
    with open(path, "w", encoding="utf-8") as fh:
        header = ",".join(["student_id"] + [f"v{i}" for i in range(emb.dim)])
        fh.write(header + "\n")
        for i, sid in enumerate(emb.students):
            vals = ",".join(repr(float(x)) for x in emb.vectors[i])
            fh.write(f"{sid},{vals}\n")
