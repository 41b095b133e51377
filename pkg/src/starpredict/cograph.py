"""Student co-occurrence network built from library check-in times.

Two students co-occur when their visit times differ by at most ``delta``
seconds. Pair counts accumulate per unordered student pair and edges below
the ``sigma`` weight floor are dropped. Rapid re-taps by one student are
collapsed into a single visit first so they cannot inflate pair weights.
Only library check-ins feed this module; LMS activity never does.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .kernels import cooc
from .model import StudentId

DEFAULT_DELTA = 30.0
DEFAULT_SIGMA = 2


@dataclass(frozen=True)
class CoocConfig:
    """Co-occurrence thresholds.

    visit_collapse defaults to delta: a re-tap inside the co-occurrence
    window is the same visit.
    """

    delta: float = DEFAULT_DELTA
    sigma: int = DEFAULT_SIGMA
    visit_collapse: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if self.sigma < 1:
            raise ValidationError(f"sigma must be >= 1, got {self.sigma}")
        if self.visit_collapse is not None and self.visit_collapse < 0:
            raise ValidationError("visit_collapse must be >= 0")

    @property
    def collapse_seconds(self) -> float:
        return self.delta if self.visit_collapse is None else self.visit_collapse


def collapse_visits(checkins: Sequence[float], visit_collapse: float) -> np.ndarray:
    """Merge chains of same-student check-ins into visits, keeping the
    earliest time of each chain. A chain extends while consecutive raw
    check-ins are within visit_collapse seconds of each other."""
    times = np.asarray(checkins, dtype=np.float64)
    if times.shape[0] == 0:
        return times
    if np.any(np.diff(times) < 0):
        raise ValidationError("check-in times must be sorted")
    keep = np.empty(times.shape[0], dtype=bool)
    keep[0] = True
    np.greater(np.diff(times), visit_collapse, out=keep[1:])
    return times[keep]


@dataclass(eq=False)
class CoocGraph:
    """Undirected weighted graph over the full student roster.

    nodes is sorted; edge arrays reference node positions with
    edge_u < edge_v and weights >= the sigma used at build time. Students
    without surviving edges stay present as isolated nodes.
    """

    nodes: tuple[StudentId, ...]
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    _csr: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if list(self.nodes) != sorted(self.nodes):
            raise ValidationError("graph nodes must be sorted")
        if not (self.edge_u.shape == self.edge_v.shape == self.edge_w.shape):
            raise ValidationError("edge arrays must share a shape")
        if self.edge_u.shape[0] and not np.all(self.edge_u < self.edge_v):
            raise ValidationError("edges must satisfy u < v (no self-loops)")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(self.edge_w.shape[0])

    def edges(self) -> Iterator[tuple[StudentId, StudentId, int]]:
        for i in range(self.n_edges):
            yield (self.nodes[self.edge_u[i]], self.nodes[self.edge_v[i]],
                   int(self.edge_w[i]))

    def weight(self, u: StudentId, v: StudentId) -> int:
        if u == v:
            return 0
        try:
            a = self.nodes.index(u)
            b = self.nodes.index(v)
        except ValueError:
            return 0
        if a > b:
            a, b = b, a
        hit = (self.edge_u == a) & (self.edge_v == b)
        idx = np.nonzero(hit)[0]
        return int(self.edge_w[idx[0]]) if idx.shape[0] else 0

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, indices, weights) with each neighbor list sorted."""
        if self._csr is None:
            n = self.n_nodes
            src = np.concatenate([self.edge_u, self.edge_v])
            dst = np.concatenate([self.edge_v, self.edge_u])
            w = np.concatenate([self.edge_w, self.edge_w]).astype(np.float64)
            order = np.lexsort((dst, src))
            src, dst, w = src[order], dst[order], w[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr[1:], src, 1)
            np.cumsum(indptr, out=indptr)
            self._csr = (indptr, dst.astype(np.int64), w)
        return self._csr

    def weighted_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.float64)
        np.add.at(deg, self.edge_u, self.edge_w)
        np.add.at(deg, self.edge_v, self.edge_w)
        return deg

    def neighbors(self, u: StudentId) -> list[tuple[StudentId, int]]:
        idx = self.nodes.index(u)
        indptr, indices, w = self.csr()
        lo, hi = indptr[idx], indptr[idx + 1]
        return [(self.nodes[indices[t]], int(w[t])) for t in range(lo, hi)]


@dataclass(frozen=True)
class DegreeStats:
    node_count: int
    isolated_count: int
    edge_count: int
    weight_histogram: dict[int, int]


def build(visits: Mapping[StudentId, Sequence[float]], cfg: CoocConfig,
          roster: Sequence[StudentId] | None = None) -> CoocGraph:
    """Count within-delta visit pairs across students and keep edges with
    weight >= sigma. visits maps each student to their sorted check-in
    times; roster (defaults to the visit keys) fixes the node set."""
    if roster is None:
        roster = list(visits.keys())
    nodes = tuple(sorted(roster))
    index = {s: i for i, s in enumerate(nodes)}
    unknown = sorted(set(visits) - set(nodes))
    if unknown:
        raise ValidationError(f"visits for students outside roster: {unknown[:5]}")

    collapse = cfg.collapse_seconds
    all_times = []
    all_owners = []
    for sid in sorted(visits):
        vt = collapse_visits(visits[sid], collapse)
        if vt.shape[0]:
            all_times.append(vt)
            all_owners.append(np.full(vt.shape[0], index[sid], dtype=np.int64))
    if all_times:
        times = np.concatenate(all_times)
        owners = np.concatenate(all_owners)
        order = np.argsort(times, kind="stable")
        times = times[order]
        owners = owners[order]
        pu, pv = cooc.count_pairs(times, owners, cfg.delta)
    else:
        pu = pv = np.empty(0, dtype=np.int64)

    n = len(nodes)
    if pu.shape[0]:
        keys = pu * np.int64(n) + pv
        uniq, counts = np.unique(keys, return_counts=True)
        keep = counts >= cfg.sigma
        uniq, counts = uniq[keep], counts[keep]
        edge_u = (uniq // n).astype(np.int32)
        edge_v = (uniq % n).astype(np.int32)
        edge_w = counts.astype(np.int64)
    else:
        edge_u = np.empty(0, dtype=np.int32)
        edge_v = np.empty(0, dtype=np.int32)
        edge_w = np.empty(0, dtype=np.int64)
    return CoocGraph(nodes=nodes, edge_u=edge_u, edge_v=edge_v, edge_w=edge_w)


def degree_stats(g: CoocGraph) -> DegreeStats:
    touched = np.zeros(g.n_nodes, dtype=bool)
    touched[g.edge_u] = True
    touched[g.edge_v] = True
    hist: dict[int, int] = {}
    for w in g.edge_w.tolist():
        hist[w] = hist.get(w, 0) + 1
    return DegreeStats(
        node_count=g.n_nodes,
        isolated_count=int((~touched).sum()),
        edge_count=g.n_edges,
        weight_histogram=hist,
    )


def write_edges(g: CoocGraph, path) -> None:
    """Edge-list export: one `u,v,w` row per edge, header included."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("u,v,w\n")
        for u, v, w in g.edges():
            fh.write(f"{u},{v},{w}\n")
