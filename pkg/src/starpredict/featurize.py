"""Feature assembly: statistical counts, regularity histograms, embeddings.

One call produces the full per-student table for a cutoff week. Everything
downstream of the cutoff is invisible: events are truncated first, the
co-occurrence graph is rebuilt from the truncated check-ins, and the
embedding is retrained on that graph. Labels play no part here, so one
table can be shared across folds and ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cograph, embed, ingest, regularity
from .errors import ValidationError
from .ingest import CohortBundle
from .model import FeatureTable, Stream, StudentId

STAT_PREFIX = "stat_"
REG_LMS_PREFIX = "reg_lms_"
REG_LIB_PREFIX = "reg_lib_"
EMB_PREFIX = "emb_"


@dataclass(frozen=True)
class FeatureConfig:
    regularity: regularity.RegularityConfig = regularity.RegularityConfig()
    cooc: cograph.CoocConfig = cograph.CoocConfig()
    walks: embed.WalkConfig = embed.WalkConfig()
    skipgram: embed.SkipGramConfig = embed.SkipGramConfig()


def feature_column_names(cfg: FeatureConfig) -> list[str]:
    names = ingest.stat_feature_names(STAT_PREFIX)
    names += regularity.feature_names(cfg.regularity, REG_LMS_PREFIX)
    names += regularity.feature_names(cfg.regularity, REG_LIB_PREFIX)
    names += [f"{EMB_PREFIX}v{i}" for i in range(cfg.skipgram.dim)]
    return names


def library_visits(bundle: CohortBundle, cutoff: float) -> dict[StudentId, np.ndarray]:
    """Sorted raw check-in times per student, truncated at cutoff."""
    arrays = bundle.arrays
    mask = (arrays.stream == 1) & (arrays.timestamps < cutoff)
    out: dict[StudentId, np.ndarray] = {}
    idx = arrays.student_idx[mask]
    ts = arrays.timestamps[mask]
    order = np.lexsort((ts, idx))
    idx, ts = idx[order], ts[order]
    bounds = np.searchsorted(idx, np.arange(len(arrays.students) + 1))
    for i, sid in enumerate(arrays.students):
        chunk = ts[bounds[i]:bounds[i + 1]]
        if chunk.shape[0]:
            out[sid] = chunk
    return out


def build_graph(bundle: CohortBundle, cutoff: float,
                cfg: cograph.CoocConfig) -> cograph.CoocGraph:
    """Co-occurrence graph over the labeled roster at a cutoff; students
    with no check-ins stay as isolated nodes."""
    visits = library_visits(bundle, cutoff)
    roster = bundle.label_students
    known = set(roster)
    visits = {s: t for s, t in visits.items() if s in known}
    return cograph.build(visits, cfg, roster=roster)


def embedding_block(emb_matrix: embed.EmbeddingMatrix,
                    students: list[StudentId], dim: int) -> np.ndarray:
    """Rows aligned to `students`; anyone absent from the embedding (not a
    graph node) gets the zero vector."""
    out = np.zeros((len(students), dim), dtype=np.float64)
    for i, sid in enumerate(students):
        if sid in emb_matrix:
            out[i] = emb_matrix.vector(sid)
    return out


def assemble_features(bundle: CohortBundle, cutoff_week: int,
                      cfg: FeatureConfig) -> FeatureTable:
    cal = bundle.calendar
    cutoff = cal.week_cutoff(cutoff_week)
    students = bundle.label_students
    if not students:
        raise ValidationError("bundle has no labeled students")
    arrays = bundle.arrays

    stat = ingest.statistical_features_all(arrays, students, cal, cutoff)
    reg_parts = []
    for stream in (Stream.LMS, Stream.LIBRARY_CHECKIN):
        bits = ingest.binarize_all(arrays, students, stream, cal, cutoff)
        reg_parts.append(regularity.extract_matrix(bits, cfg.regularity))
    graph = build_graph(bundle, cutoff, cfg.cooc)
    walkset = embed.generate_walks(graph, cfg.walks)
    emb_matrix = embed.train_skipgram(walkset, cfg.skipgram)
    emb = embedding_block(emb_matrix, students, cfg.skipgram.dim)

    matrix = np.concatenate([stat] + reg_parts + [emb], axis=1)
    names = feature_column_names(cfg)
    n_stat = stat.shape[1]
    n_reg = reg_parts[0].shape[1] + reg_parts[1].shape[1]
    blocks = {
        "statistical": slice(0, n_stat),
        "regularity": slice(n_stat, n_stat + n_reg),
        "embedding": slice(n_stat + n_reg, matrix.shape[1]),
    }
    return FeatureTable(students=students, matrix=matrix,
                        column_names=names, blocks=blocks)


def write_features(table: FeatureTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["student_id"] + table.column_names) + "\n")
        for i, sid in enumerate(table.students):
            row = ",".join(repr(float(x)) for x in table.matrix[i])
            fh.write(f"{sid},{row}\n")


def _blocks_from_names(names: list[str]) -> dict[str, slice]:
    def block_of(name: str) -> str:
        if name.startswith(STAT_PREFIX):
            return "statistical"
        if name.startswith((REG_LMS_PREFIX, REG_LIB_PREFIX)):
            return "regularity"
        if name.startswith(EMB_PREFIX):
            return "embedding"
        raise ValidationError(f"column {name!r} belongs to no known block")

    blocks: dict[str, slice] = {}
    pos = 0
    while pos < len(names):
        b = block_of(names[pos])
        stop = pos
        while stop < len(names) and block_of(names[stop]) == b:
            stop += 1
        if b in blocks:
            raise ValidationError(f"block {b!r} is not contiguous")
        blocks[b] = slice(pos, stop)
        pos = stop
    return blocks


def read_features(path) -> FeatureTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "student_id":
            raise ValidationError(f"{path}: not a feature table")
        names = header[1:]
        students: list[StudentId] = []
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise ValidationError(f"{path}: ragged row for {parts[0]!r}")
            students.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(names)))
    return FeatureTable(students=students, matrix=matrix, column_names=names,
                        blocks=_blocks_from_names(names))
