"""Subtoken embedding tables, token composition, norms and drift between snapshots."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from strata.corpus import SubtokenStats

MAX_SUBTOKENS = 5
EMB_MAGIC = "STRATA-EMB"
FORMAT_VERSION = "v1"


class EmbeddingTable(Mapping[str, np.ndarray]):
    """Immutable mapping of subtoken to vector; absent subtokens map to ``unk``.

    Rows live in one ``(n, dim)`` matrix ordered like ``subtokens``.
    """

    def __init__(self, subtokens: Sequence[str], matrix: np.ndarray, unk: np.ndarray | None = None) -> None:
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != len(subtokens):
            raise ValueError("matrix shape does not match subtoken count")
        if matrix.shape[1] < 1:
            raise ValueError("dim must be positive")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("non-finite embedding entry")
        dim = matrix.shape[1]
        unk = np.zeros(dim) if unk is None else np.array(unk, dtype=np.float64, copy=True)
        if unk.shape != (dim,):
            raise ValueError("unk vector has wrong dimension")
        matrix.setflags(write=False)
        unk.setflags(write=False)
        self.subtokens = tuple(subtokens)
        self.index = {s: i for i, s in enumerate(self.subtokens)}
        if len(self.index) != len(self.subtokens):
            raise ValueError("duplicate subtokens")
        self.matrix = matrix
        self.unk_vector = unk

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __getitem__(self, subtoken: str) -> np.ndarray:
        return self.matrix[self.index[subtoken]]

    def __iter__(self) -> Iterator[str]:
        return iter(self.subtokens)

    def __len__(self) -> int:
        return len(self.subtokens)

    def __contains__(self, subtoken: object) -> bool:
        return subtoken in self.index

    def lookup(self, subtoken: str) -> np.ndarray:
        i = self.index.get(subtoken)
        return self.unk_vector if i is None else self.matrix[i]

    def norms(self) -> dict[str, float]:
        values = np.linalg.norm(self.matrix, axis=1)
        return dict(zip(self.subtokens, values.tolist()))

    @classmethod
    def from_vectors(cls, vectors: Mapping[str, Sequence[float]], unk: Sequence[float] | None = None) -> "EmbeddingTable":
        keys = list(vectors)
        return cls(keys, np.array([vectors[k] for k in keys], dtype=np.float64), unk)

    @classmethod
    def random(cls, subtokens: Iterable[str], dim: int, init_range: float, rng: np.random.Generator) -> "EmbeddingTable":
        keys = sorted(set(subtokens))
        matrix = rng.uniform(-init_range, init_range, size=(len(keys), dim))
        unk = rng.uniform(-init_range, init_range, size=dim)
        return cls(keys, matrix, unk)


def compose_token(subtokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Token vector: sum of the vectors of the first five subtokens."""
    if not subtokens:
        raise ValueError("empty subtoken list")
    out = np.zeros(table.dim)
    for s in subtokens[:MAX_SUBTOKENS]:
        out = out + table.lookup(s)
    return out


def l2_norm(vec: Sequence[float] | np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(vec, dtype=np.float64)))


# -- drift --------------------------------------------------------------------


@dataclass(frozen=True)
class DriftEntry:
    l2_distance: float
    pre_norm: float
    post_norm: float
    count: int


@dataclass(frozen=True)
class DriftReport:
    per_subtoken: dict[str, DriftEntry]
    fraction_below: dict[float, float]

    def rows(self) -> list[tuple[str, int, float, float, float]]:
        """Rows for ``drift.csv`` ordered by descending count then subtoken."""
        items = sorted(self.per_subtoken.items(), key=lambda kv: (-kv[1].count, kv[0]))
        return [(s, e.count, e.l2_distance, e.pre_norm, e.post_norm) for s, e in items]


def drift(pre: EmbeddingTable, post: EmbeddingTable, stats: SubtokenStats,
          thresholds: Iterable[float] = ()) -> DriftReport:
    """Per-subtoken Euclidean distance between two snapshots, joined with counts."""
    if pre.dim != post.dim:
        raise ValueError(f"dimension mismatch: {pre.dim} vs {post.dim}")
    if set(pre.subtokens) != set(post.subtokens):
        offenders = sorted(set(pre.subtokens) ^ set(post.subtokens))
        raise ValueError(f"key-set mismatch: {offenders[:20]}")
    order = [post.index[s] for s in pre.subtokens]
    post_m = post.matrix[order]
    dist = np.linalg.norm(post_m - pre.matrix, axis=1)
    pre_n = np.linalg.norm(pre.matrix, axis=1)
    post_n = np.linalg.norm(post_m, axis=1)
    per = {
        s: DriftEntry(float(dist[i]), float(pre_n[i]), float(post_n[i]), stats.counts.get(s, 0))
        for i, s in enumerate(pre.subtokens)
    }
    levels = sorted({0.05, *thresholds})
    total = len(dist)
    fractions = {t: (float(np.count_nonzero(dist < t)) / total if total else 0.0) for t in levels}
    return DriftReport(per, fractions)


# -- file format --------------------------------------------------------------


def fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_embeddings(table: EmbeddingTable, fh: IO[str]) -> None:
    fh.write(f"{EMB_MAGIC} {FORMAT_VERSION} {table.dim} {len(table)}\n")
    fh.write("UNK " + " ".join(fmt(x) for x in table.unk_vector) + "\n")
    for s in sorted(table.subtokens):
        fh.write(s + " " + " ".join(fmt(x) for x in table[s]) + "\n")


def read_embeddings(fh: IO[str]) -> EmbeddingTable:
    header = fh.readline().split()
    if len(header) != 4 or header[0] != EMB_MAGIC:
        raise ValueError("not an embedding file")
    if header[1] != FORMAT_VERSION:
        raise ValueError(f"unsupported embedding format version {header[1]}")
    dim, count = int(header[2]), int(header[3])
    unk_line = fh.readline().split()
    if not unk_line or unk_line[0] != "UNK" or len(unk_line) != dim + 1:
        raise ValueError("malformed UNK line")
    unk = np.array([float(x) for x in unk_line[1:]])
    keys, rows = [], []
    for _ in range(count):
        parts = fh.readline().split()
        if len(parts) != dim + 1:
            raise ValueError(f"malformed embedding row {len(keys) + 3}")
        keys.append(parts[0])
        rows.append([float(x) for x in parts[1:]])
    matrix = np.array(rows, dtype=np.float64).reshape(count, dim)
    return EmbeddingTable(keys, matrix, unk)


def save_embeddings(table: EmbeddingTable, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_embeddings(table, fh)


def load_embeddings(path: Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        return read_embeddings(fh)
