"""Attack vocabularies (all / top-n by L2 norm / top-n by frequency) and cutoff sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

from strata.corpus import SubtokenStats
from strata.embedding import EmbeddingTable

log = logging.getLogger(__name__)

MODES = ("all", "l2", "frequency")
VOCAB_MAGIC = "STRATA-VOCAB"


@dataclass(frozen=True)
class Vocabulary:
    mode: str
    n: int | None
    subtokens: tuple[str, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown vocabulary mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.subtokens)

    @cached_property
    def pool(self) -> tuple[str, ...]:
        """Sorted subtokens; replacement draws index into this so equal sets draw equally."""
        return tuple(sorted(self.subtokens))


def build_vocabulary(mode: str, n: int | None = None, table: EmbeddingTable | None = None,
                     stats: SubtokenStats | None = None, provenance: str = "") -> Vocabulary:
    if mode == "all":
        if table is not None:
            subs = tuple(sorted(table.subtokens))
        elif stats is not None:
            subs = stats.rank_order
        else:
            raise ValueError("mode 'all' needs an embedding table or subtoken stats")
        return Vocabulary("all", None, subs, provenance)
    if n is None or n < 1:
        raise ValueError("n must be a positive integer")
    if mode == "l2":
        if table is None:
            raise ValueError("mode 'l2' requires an embedding table")
        norms = table.norms()
        ranked = sorted(norms, key=lambda s: (-norms[s], s))
    elif mode == "frequency":
        if stats is None:
            raise ValueError("mode 'frequency' requires subtoken stats")
        ranked = list(stats.rank_order)
    else:
        raise ValueError(f"unknown vocabulary mode {mode!r}")
    if n > len(ranked):
        raise ValueError(f"n={n} exceeds population size {len(ranked)}")
    return Vocabulary(mode, n, tuple(ranked[:n]), provenance)


def write_vocabulary(vocab: Vocabulary, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        n = "none" if vocab.n is None else str(vocab.n)
        fh.write(f"{VOCAB_MAGIC} v1 {vocab.mode} {n}\n")
        for s in vocab.subtokens:
            fh.write(s + "\n")


def read_vocabulary(path: Path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != VOCAB_MAGIC:
            raise ValueError(f"{path}: not a vocabulary file")
        if header[1] != "v1":
            raise ValueError(f"{path}: unsupported vocabulary version {header[1]}")
        subs = tuple(line.strip() for line in fh if line.strip())
    n = None if header[3] == "none" else int(header[3])
    return Vocabulary(header[2], n, subs, provenance=str(path))


def geometric_grid(population: int, start: int = 16) -> list[int]:
    """Powers of two from ``start`` below ``population``, then ``population`` itself."""
    grid = []
    n = start
    while n < population:
        grid.append(n)
        n *= 2
    grid.append(population)
    return grid


@dataclass(frozen=True)
class SweepRow:
    n: int
    f1: float | None
    error: str | None = None


def sweep_cutoffs(mode: str, n_values: Sequence[int], evaluate: Callable[[Vocabulary], float],
                  table: EmbeddingTable | None = None, stats: SubtokenStats | None = None,
                  jobs: int = 1) -> list[SweepRow]:
    """F1 under a 5-same attack for each cutoff; rows follow the order of ``n_values``.

    ``evaluate`` runs the attack over the evaluation set with the given
    vocabulary and returns the perturbed micro F1. A failing cutoff is recorded
    and the sweep continues.
    """

    def one(n: int) -> SweepRow:
        try:
            vocab = build_vocabulary(mode, n, table=table, stats=stats)
            return SweepRow(n, float(evaluate(vocab)))
        except Exception as exc:  # recorded per row, sweep keeps going
            log.warning("sweep n=%d failed: %s", n, exc)
            return SweepRow(n, None, str(exc))

    if jobs > 1 and len(n_values) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, n_values))
    return [one(n) for n in n_values]


def best_cutoff(rows: Iterable[SweepRow]) -> int:
    """Sweep argmin; ties go to the smaller n."""
    ok = [r for r in rows if r.f1 is not None]
    if not ok:
        raise ValueError("no successful sweep rows")
    return min(ok, key=lambda r: (r.f1, r.n)).n


def write_sweep(rows: Iterable[SweepRow], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,f1\n")
        for r in rows:
            fh.write(f"{r.n},{'' if r.f1 is None else format(r.f1, '.4f')}\n")
