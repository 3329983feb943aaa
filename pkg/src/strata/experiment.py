"""Pipeline helpers shared by the CLI and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from strata.attack import AttackConfig, PerturbationRecord, attack_corpus
from strata.corpus import MethodUnit, SubtokenStats, compute_stats, parse_method
from strata.embedding import DriftReport
from strata.metrics import EvalReport, evaluate_attack
from strata.surrogate import SurrogateModel
from strata.synth import SynthConfig, generate
from strata.vocab import SweepRow, Vocabulary, build_vocabulary, geometric_grid, sweep_cutoffs


def units(records: Sequence[dict], analyze: bool = True) -> list[MethodUnit]:
    return [parse_method(r["id"], r["source"], r["name"], analyze=analyze) for r in records]


@dataclass
class DeskCorpus:
    train: list[MethodUnit]
    test: list[MethodUnit]
    stats: SubtokenStats


def desk_corpus(seed: int, n_train: int = 2000, n_test: int = 500, **overrides) -> DeskCorpus:
    train = units(generate(SynthConfig(n_methods=n_train, seed=seed, **overrides), "train"))
    test = units(generate(SynthConfig(n_methods=n_test, seed=seed, **overrides), "test"))
    return DeskCorpus(train, test, compute_stats(train))


def attack_eval(model: SurrogateModel, methods: Sequence[MethodUnit], vocab: Vocabulary | None,
                strategy: str, seed: int, k: int = 1, target: str | None = None) -> EvalReport:
    records = attack_corpus(methods, AttackConfig(strategy, vocab, seed, target), k)
    return evaluate_attack(model, methods, records)


def sweep(model: SurrogateModel, methods: Sequence[MethodUnit], mode: str, seed: int,
          n_values: Sequence[int] | None = None, stats: SubtokenStats | None = None) -> list[SweepRow]:
    table = model.embeddings
    if n_values is None:
        population = len(table) if mode == "l2" else len(stats)
        n_values = geometric_grid(population)
    attackable = [m for m in methods if m.attackable]

    def evaluate(vocab: Vocabulary) -> float:
        return attack_eval(model, attackable, vocab, "5-same", seed).f1

    return sweep_cutoffs(mode, n_values, evaluate, table=table, stats=stats)


def drift_correlation(report: DriftReport) -> tuple[float, list[float]]:
    """Spearman rho of count vs drift, and median drift per count quintile."""
    items = sorted(report.per_subtoken.items(), key=lambda kv: (kv[1].count, kv[0]))
    counts = np.array([e.count for _, e in items], dtype=float)
    dist = np.array([e.l2_distance for _, e in items])
    rho = float(spearmanr(counts, dist).statistic)
    medians = [float(np.median(chunk)) for chunk in np.array_split(dist, 5)]
    return rho, medians


def record_ids(records: Sequence[PerturbationRecord]) -> list[str]:
    return [r.method_id for r in records]
