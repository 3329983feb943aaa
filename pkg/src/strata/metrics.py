"""Subtoken F1, prediction change, targeted success and attack evaluation reports."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from strata.attack import PerturbationRecord
    from strata.corpus import MethodUnit
    from strata.surrogate import SurrogateModel


def subtoken_f1(predicted: Iterable[str], truth: Iterable[str]) -> tuple[float, float, float]:
    """Precision, recall and F1 of multiset subtoken overlap."""
    acc = MicroF1()
    acc.add(predicted, truth)
    return acc.precision, acc.recall, acc.f1


@dataclass
class MicroF1:
    """Micro-averaged subtoken F1: sums overlap and sizes before dividing."""

    overlap: int = 0
    n_pred: int = 0
    n_true: int = 0
    n: int = 0

    def add(self, predicted: Iterable[str], truth: Iterable[str]) -> None:
        truth_c = Counter(s.lower() for s in truth)
        if not truth_c:
            raise ValueError("empty reference")
        pred_c = Counter(s.lower() for s in predicted)
        self.overlap += sum((pred_c & truth_c).values())
        self.n_pred += sum(pred_c.values())
        self.n_true += sum(truth_c.values())
        self.n += 1

    @property
    def precision(self) -> float:
        return self.overlap / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.overlap / self.n_true if self.n_true else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


def prediction_change(pred_before: Iterable[str], pred_after: Iterable[str]) -> bool:
    return set(pred_before) != set(pred_after)


def targeted_success(pred_after: Iterable[str], target: str) -> bool:
    return target in set(pred_after)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    n_examples: int
    baseline_precision: float
    baseline_recall: float
    baseline_f1: float
    n_methods: int
    per_strategy: dict[str, float] = field(default_factory=dict)
    prediction_change_pct: float = 0.0
    targeted_success_pct: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def csv_row(self) -> str:
        ts = "" if self.targeted_success_pct is None else f"{self.targeted_success_pct:.4f}"
        return (f"{self.baseline_f1:.4f},{self.f1:.4f},{self.precision:.4f},{self.recall:.4f},"
                f"{self.n_examples},{self.prediction_change_pct:.4f},{ts}")

    CSV_HEADER = "baseline_f1,f1,precision,recall,n_examples,prediction_change_pct,targeted_success_pct"


def evaluate_attack(model: "SurrogateModel", methods: Sequence["MethodUnit"],
                    perturbations: Sequence["PerturbationRecord"]) -> EvalReport:
    """Clean and perturbed micro F1 over the attackable part of ``methods``."""
    from strata.surrogate import perturbed_units, predict_many

    by_id = {m.id: m for m in methods}
    dangling = sorted({r.method_id for r in perturbations if r.method_id not in by_id})
    if dangling:
        raise ValueError(f"perturbations reference unknown methods: {dangling[:20]}")
    clean_set = [m for m in methods if m.attackable]
    clean_preds = dict(zip((m.id for m in clean_set), predict_many(model, clean_set)))
    base = MicroF1()
    for m in clean_set:
        base.add(clean_preds[m.id], m.target_subtokens)

    # a record's method may be unattackable in a re-analysed copy; predict it anyway
    missing = [by_id[i] for i in dict.fromkeys(r.method_id for r in perturbations) if i not in clean_preds]
    clean_preds.update(zip((m.id for m in missing), predict_many(model, missing)))

    after = predict_many(model, perturbed_units(perturbations))
    overall = MicroF1()
    per: dict[str, MicroF1] = {}
    changed = 0
    targeted = hits = 0
    for rec, pred in zip(perturbations, after):
        truth = by_id[rec.method_id].target_subtokens
        overall.add(pred, truth)
        per.setdefault(rec.strategy, MicroF1()).add(pred, truth)
        changed += prediction_change(clean_preds[rec.method_id], pred)
        if rec.target is not None:
            targeted += 1
            hits += targeted_success(pred, rec.target)
    n = len(perturbations)
    return EvalReport(
        precision=overall.precision,
        recall=overall.recall,
        f1=overall.f1,
        n_examples=n,
        baseline_precision=base.precision,
        baseline_recall=base.recall,
        baseline_f1=base.f1,
        n_methods=len(clean_set),
        per_strategy={k: v.f1 for k, v in sorted(per.items())},
        prediction_change_pct=100.0 * changed / n if n else 0.0,
        targeted_success_pct=100.0 * hits / targeted if targeted else None,
    )


def clean_f1(model: "SurrogateModel", methods: Sequence["MethodUnit"]) -> float:
    from strata.surrogate import predict_many

    acc = MicroF1()
    for m, pred in zip(methods, predict_many(model, methods)):
        acc.add(pred, m.target_subtokens)
    return acc.f1


def write_report(report: EvalReport, path: Path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")
