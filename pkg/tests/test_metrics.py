import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strata.attack import AttackConfig, attack_corpus
from strata.metrics import (
    EvalReport,
    MicroF1,
    clean_f1,
    evaluate_attack,
    prediction_change,
    subtoken_f1,
    targeted_success,
)
from strata.vocab import Vocabulary


def test_f1_perfect():
    assert subtoken_f1(["get", "value"], ["get", "value"]) == (1.0, 1.0, 1.0)


def test_f1_half():
    assert subtoken_f1(["get", "index"], ["get", "value"]) == (0.5, 0.5, 0.5)


def test_f1_empty_prediction():
    assert subtoken_f1([], ["get"]) == (0.0, 0.0, 0.0)


def test_f1_empty_reference():
    with pytest.raises(ValueError, match="empty reference"):
        subtoken_f1(["get"], [])


def test_f1_multiset_overlap():
    # {a,a,b} vs {a,b,b}: overlap 2, P = R = 2/3
    p, r, f = subtoken_f1(["a", "a", "b"], ["a", "b", "b"])
    assert (p, r, f) == pytest.approx((2 / 3, 2 / 3, 2 / 3))


def test_micro_is_not_macro():
    acc = MicroF1()
    acc.add(["a"], ["a"])
    acc.add(["x", "y", "z"], ["b"])
    # micro: overlap 1, pred 4, true 2
    assert acc.precision == 0.25 and acc.recall == 0.5
    assert acc.f1 == pytest.approx(2 * 0.25 * 0.5 / 0.75)


words = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=6)


def brute_overlap(pred, truth) -> int:
    """Greedy one-to-one matching, independent of Counter intersection."""
    remaining = list(truth)
    hit = 0
    for p in pred:
        if p in remaining:
            remaining.remove(p)
            hit += 1
    return hit


@given(st.lists(st.tuples(words, words.filter(bool)), min_size=1, max_size=6))
def test_micro_matches_brute_force(pairs):
    acc = MicroF1()
    for p, t in pairs:
        acc.add(p, t)
    ov = sum(brute_overlap(p, t) for p, t in pairs)
    npred = sum(len(p) for p, _ in pairs)
    ntrue = sum(len(t) for _, t in pairs)
    prec = ov / npred if npred else 0.0
    rec = ov / ntrue
    f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    assert acc.f1 == pytest.approx(f)
    assert 0.0 <= acc.f1 <= 1.0


@given(words, words.filter(bool))
def test_f1_harmonic_mean_invariant(p, t):
    prec, rec, f = subtoken_f1(p, t)
    assert f == pytest.approx(2 * prec * rec / (prec + rec) if prec + rec else 0.0)


def test_prediction_change_cases():
    assert not prediction_change({"get", "value"}, {"value", "get"})
    assert prediction_change({"product"}, {"get", "identify"})
    assert not prediction_change(["a", "a", "b"], ["a", "b"])


def test_targeted_success_cases():
    assert targeted_success({"get", "identify"}, "identify")
    assert not targeted_success({"get"}, "identify")


def test_csv_row_and_json():
    r = EvalReport(0.5, 0.25, 1 / 3, 10, 0.9, 0.8, 0.85, 12, {"5-same": 1 / 3}, 40.0, None)
    assert r.csv_row() == "0.8500,0.3333,0.5000,0.2500,10,40.0000,"
    assert json.loads(r.to_json())["n_examples"] == 10
    assert len(EvalReport.CSV_HEADER.split(",")) == len(r.csv_row().split(","))


def test_evaluate_attack_report(small_model, small_methods):
    methods = small_methods[:80]
    vocab = Vocabulary("all", None, tuple(sorted(small_model.embeddings.subtokens)))
    recs = attack_corpus(methods, AttackConfig("5-same", vocab, seed=3))
    rep = evaluate_attack(small_model, methods, recs)
    attackable = [m for m in methods if m.attackable]
    assert rep.n_examples == len(recs) == len(attackable)
    assert rep.baseline_f1 == pytest.approx(clean_f1(small_model, attackable))
    assert set(rep.per_strategy) == {"5-same"}
    assert 0 <= rep.prediction_change_pct <= 100
    assert rep.targeted_success_pct is None


def test_evaluate_attack_dangling(small_model, small_methods):
    vocab = Vocabulary("all", None, ("zz",))
    recs = attack_corpus(small_methods[:5], AttackConfig("single", vocab))
    with pytest.raises(ValueError, match="unknown methods"):
        evaluate_attack(small_model, small_methods[5:10], recs)


def test_evaluate_targeted_percent(small_model, small_methods):
    methods = small_methods[:40]
    recs = attack_corpus(methods, AttackConfig("5-same", None, target="get"))
    rep = evaluate_attack(small_model, methods, recs)
    from strata.surrogate import perturbed_units, predict_many

    preds = predict_many(small_model, perturbed_units(recs))
    expected = 100.0 * sum("get" in p for p in preds) / len(preds)
    assert rep.targeted_success_pct == pytest.approx(expected)
