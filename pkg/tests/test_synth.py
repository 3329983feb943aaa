from collections import Counter

import numpy as np
from scipy.stats import spearmanr

from strata.corpus import compute_stats, parse_method
from strata.experiment import units
from strata.javaparse import lex
from strata.synth import SynthConfig, build_universe, generate


def test_generate_deterministic():
    a = generate(SynthConfig(n_methods=50, seed=3))
    b = generate(SynthConfig(n_methods=50, seed=3))
    assert a == b


def test_splits_and_seeds_differ():
    train = generate(SynthConfig(n_methods=100, seed=1), "train")
    test = generate(SynthConfig(n_methods=100, seed=1), "test")
    other = generate(SynthConfig(n_methods=100, seed=2), "train")
    assert not {r["id"] for r in train} & {r["id"] for r in test}
    assert not {r["source"] for r in train} & {r["source"] for r in test}
    assert [r["source"] for r in train] != [r["source"] for r in other]


def test_records_are_valid_java_methods(small_records):
    for r in small_records:
        lex(r["source"])
        m = parse_method(r["id"], r["source"])
        assert m.target_name == r["name"]


def test_most_methods_attackable(small_methods):
    share = np.mean([m.attackable for m in small_methods])
    assert share > 0.8


def test_subtoken_frequencies_heavy_tailed(small_methods):
    stats = compute_stats(small_methods)
    counts = np.array(sorted(stats.counts.values(), reverse=True), dtype=float)
    top = counts[: len(counts) // 10].sum() / counts.sum()
    assert top > 0.5
    ranks = np.arange(1, len(counts) + 1)
    assert spearmanr(ranks, counts).statistic < -0.9


def test_universe_shared_across_seeds():
    u1 = build_universe(2021)
    u2 = build_universe(2021)
    assert u1 is u2 or u1 == u2
    assert build_universe(7).pool != u1.pool


def test_names_carry_topic_signal():
    recs = generate(SynthConfig(n_methods=400, seed=5))
    ms = units(recs)
    # name subtokens should re-occur in the body more often than chance
    hits = sum(any(s in {x for subs in m.identifier_subtokens for x in subs} for s in m.target_subtokens) for m in ms)
    assert hits / len(ms) > 0.3
