import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from strata.corpus import SubtokenStats
from strata.embedding import EmbeddingTable
from strata.vocab import (
    SweepRow,
    Vocabulary,
    best_cutoff,
    build_vocabulary,
    geometric_grid,
    read_vocabulary,
    sweep_cutoffs,
    write_sweep,
    write_vocabulary,
)


def norm_table(norms: dict[str, float]) -> EmbeddingTable:
    return EmbeddingTable.from_vectors({s: [v, 0.0] for s, v in norms.items()})


def test_l2_top_two():
    v = build_vocabulary("l2", 2, table=norm_table({"a": 1.0, "b": 3.0, "c": 2.0}))
    assert v.subtokens == ("b", "c")


def test_l2_ties_lexicographic():
    v = build_vocabulary("l2", 2, table=norm_table({"z": 1.0, "y": 1.0, "x": 0.5}))
    assert v.subtokens == ("y", "z")


def test_frequency_mode_uses_rank_order():
    stats = SubtokenStats.from_counter({"rare": 1, "get": 9, "set": 9})
    assert build_vocabulary("frequency", 2, stats=stats).subtokens == ("get", "set")


def test_all_mode():
    t = norm_table({"b": 1.0, "a": 2.0})
    v = build_vocabulary("all", table=t)
    assert v.n is None and set(v.subtokens) == {"a", "b"}


@pytest.mark.parametrize("n", [0, -1, 4])
def test_bad_n(n):
    with pytest.raises(ValueError):
        build_vocabulary("l2", n, table=norm_table({"a": 1.0, "b": 2.0, "c": 3.0}))


def test_missing_inputs():
    with pytest.raises(ValueError):
        build_vocabulary("l2", 1)
    with pytest.raises(ValueError):
        build_vocabulary("frequency", 1)
    with pytest.raises(ValueError):
        build_vocabulary("bogus", 1, table=norm_table({"a": 1.0}))


norm_maps = st.dictionaries(st.text("abcdefgh", min_size=1, max_size=3), st.floats(0, 100, allow_nan=False), min_size=2, max_size=30)


@given(norm_maps, st.data())
def test_l2_prefix_containment(norms, data):
    t = norm_table(norms)
    n1 = data.draw(st.integers(1, len(norms)))
    n2 = data.draw(st.integers(n1, len(norms)))
    small = set(build_vocabulary("l2", n1, table=t).subtokens)
    big = set(build_vocabulary("l2", n2, table=t).subtokens)
    assert small <= big
    assert len(small) == n1


@given(norm_maps, st.data())
def test_l2_members_dominate_non_members(norms, data):
    t = norm_table(norms)
    n = data.draw(st.integers(1, len(norms)))
    inside = set(build_vocabulary("l2", n, table=t).subtokens)
    tn = t.norms()
    outside = set(norms) - inside
    if inside and outside:
        assert min(tn[s] for s in inside) >= max(tn[s] for s in outside)


@given(norm_maps)
def test_l2_deterministic(norms):
    t = norm_table(norms)
    n = len(norms) // 2 + 1
    assert build_vocabulary("l2", n, table=t) == build_vocabulary("l2", n, table=t)


def test_vocab_file_round_trip(tmp_path):
    v = build_vocabulary("l2", 2, table=norm_table({"a": 1.0, "b": 3.0, "c": 2.0}))
    write_vocabulary(v, tmp_path / "v.txt")
    back = read_vocabulary(tmp_path / "v.txt")
    assert (back.mode, back.n, back.subtokens) == ("l2", 2, ("b", "c"))


def test_read_vocab_bad_header(tmp_path):
    (tmp_path / "v.txt").write_text("hello\n")
    with pytest.raises(ValueError):
        read_vocabulary(tmp_path / "v.txt")


def test_pool_is_sorted():
    assert Vocabulary("l2", 3, ("c", "a", "b")).pool == ("a", "b", "c")


def test_geometric_grid():
    assert geometric_grid(100) == [16, 32, 64, 100]
    assert geometric_grid(64) == [16, 32, 64]
    assert geometric_grid(10) == [10]


def test_sweep_records_failures_and_continues():
    t = norm_table({c: float(i) for i, c in enumerate("abcdefgh")})

    def evaluate(v: Vocabulary) -> float:
        if len(v) == 4:
            raise RuntimeError("boom")
        return 1.0 / len(v)

    rows = sweep_cutoffs("l2", [2, 4, 8, 99], evaluate, table=t)
    assert [r.n for r in rows] == [2, 4, 8, 99]
    assert rows[0].f1 == 0.5 and rows[2].f1 == 0.125
    assert rows[1].f1 is None and "boom" in rows[1].error
    assert rows[3].f1 is None
    assert best_cutoff(rows) == 8


def test_sweep_parallel_matches_serial():
    t = norm_table({c: float(i) for i, c in enumerate("abcdefgh")})
    ev = lambda v: float(len(v)) ** 0.5  # noqa: E731
    assert sweep_cutoffs("l2", [1, 2, 4], ev, table=t, jobs=3) == sweep_cutoffs("l2", [1, 2, 4], ev, table=t)


def test_best_cutoff_tie_smaller_n():
    assert best_cutoff([SweepRow(64, 0.2), SweepRow(16, 0.2), SweepRow(32, 0.3)]) == 16


def test_best_cutoff_all_failed():
    with pytest.raises(ValueError):
        best_cutoff([SweepRow(1, None, "x")])


def test_write_sweep(tmp_path):
    write_sweep([SweepRow(16, 0.123456), SweepRow(32, None, "e")], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "n,f1\n16,0.1235\n32,\n"
