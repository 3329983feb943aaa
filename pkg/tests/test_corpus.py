import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strata.corpus import (
    IngestConfig,
    IngestReport,
    compute_stats,
    ingest_corpus,
    join_subtokens,
    parse_method,
    read_stats,
    split_identifier,
    write_methods_jsonl,
    write_stats,
)


def reference_split(identifier: str) -> list[str]:
    """Character-at-a-time splitter used as an independent oracle."""
    parts, cur = [], ""
    for i, c in enumerate(identifier):
        if c in "_$":
            if cur:
                parts.append(cur)
            cur = ""
            continue
        if cur:
            p = cur[-1]
            nxt = identifier[i + 1] if i + 1 < len(identifier) else ""
            boundary = (
                (p.islower() and c.isupper())
                or (p.isalpha() and c.isdigit())
                or (p.isdigit() and c.isalpha())
                or (p.isupper() and c.isupper() and nxt.islower())
            )
            if boundary:
                parts.append(cur)
                cur = ""
        cur += c
    if cur:
        parts.append(cur)
    return [p.lower() for p in parts]


GOLDEN = [
    ("camelCase", ["camel", "case"]),
    ("under_scores", ["under", "scores"]),
    ("x", ["x"]),
    ("HTTPServer2", ["http", "server", "2"]),
    ("getValue", ["get", "value"]),
    ("XMLHttpRequest", ["xml", "http", "request"]),
    ("parseHTML", ["parse", "html"]),
    ("MAX_VALUE", ["max", "value"]),
    ("__init__", ["init"]),
    ("$jacocoData", ["jacoco", "data"]),
    ("a$b", ["a", "b"]),
    ("utf8Decoder", ["utf", "8", "decoder"]),
    ("sha256", ["sha", "256"]),
    ("int2str", ["int", "2", "str"]),
    ("Vector3D", ["vector", "3", "d"]),
    ("ABc", ["a", "bc"]),
    ("i", ["i"]),
    ("IOError", ["io", "error"]),
    ("snake_case_with_CAPS", ["snake", "case", "with", "caps"]),
    ("getX", ["get", "x"]),
    ("toURLString", ["to", "url", "string"]),
    ("value_2", ["value", "2"]),
    ("mixed_camelCase__x", ["mixed", "camel", "case", "x"]),
    ("ALLCAPS", ["allcaps"]),
    ("v_2_x", ["v", "2", "x"]),
]


@pytest.mark.parametrize("identifier,expected", GOLDEN)
def test_splitter_golden(identifier, expected):
    assert split_identifier(identifier) == expected


@pytest.mark.parametrize("identifier,expected", GOLDEN)
def test_golden_agrees_with_reference(identifier, expected):
    assert reference_split(identifier) == expected


@given(st.text(alphabet="abcXYZ019_$", min_size=1, max_size=24))
def test_splitter_matches_reference(identifier):
    assert split_identifier(identifier) == reference_split(identifier)


@given(st.text(alphabet="aZ9_$", min_size=1, max_size=16))
def test_subtokens_are_lowercase_and_nonempty(identifier):
    subs = split_identifier(identifier)
    assert all(s and s == s.lower() for s in subs)


def test_empty_identifier_rejected():
    with pytest.raises(ValueError, match="empty identifier"):
        split_identifier("")


def test_non_identifier_rejected():
    with pytest.raises(ValueError):
        split_identifier("foo-bar")


subtoken = st.from_regex(r"[a-z]{1,6}|[0-9]{1,3}", fullmatch=True)


@given(st.lists(st.sampled_from(["http", "server", "2", "get", "x", "value", "42", "a"]), min_size=1, max_size=7))
def test_underscore_join_round_trip(subs):
    assert split_identifier("_".join(subs)) == subs


@given(st.lists(subtoken, min_size=1, max_size=6))
def test_join_subtokens_round_trip_after_guard(subs):
    name = join_subtokens(subs)
    core = name[2:] if subs[0][0].isdigit() else name
    assert split_identifier(core) == subs
    assert not name[0].isdigit()


# -- stats ---------------------------------------------------------------------


def test_stats_two_identifiers():
    m = parse_method("m", "void a() { fooBar.foo(); }\n", analyze=False)
    # identifiers fooBar and foo, plus the name "a"
    stats = compute_stats([m])
    assert stats.counts == {"foo": 2, "bar": 1, "a": 1}
    assert stats.total == 4


def test_stats_name_only():
    m = parse_method("m", "void a(){}", analyze=False)
    assert compute_stats([m]).counts == {"a": 1}


def test_rank_frequent_before_rare():
    body = " ".join(["getX();"] * 10) + " tournament = 1;"
    m = parse_method("m", "void run() { " + body + " }", analyze=False)
    stats = compute_stats([m])
    assert stats.rank("get") < stats.rank("tournament")


def test_rank_order_ties_lexicographic():
    m = parse_method("m", "void z() { b = a; }", analyze=False)
    stats = compute_stats([m])
    assert list(stats.rank_order) == ["a", "b", "z"]


def test_stats_total_matches_brute_force(small_methods):
    sample = small_methods[:20]
    brute = 0
    for m in sample:
        brute += len(split_identifier(m.target_name))
        for t in m.identifiers:
            brute += len(split_identifier(t))
    assert compute_stats(sample).total == brute


def test_stats_permutation_invariant(small_methods):
    a = compute_stats(small_methods[:50])
    b = compute_stats(list(reversed(small_methods[:50])))
    assert a == b


def test_stats_merge_commutes(small_methods):
    x, y = compute_stats(small_methods[:30]), compute_stats(small_methods[30:60])
    assert x.merge(y) == y.merge(x) == compute_stats(small_methods[:60])


def test_stats_file_round_trip(tmp_path, small_methods):
    stats = compute_stats(small_methods)
    write_stats(stats, tmp_path / "s.csv")
    assert read_stats(tmp_path / "s.csv") == stats
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "subtoken,count"
    assert [ln.split(",")[0] for ln in lines[1:]] == list(stats.rank_order)


def test_compute_stats_empty():
    with pytest.raises(ValueError):
        compute_stats([])


def test_method_unit_invariants(small_methods):
    for m in small_methods[:50]:
        assert list(m.target_subtokens) == split_identifier(m.target_name)
        spans = [(t.start, t.end) for t in m.body_tokens]
        assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


# -- ingestion -------------------------------------------------------------------


def test_ingest_single_method(tmp_path):
    (tmp_path / "A.java").write_text("class A {\n  int f() { int x = 1; return x; }\n}\n")
    methods = ingest_corpus(tmp_path)
    assert len(methods) == 1
    assert methods[0].target_name == "f"
    assert methods[0].id == "A.java:12"


NESTED = """\
package p;

public class Outer {
    private int count;

    public int one() { return 1; }

    static class Inner {
        void two() { int y = 2; }
        String three(String s) { return s + "}"; }
    }
}
"""


def brace_method_count(text: str) -> int:
    """Count ')' followed by '{' outside literals, a crude but independent oracle."""
    count, i, in_str = 0, 0, False
    while i < len(text):
        c = text[i]
        if c == '"':
            in_str = not in_str
        elif not in_str and c == ")":
            j = i + 1
            while text[j].isspace():
                j += 1
            count += text[j] == "{"
        i += 1
    return count


def test_ingest_nested_class(tmp_path):
    (tmp_path / "Outer.java").write_text(NESTED)
    methods = ingest_corpus(tmp_path)
    assert len(methods) == brace_method_count(NESTED) == 3
    assert [m.target_name for m in methods] == ["one", "two", "three"]


def test_ingest_jsonl_pass_through(tmp_path, small_records):
    write_methods_jsonl(small_records[:7], tmp_path / "m.jsonl")
    methods = ingest_corpus(tmp_path / "m.jsonl")
    assert [m.id for m in methods] == [r["id"] for r in small_records[:7]]


def test_ingest_skips_unlexable(tmp_path):
    (tmp_path / "a.jsonl").write_text(
        json.dumps({"id": "ok", "name": "f", "source": "void f() { }"}) + "\n"
        + json.dumps({"id": "bad", "name": "g", "source": "void g() { int café = 1; }"}) + "\n"
    )
    report = IngestReport()
    methods = ingest_corpus(tmp_path, report=report)
    assert [m.id for m in methods] == ["ok"]
    assert report.skipped == 1


def test_ingest_empty_corpus(tmp_path):
    (tmp_path / "Empty.java").write_text("class Empty {}\n")
    with pytest.raises(ValueError, match="empty corpus"):
        ingest_corpus(tmp_path)


def test_ingest_missing_root(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_corpus(tmp_path / "nope")


def test_ingest_order_by_path_then_offset(tmp_path):
    (tmp_path / "b").mkdir()
    (tmp_path / "b" / "B.java").write_text("class B { void q() {} void p() {} }")
    (tmp_path / "A.java").write_text("class A { void z() {} }")
    ids = [m.id for m in ingest_corpus(tmp_path, IngestConfig(analyze=False))]
    assert ids == ["A.java:10", "b/B.java:10", "b/B.java:22"]
