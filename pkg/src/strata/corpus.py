"""Corpus ingestion, identifier subtokenization and subtoken frequency statistics."""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from strata import javaparse
from strata.javaparse import LexError, LocalVariable, Token

log = logging.getLogger(__name__)

_IDENT_CHARS = re.compile(r"[A-Za-z0-9_$]+")
_DELIMS = re.compile(r"[_$]+")
_SUBTOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def split_identifier(identifier: str) -> list[str]:
    """Split a Java identifier into lowercase subtokens.

    Splits at ``_`` and ``$`` (both dropped), lower-to-upper case changes,
    letter/digit changes, and inside acronyms so that the last capital of a run
    followed by a lowercase letter starts a new subtoken::

        >>> split_identifier("HTTPServer2")
        ['http', 'server', '2']
    """
    if not identifier:
        raise ValueError("empty identifier")
    if not _IDENT_CHARS.fullmatch(identifier):
        raise ValueError(f"not a Java identifier: {identifier!r}")
    out: list[str] = []
    for chunk in _DELIMS.split(identifier):
        out.extend(m.group(0).lower() for m in _SUBTOKEN.finditer(chunk))
    return out


def join_subtokens(subtokens: Sequence[str]) -> str:
    """Underscore-join subtokens into an identifier; ``v_`` guards a leading digit."""
    if not subtokens:
        raise ValueError("nothing to join")
    name = "_".join(subtokens)
    if name[0].isdigit():
        name = "v_" + name
    return name


@dataclass(frozen=True)
class MethodUnit:
    id: str
    target_name: str
    source: str
    body_tokens: tuple[Token, ...]
    local_vars: tuple[LocalVariable, ...] = ()
    target_subtokens: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_subtokens", tuple(split_identifier(self.target_name)))

    @property
    def attackable(self) -> bool:
        return bool(self.local_vars)

    @cached_property
    def identifiers(self) -> tuple[str, ...]:
        """Identifier token texts of the method, minus the declared method name."""
        skip = javaparse.method_name_index(self.body_tokens)
        return tuple(
            t.text for i, t in enumerate(self.body_tokens) if t.kind == "identifier" and i != skip
        )

    @cached_property
    def identifier_subtokens(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(split_identifier(name)) for name in self.identifiers)


def parse_method(method_id: str, source: str, name: str | None = None, analyze: bool = True) -> MethodUnit:
    """Lex one method's source into a MethodUnit, optionally running scope analysis."""
    tokens = tuple(javaparse.lex_method(source))
    found = javaparse.method_name(tokens)
    if name is None:
        if found is None:
            raise LexError("no method name found", 0)
        name = found
    unit = MethodUnit(id=method_id, target_name=name, source=source, body_tokens=tokens)
    if analyze:
        object.__setattr__(unit, "local_vars", tuple(javaparse.find_local_variables(unit)))
    return unit


@dataclass(frozen=True)
class SubtokenStats:
    counts: dict[str, int]
    total: int
    rank_order: tuple[str, ...]

    @classmethod
    def from_counter(cls, counter: Counter) -> "SubtokenStats":
        counts = {k: v for k, v in counter.items() if v > 0}
        order = tuple(sorted(counts, key=lambda s: (-counts[s], s)))
        return cls(counts=counts, total=sum(counts.values()), rank_order=order)

    def rank(self, subtoken: str) -> int:
        return self._ranks[subtoken]

    @cached_property
    def _ranks(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.rank_order)}

    def __len__(self) -> int:
        return len(self.rank_order)

    def merge(self, other: "SubtokenStats") -> "SubtokenStats":
        return SubtokenStats.from_counter(Counter(self.counts) + Counter(other.counts))


def count_subtokens(methods: Iterable[MethodUnit]) -> Counter:
    counter: Counter = Counter()
    for m in methods:
        for subs in m.identifier_subtokens:
            counter.update(subs)
        counter.update(m.target_subtokens)
    return counter


def compute_stats(methods: Sequence[MethodUnit]) -> SubtokenStats:
    """Occurrence counts of every subtoken in method bodies and method names."""
    if not methods:
        raise ValueError("empty method list")
    return SubtokenStats.from_counter(count_subtokens(methods))


def write_stats(stats: SubtokenStats, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("subtoken,count\n")
        for s in stats.rank_order:
            fh.write(f"{s},{stats.counts[s]}\n")


def read_stats(path: Path) -> SubtokenStats:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["subtoken", "count"]:
            raise ValueError(f"{path}: expected header 'subtoken,count'")
        counter = Counter({row[0]: int(row[1]) for row in reader if row})
    return SubtokenStats.from_counter(counter)


# -- ingestion ---------------------------------------------------------------


@dataclass
class IngestConfig:
    java_glob: str = "**/*.java"
    analyze: bool = True
    limit: int | None = None


@dataclass
class IngestReport:
    files: int = 0
    methods: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)


def read_methods_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"id", "name", "source"} - rec.keys()
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            yield rec


def write_methods_jsonl(records: Iterable[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec["id"], "name": rec["name"], "source": rec["source"]}) + "\n")


def methods_to_records(methods: Iterable[MethodUnit]) -> Iterator[dict]:
    for m in methods:
        yield {"id": m.id, "name": m.target_name, "source": m.source}


def _sources(root: Path, config: IngestConfig, report: IngestReport) -> Iterator[tuple[str, str, str | None]]:
    if root.is_file():
        jsonl = [root] if root.suffix == ".jsonl" else []
        java = [root] if root.suffix == ".java" else []
    else:
        jsonl = sorted(root.glob("*.jsonl"))
        java = [] if jsonl else sorted(root.glob(config.java_glob))
    for path in jsonl:
        report.files += 1
        for rec in read_methods_jsonl(path):
            yield rec["id"], rec["source"], rec["name"]
    for path in java:
        report.files += 1
        rel = path.name if root.is_file() else path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8")
            spans = javaparse.extract_methods(text)
        except (LexError, UnicodeDecodeError) as exc:
            report.skipped += 1
            report.errors.append(f"{rel}: {exc}")
            continue
        for start, end in spans:
            yield f"{rel}:{start}", text[start:end], None


def ingest_corpus(root: str | Path, config: IngestConfig | None = None,
                  report: IngestReport | None = None) -> list[MethodUnit]:
    """Load every method under ``root`` (Java files or a methods JSONL file).

    Methods that fail to lex are skipped and tallied in ``report``. Order is by
    file path then byte offset, or file order for JSONL input.
    """
    config = config or IngestConfig()
    report = report if report is not None else IngestReport()
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(f"corpus root not found: {root}")
    methods: list[MethodUnit] = []
    for method_id, source, name in _sources(root, config, report):
        try:
            methods.append(parse_method(method_id, source, name, analyze=config.analyze))
        except (LexError, ValueError) as exc:
            report.skipped += 1
            report.errors.append(f"{method_id}: {exc}")
            continue
        if config.limit is not None and len(methods) >= config.limit:
            break
    report.methods = len(methods)
    if report.skipped:
        log.info("skipped %d unlexable methods", report.skipped)
    if not methods:
        raise ValueError("empty corpus")
    return methods
