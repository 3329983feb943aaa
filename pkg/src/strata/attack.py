"""Identifier-renaming perturbations: untargeted, targeted and corpus-wide generation."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from strata.corpus import MethodUnit, join_subtokens, split_identifier
from strata.javaparse import RESERVED, RenameError, rename_variable
from strata.vocab import Vocabulary

log = logging.getLogger(__name__)

STRATEGIES = ("single", "5-diff", "5-same")
CLI_STRATEGIES = {"single": "single", "5diff": "5-diff", "5same": "5-same",
                  "5-diff": "5-diff", "5-same": "5-same"}
MAX_COLLISION_RETRIES = 16
_MASK = (1 << 64) - 1


class AttackError(RuntimeError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    strategy: str
    vocabulary: Vocabulary | None
    seed: int = 0
    target: str | None = None
    allow_single_target: bool = False

    def __post_init__(self) -> None:
        strategy = CLI_STRATEGIES.get(self.strategy)
        if strategy is None:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.target is not None and not self.allow_single_target:
            strategy = "5-same"
        object.__setattr__(self, "strategy", strategy)
        if not 0 <= self.seed <= _MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.target is None and self.vocabulary is None:
            raise ValueError("untargeted attacks need a vocabulary")


@dataclass(frozen=True)
class PerturbationRecord:
    method_id: str
    original_var: str
    replacement: str
    strategy: str
    subtokens_used: tuple[str, ...]
    seed_used: int
    new_source: str
    target: str | None = None

    def to_json(self) -> dict:
        rec = {
            "id": self.method_id,
            "var": self.original_var,
            "replacement": self.replacement,
            "strategy": self.strategy,
            "subtokens": list(self.subtokens_used),
            "seed": self.seed_used,
            "source": self.new_source,
        }
        if self.target is not None:
            rec["target"] = self.target
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "PerturbationRecord":
        return cls(rec["id"], rec["var"], rec["replacement"], rec["strategy"],
                   tuple(rec["subtokens"]), int(rec["seed"]), rec["source"], rec.get("target"))


@dataclass(frozen=True)
class Skip:
    method_id: str
    reason: str


def replacement_core(identifier: str, subtokens: Sequence[str]) -> str:
    """The replacement without the ``v_`` guard that ``join_subtokens`` adds before a digit."""
    if subtokens and subtokens[0][:1].isdigit() and identifier.startswith("v_"):
        return identifier[2:]
    return identifier


def make_replacement(strategy: str, vocabulary: Vocabulary, rng: np.random.Generator) -> tuple[str, tuple[str, ...]]:
    """Draw a replacement identifier; subtokens are joined with underscores."""
    pool = vocabulary.pool
    if not pool:
        raise AttackError("empty vocabulary")
    strategy = CLI_STRATEGIES.get(strategy, strategy)
    if strategy == "single":
        used = (pool[int(rng.integers(len(pool)))],)
    elif strategy == "5-diff":
        used = tuple(pool[int(i)] for i in rng.integers(len(pool), size=5))
    elif strategy == "5-same":
        used = (pool[int(rng.integers(len(pool)))],) * 5
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return join_subtokens(used), used


def _targeted_replacement(target: str, strategy: str) -> tuple[str, tuple[str, ...]]:
    used = (target,) if strategy == "single" else (target,) * 5
    return join_subtokens(used), used


def derive_seed(seed: int, method_id: str, replicate: int = 0) -> int:
    """Per-(method, replicate) substream seed: multiply-xor mix of the run seed
    with a stable BLAKE2b hash of the method id and replicate index."""
    digest = hashlib.blake2b(f"{method_id}\x00{replicate}".encode(), digest_size=8).digest()
    h = int.from_bytes(digest, "big")
    x = (seed * 0x9E3779B97F4A7C15) & _MASK
    x ^= h
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 31
    return x


def attack_method(method: MethodUnit, config: AttackConfig, seed: int | None = None) -> PerturbationRecord | Skip:
    """Rename one uniformly chosen local variable of ``method``."""
    if not method.local_vars:
        return Skip(method.id, "no local variables")
    seed_used = config.seed if seed is None else seed
    rng = np.random.default_rng(seed_used)
    var = method.local_vars[int(rng.integers(len(method.local_vars)))]
    taken = {t.text for t in method.body_tokens if t.kind == "identifier"}
    for _ in range(MAX_COLLISION_RETRIES):
        if config.target is not None:
            name, used = _targeted_replacement(config.target, config.strategy)
        else:
            name, used = make_replacement(config.strategy, config.vocabulary, rng)
        if name in taken or name in RESERVED:
            continue
        try:
            result = rename_variable(method, var, name)
        except RenameError:
            continue
        return PerturbationRecord(method.id, var.name, name, config.strategy, used, seed_used,
                                  result.new_source, config.target)
    raise AttackError(f"vocabulary exhausted for method {method.id}")


@dataclass
class AttackReport:
    records: list[PerturbationRecord] = field(default_factory=list)
    skipped: list[Skip] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)


def attack_corpus(methods: Sequence[MethodUnit], config: AttackConfig, k_per_method: int = 1,
                  report: AttackReport | None = None, jobs: int = 1) -> list[PerturbationRecord]:
    """Up to ``k_per_method`` perturbations per attackable method, in corpus order.

    Each replicate draws from its own substream (see ``derive_seed``), so the
    result does not depend on scheduling.
    """
    if k_per_method < 1:
        raise ValueError("k_per_method must be positive")
    report = report if report is not None else AttackReport()

    def one(method: MethodUnit) -> list[PerturbationRecord | Skip | tuple[str, str]]:
        if not method.local_vars:
            return [Skip(method.id, "no local variables")]
        out: list = []
        for rep in range(k_per_method):
            try:
                out.append(attack_method(method, config, derive_seed(config.seed, method.id, rep)))
            except AttackError as exc:
                out.append((method.id, str(exc)))
        return out

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, methods))
    else:
        results = [one(m) for m in methods]
    for items in results:
        for item in items:
            if isinstance(item, PerturbationRecord):
                report.records.append(item)
            elif isinstance(item, Skip):
                report.skipped.append(item)
            else:
                report.errors.append(item)
    return list(report.records)


def check_record(record: PerturbationRecord) -> bool:
    core = replacement_core(record.replacement, record.subtokens_used)
    return tuple(split_identifier(core)) == tuple(record.subtokens_used)


def write_records(records: Iterable[PerturbationRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def read_records(path: Path) -> list[PerturbationRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PerturbationRecord.from_json(json.loads(line)) for line in fh if line.strip()]
