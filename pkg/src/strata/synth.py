"""Deterministic synthetic Java method corpus.

A fixed *universe* (subtoken pool, topics, verbs) is derived from
``universe_seed``; the corpus ``seed`` only controls sampling. Two corpora with
different seeds therefore share a subtoken distribution but no methods, like two
independently collected Java datasets.

Each method belongs to a topic, drawn Zipf-distributed. Its name is a verb plus
the topic noun (sometimes a qualifier). Identifiers in the body mix topic
subtokens with background subtokens drawn from a Zipfian pool.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from strata.javaparse import RESERVED

COMMON_WORDS = """
value index list size count result item data name key map buffer node entry
element string builder type info config context state status event handler manager
service factory util helper cache table record field param args input output stream
reader writer file path line text message error code id number total sum min max
start end begin offset length width height left right top bottom first last next
prev current parent child root tree graph edge vertex queue stack array vector
matrix row column cell point range bound limit target source dest origin time date
timer clock delay timeout retry attempt session user client server request response
header body content payload token parser lexer scanner format pattern filter mapper
reducer worker task job thread lock pool channel socket port host address url
query result view model controller adapter wrapper provider listener callback action
command option flag mode level scale ratio rate weight score rank order group batch
block chunk frame packet segment slot bucket shard region zone layer module unit
""".split()

GENERIC_VARS = ["i", "j", "k", "n", "tmp", "res", "val", "idx", "cur", "obj", "it", "out"]

VERBS = ["get", "set", "compute", "find", "create", "build", "update", "load", "parse",
         "check", "is", "has", "process", "handle", "to", "read", "write", "apply",
         "remove", "add", "validate", "count", "sort", "merge", "convert", "format"]

# body calls lean on a few collection and accessor verbs
CALL_VERBS = ["get", "set"]

TYPE_SUFFIXES = ["Manager", "Service", "Entry", "Node", "Item", "Record", "Info",
                 "Handler", "Context", "Builder", "Result", "Value"]

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class Topic:
    noun: str
    verbs: tuple[str, ...]
    qualifiers: tuple[str, ...]
    words: tuple[str, ...]  # signature subtokens, most characteristic first


@dataclass(frozen=True)
class Universe:
    pool: tuple[str, ...]  # background subtokens in Zipf rank order
    topics: tuple[Topic, ...]
    verb_words: dict[str, tuple[str, ...]]
    hubs: tuple[str, ...] = ()  # name subtokens shared by every topic


@dataclass(frozen=True)
class SynthConfig:
    n_methods: int = 2000
    seed: int = 0
    universe_seed: int = 2021
    pool_size: int = 3000
    n_topics: int = 120
    topic_words: int = 10
    topic_zipf: float = 0.8
    pool_zipf: float = 0.8
    signal: float = 0.45  # share of free identifiers drawn from the topic
    n_hubs: int = 12
    hub_rate: float = 0.3  # share of names carrying a hub subtoken
    hub_signal: float = 0.6


def _pseudowords(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    out: list[str] = []
    while len(out) < count:
        syllables = int(rng.integers(2, 4))
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(syllables))
        if rng.random() < 0.4:
            w += _CONSONANTS[rng.integers(len(_CONSONANTS))]
        if w in taken or w in RESERVED:
            continue
        taken.add(w)
        out.append(w)
    return out


@lru_cache(maxsize=8)
def build_universe(universe_seed: int = 2021, pool_size: int = 3000, n_topics: int = 120,
                   topic_words: int = 10, n_hubs: int = 12) -> Universe:
    rng = np.random.default_rng([universe_seed, 0])
    taken = set(COMMON_WORDS) | set(VERBS) | set(GENERIC_VARS) | {s.lower() for s in TYPE_SUFFIXES}
    common = list(dict.fromkeys(COMMON_WORDS))
    rng.shuffle(common)
    pseudo = _pseudowords(rng, max(0, pool_size - len(common)), taken)
    # common words lead the pool so the most frequent background subtokens look familiar
    pool = tuple(common + pseudo)[:pool_size]

    # verb and topic subtokens come from past the head, disjoint from each other
    candidates = list(pool[60:])
    rng.shuffle(candidates)
    verb_words = {}
    for i, v in enumerate(VERBS):
        verb_words[v] = tuple(candidates[3 * i:3 * i + 3])
    candidates = candidates[3 * len(VERBS):]
    per = topic_words + 2
    if per * n_topics > len(candidates):
        raise ValueError("pool too small for the requested topics")
    topics = []
    for t in range(n_topics):
        chunk = candidates[t * per:(t + 1) * per]
        verbs = tuple(rng.choice(VERBS, size=2, replace=False).tolist())
        topics.append(Topic(noun=chunk[0], verbs=verbs, qualifiers=tuple(chunk[1:3]),
                            words=tuple([chunk[0]] + chunk[3:])))
    hubs = tuple(pool[:n_hubs])
    return Universe(pool, tuple(topics), verb_words, hubs)


def _zipf(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _camel(parts: list[str], upper_first: bool = False) -> str:
    head = parts[0].capitalize() if upper_first else parts[0]
    return head + "".join(p.capitalize() for p in parts[1:])


class _MethodWriter:
    def __init__(self, uni: Universe, cfg: SynthConfig, rng: np.random.Generator,
                 topic: Topic, verb: str, hub: str | None) -> None:
        self.uni, self.cfg, self.rng = uni, cfg, rng
        self.topic, self.verb, self.hub = topic, verb, hub
        self.used: set[str] = set()
        self.pool_p = _zipf(len(uni.pool), cfg.pool_zipf)
        self.word_p = _zipf(len(topic.words), 0.7)
        self.lines: list[str] = []
        self.locals: list[tuple[str, str]] = []  # (type, name)

    # subtoken sources ----------------------------------------------------

    def background(self) -> str:
        return self.uni.pool[self.rng.choice(len(self.uni.pool), p=self.pool_p)]

    def topical(self) -> str:
        return self.topic.words[self.rng.choice(len(self.topic.words), p=self.word_p)]

    def word(self) -> str:
        r = self.rng.random()
        if self.hub is not None and self.rng.random() < self.cfg.hub_signal:
            return self.hub
        if r < self.cfg.signal:
            return self.topical()
        if r < self.cfg.signal + 0.1:
            return self.rng.choice(self.uni.verb_words[self.verb])
        return self.background()

    # identifiers -----------------------------------------------------------

    def fresh(self, parts: list[str]) -> str:
        name = _camel(parts)
        base, k = name, 2
        while name in self.used or name in RESERVED:
            name = f"{base}{k}"
            k += 1
        self.used.add(name)
        return name

    def local_name(self) -> str:
        r = self.rng.random()
        if r < 0.25:
            choices = [g for g in GENERIC_VARS if g not in self.used]
            if choices:
                g = str(self.rng.choice(choices))
                self.used.add(g)
                return g
        n = 1 if self.rng.random() < 0.6 else 2
        return self.fresh([self.word() for _ in range(n)])

    def type_name(self) -> str:
        r = self.rng.random()
        if r < 0.3:
            return str(self.rng.choice(["int", "long", "double", "boolean"]))
        if r < 0.45:
            return "String"
        base = _camel([self.word()], upper_first=True) + str(self.rng.choice(TYPE_SUFFIXES))
        if r < 0.6:
            return f"List<{base}>"
        return base

    def call(self) -> str:
        return _camel([str(self.rng.choice(CALL_VERBS)), self.word()])

    def expr(self) -> str:
        r = self.rng.random()
        if self.locals and r < 0.35:
            return self.locals[self.rng.integers(len(self.locals))][1]
        if r < 0.55:
            return str(int(self.rng.integers(0, 100)))
        if r < 0.8:
            return f"{_camel([self.word(), self.word()])}.{self.call()}()"
        return f"{self.call()}({self.arg()})"

    def arg(self) -> str:
        if self.locals and self.rng.random() < 0.6:
            return self.locals[self.rng.integers(len(self.locals))][1]
        return _camel([self.word()])

    # statements --------------------------------------------------------------

    def declare(self, indent: str) -> None:
        t = self.type_name()
        name = self.local_name()
        if t == "boolean":
            init = "false"
        elif t in ("int", "long", "double"):
            init = str(int(self.rng.integers(0, 10)))
        elif t == "String":
            init = f'"{self.word()}"'
        elif t.startswith("List<"):
            init = "new ArrayList<>()"
        else:
            init = self.expr() if self.rng.random() < 0.5 else f"new {t}()"
        self.lines.append(f"{indent}{t} {name} = {init};")
        self.locals.append((t, name))

    def use(self, indent: str) -> None:
        r = self.rng.random()
        if self.locals and r < 0.5:
            t, name = self.locals[self.rng.integers(len(self.locals))]
            if t in ("int", "long", "double"):
                self.lines.append(f"{indent}{name} += {self.expr()};")
            else:
                self.lines.append(f"{indent}{self.call()}({name});")
        elif r < 0.75:
            self.lines.append(f"{indent}{_camel([self.word()])}.{self.call()}({self.arg()});")
        else:
            self.lines.append(f"{indent}{self.call()}({self.arg()}, {self.expr()});")

    def loop(self, indent: str) -> None:
        if self.rng.random() < 0.5:
            i = "i" if "i" not in self.used else self.fresh(["idx"])
            self.used.add(i)
            bound = self.arg()
            self.lines.append(f"{indent}for (int {i} = 0; {i} < {bound}.size(); {i}++) {{")
            self.lines.append(f"{indent}    {self.call()}({bound}.get({i}));")
        else:
            elem = self.local_name()
            coll = self.arg()
            t = _camel([self.word()], upper_first=True) + str(self.rng.choice(TYPE_SUFFIXES))
            self.lines.append(f"{indent}for ({t} {elem} : {coll}) {{")
            self.lines.append(f"{indent}    {self.call()}({elem});")
        self.use(indent + "    ")
        self.lines.append(f"{indent}}}")

    def branch(self, indent: str) -> None:
        self.lines.append(f"{indent}if ({self.arg()} != null) {{")
        self.use(indent + "    ")
        self.lines.append(f"{indent}}}")

    def decoration(self, indent: str) -> None:
        if self.locals and self.rng.random() < 0.5:
            name = self.locals[self.rng.integers(len(self.locals))][1]
            self.lines.append(f"{indent}// keep {name} in sync")
        else:
            name = self.locals[self.rng.integers(len(self.locals))][1] if self.locals else "state"
            self.lines.append(f'{indent}log.debug("{name} ready");')

    def write(self) -> tuple[str, str]:
        rng = self.rng
        parts = [self.verb, self.topic.noun]
        if rng.random() < 0.3:
            parts.append(str(rng.choice(self.topic.qualifiers)))
        if self.hub is not None:
            parts.append(self.hub)
        name = _camel(parts)
        self.used.add(name)
        self.used.add("log")
        params = []
        for _ in range(int(rng.integers(0, 3))):
            t = self.type_name()
            p = self.local_name()
            params.append(f"{t} {p}")
            self.locals.append((t, p))
        ind = "    "
        for _ in range(int(rng.integers(1, 4))):
            self.declare(ind)
        for _ in range(int(rng.integers(2, 6))):
            r = rng.random()
            if r < 0.3:
                self.declare(ind)
            elif r < 0.6:
                self.use(ind)
            elif r < 0.8:
                self.loop(ind)
            elif r < 0.92:
                self.branch(ind)
            else:
                self.decoration(ind)
        ret_type = "void"
        decls = [(t, n) for t, n in self.locals]
        if decls and rng.random() < 0.7:
            t, n = decls[rng.integers(len(decls))]
            ret_type = t
            self.lines.append(f"{ind}return {n};")
        header = f"public {ret_type} {name}({', '.join(params)}) {{"
        return name, "\n".join([header, *self.lines, "}"]) + "\n"


def generate(config: SynthConfig | None = None, split: str = "train") -> list[dict]:
    """Methods as ``{"id", "name", "source"}`` records."""
    cfg = config or SynthConfig()
    uni = build_universe(cfg.universe_seed, cfg.pool_size, cfg.n_topics, cfg.topic_words, cfg.n_hubs)
    stream = zlib.crc32(split.encode())
    rng = np.random.default_rng([cfg.seed, stream])
    topic_p = _zipf(len(uni.topics), cfg.topic_zipf)
    out = []
    for i in range(cfg.n_methods):
        topic = uni.topics[rng.choice(len(uni.topics), p=topic_p)]
        verb = str(rng.choice(topic.verbs))
        hub = str(rng.choice(uni.hubs)) if uni.hubs and rng.random() < cfg.hub_rate else None
        name, source = _MethodWriter(uni, cfg, rng, topic, verb, hub).write()
        out.append({"id": f"synth-{cfg.seed}-{split}-{i:05d}", "name": name, "source": source})
    return out
