"""Method-level Java lexing, local variable discovery and scope-safe renaming.

Scope analysis is brace based: each block opens a scope, a classic or enhanced
``for`` opens a scope covering its header and body statement. Anything the
walker cannot classify with confidence is dropped from the candidate set, so a
reported variable is always safe to rename.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Sequence

if TYPE_CHECKING:
    from strata.corpus import MethodUnit


class LexError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class RenameError(ValueError):
    pass


class Token(NamedTuple):
    kind: str  # identifier keyword literal operator punctuation comment whitespace
    text: str
    start: int
    end: int


KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do
double else enum extends final finally float for goto if implements import instanceof
int interface long native new package private protected public return short static
strictfp super switch synchronized this throw throws transient try void volatile while
""".split())
LITERAL_WORDS = frozenset({"true", "false", "null"})
RESERVED = KEYWORDS | LITERAL_WORDS | {"_"}
PRIMITIVES = frozenset("boolean byte char short int long float double".split())

_OPERATORS = sorted(
    """>>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= &= |= ^= %= << >>
    + - * / % = < > ! ~ ? : & | ^ @""".split(),
    key=len, reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<whitespace>[ \t\r\n\f]+)
  | (?P<comment>//[^\n]*|/\*(?:[^*]|\*(?!/))*\*/)
  | (?P<textblock>\"\"\"[ \t\f]*\r?\n(?:[^"\\]|\\.|"(?!""))*\"\"\")
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.)+')
  | (?P<number>
        0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?\d+)?[lLfFdD]?
      | 0[bB][01_]+[lL]?
      | (?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdD]?
    )
  | (?P<word>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<operator>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r""")
  | (?P<punctuation>[(){}\[\];,.])
    """,
    re.VERBOSE,
)
_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_PAIRS = {")": "(", "]": "[", "}": "{"}


def lex(source: str) -> list[Token]:
    """Tokenize Java source; whitespace and comments are kept as tokens.

    Concatenating the token texts reproduces ``source`` exactly.
    """
    tokens: list[Token] = []
    stack: list[tuple[str, int]] = []
    pos, n = 0, len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            ch = source[pos]
            if ch == '"' or ch == "'":
                raise LexError("unterminated literal", pos)
            if source.startswith("/*", pos):
                raise LexError("unterminated comment", pos)
            if not ch.isascii():
                raise LexError(f"non-ASCII character {ch!r}", pos)
            raise LexError(f"unexpected character {ch!r}", pos)
        group = m.lastgroup
        text = m.group(0)
        end = m.end()
        if group == "word":
            if end < n and not source[end].isascii() and source[end].isalnum():
                raise LexError("non-ASCII identifier character", end)
            if text in LITERAL_WORDS:
                kind = "literal"
            elif text in KEYWORDS:
                kind = "keyword"
            else:
                kind = "identifier"
        elif group in ("textblock", "string", "char", "number"):
            kind = "literal"
        else:
            kind = group
        if kind == "punctuation":
            if text in "({[":
                stack.append((text, pos))
            elif text in ")}]":
                if not stack or stack[-1][0] != _PAIRS[text]:
                    raise LexError(f"unbalanced {text!r}", pos)
                stack.pop()
        tokens.append(Token(kind, text, pos, end))
        pos = end
    if stack:
        raise LexError(f"unbalanced {stack[-1][0]!r}", stack[-1][1])
    return tokens


def lex_method(source: str) -> list[Token]:
    """Lex a single method (signature through closing brace)."""
    return lex(source)


def significant(tokens: Sequence[Token]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t.kind not in ("whitespace", "comment")]


def _header_paren(texts: Sequence[str]) -> int | None:
    """Position of the parameter-list ``(`` in a method header, skipping annotations."""
    j, n = 0, len(texts)
    while j < n:
        t = texts[j]
        if t == "@" and j + 1 < n and texts[j + 1] != "interface":
            j += 2
            while j + 1 < n and texts[j] == ".":
                j += 2
            if j < n and texts[j] == "(":
                depth = 0
                while j < n:
                    depth += texts[j] == "("
                    depth -= texts[j] == ")"
                    j += 1
                    if depth == 0:
                        break
            continue
        if t == "(":
            return j
        if t in ("{", ";", "="):
            return None
        j += 1
    return None


def method_name_index(tokens: Sequence[Token]) -> int | None:
    """Index of the declared method-name token: the identifier before the parameter list."""
    sig = significant(tokens)
    j = _header_paren([tokens[i].text for i in sig])
    if j is None or j == 0 or tokens[sig[j - 1]].kind != "identifier":
        return None
    return sig[j - 1]


def method_name(tokens: Sequence[Token]) -> str | None:
    i = method_name_index(tokens)
    return None if i is None else tokens[i].text


def is_valid_identifier(name: str) -> bool:
    return bool(_IDENT_RE.fullmatch(name)) and name not in RESERVED


# -- structural helpers -------------------------------------------------------


class _Stream:
    """Significant tokens of a source with precomputed bracket matches."""

    def __init__(self, tokens: Sequence[Token]) -> None:
        self.tokens = tokens
        self.idx = significant(tokens)
        self.tok = [tokens[i] for i in self.idx]
        self.text = [t.text for t in self.tok]
        self.n = len(self.tok)
        self.match: dict[int, int] = {}
        stack: list[int] = []
        for j, s in enumerate(self.text):
            if s in ("(", "[", "{"):
                stack.append(j)
            elif s in (")", "]", "}"):
                o = stack.pop()
                self.match[o] = j
                self.match[j] = o

    def at(self, j: int) -> str:
        return self.text[j] if 0 <= j < self.n else ""

    def kind(self, j: int) -> str:
        return self.tok[j].kind if 0 <= j < self.n else ""

    def is_ident(self, j: int) -> bool:
        return self.kind(j) == "identifier"


def extract_methods(source: str) -> list[tuple[int, int]]:
    """Character spans of method declarations with bodies in a compilation unit.

    Constructors, and methods nested inside other method bodies, are not
    returned. Leading annotations and modifiers are included in the span.
    """
    tokens = lex(source)
    s = _Stream(tokens)
    spans: list[tuple[int, int]] = []
    j = 0
    while j < s.n:
        if s.at(j) == "(" and s.is_ident(j - 1):
            close = s.match[j]
            k = close + 1
            if s.at(k) == "throws":
                while k < s.n and s.at(k) not in ("{", ";"):
                    k += 1
            if s.at(k) == "{" and _is_method_header(s, j - 1):
                start = _declaration_start(s, j - 1)
                end = s.match[k]
                spans.append((s.tok[start].start, s.tok[end].end))
                j = end + 1
                continue
        j += 1
    return spans


def _is_method_header(s: _Stream, name: int) -> bool:
    before = name - 1
    if s.at(before) == "new" or s.at(before) == ".":
        return False
    prev = s.tok[before] if before >= 0 else None
    if prev is None:
        return False
    if prev.kind == "identifier":
        return s.at(before - 1) != "new" and s.at(before - 1) != "."
    return prev.text in PRIMITIVES or prev.text in ("void", ">", "]")


def _declaration_start(s: _Stream, name: int) -> int:
    j = name
    while j > 0:
        p = s.at(j - 1)
        if p in (";", "{", "}"):
            break
        if p == ")":
            # annotation arguments
            j = s.match[j - 1]
            continue
        j -= 1
    return j


# -- local variable discovery -------------------------------------------------


@dataclass(frozen=True)
class LocalVariable:
    name: str
    decl_span: tuple[int, int]
    use_spans: tuple[tuple[int, int], ...]
    scope_depth: int

    @property
    def occurrences(self) -> int:
        return len(self.use_spans) + 1


@dataclass
class _Decl:
    name: str
    pos: int  # stream index of the name token
    scope_end: int  # stream index (exclusive) where the scope closes
    depth: int
    in_class: bool


_STOP_TYPE = frozenset({"yield", "return", "throw", "new", "case", "default", "else"})


class _ScopeWalker:
    def __init__(self, s: _Stream) -> None:
        self.s = s
        self.decls: list[_Decl] = []
        self.excluded: set[str] = set()
        self.labels: set[str] = set()
        self.depth = 0

    # statements ----------------------------------------------------------

    def block(self, i: int) -> int:
        s = self.s
        end = s.match[i]
        self.depth += 1
        j = i + 1
        while j < end:
            j = self.statement(j, end)
        self.depth -= 1
        return end + 1

    def statement(self, j: int, limit: int) -> int:
        s = self.s
        t = s.at(j)
        if t == "{":
            return self.block(j)
        if t == ";":
            return j + 1
        if t in ("if", "while", "synchronized"):
            j = self.parens(j + 1)
            j = self.statement(j, limit)
            if t == "if" and s.at(j) == "else":
                j = self.statement(j + 1, limit)
            return j
        if t == "switch":
            j = self.parens(j + 1)
            return self.switch_block(j) if s.at(j) == "{" else j
        if t == "for":
            return self.for_statement(j, limit)
        if t == "do":
            j = self.statement(j + 1, limit)
            if s.at(j) == "while":
                j = self.parens(j + 1)
            return j + 1 if s.at(j) == ";" else j
        if t == "try":
            j += 1
            if s.at(j) == "(":
                close = s.match[j]
                self.mark_declared_names(j + 1, close)
                self.expr(j + 1, close)
                j = close + 1
            if s.at(j) == "{":
                j = self.block(j)
            while s.at(j) == "catch":
                close = s.match[j + 1]
                self.excluded.update(s.text[k] for k in range(j + 2, close) if s.is_ident(k))
                j = self.block(close + 1) if s.at(close + 1) == "{" else close + 1
            if s.at(j) == "finally":
                j = self.block(j + 1)
            return j
        if t in ("case", "default"):
            k = j + 1
            while k < limit and s.at(k) not in (":", "->"):
                k = s.match[k] + 1 if s.at(k) in ("(", "[", "{") else k + 1
            if s.at(k) == "->":
                return self.statement(k + 1, limit)
            return k + 1
        if t in ("class", "interface", "enum") or (t == "record" and s.is_ident(j + 1)):
            return self.class_declaration(j, limit)
        if s.is_ident(j) and s.at(j + 1) == ":" and s.at(j - 1) != "?":
            self.labels.add(t)
            return self.statement(j + 2, limit)
        if t in ("break", "continue") and s.is_ident(j + 1):
            self.labels.add(s.at(j + 1))
        names, after = self.declaration(j, enders=("=", ";", ",", "["))
        if names is not None and after is not None:
            k = self.declarators(names, after, limit)
            scope_end = self.enclosing_end(j)
            for pos in names:
                self._add(pos, scope_end)
            return k
        if self._modifier_led(j):
            # local class or something else declared with modifiers
            k = j
            while k < limit and s.at(k) not in ("class", "interface", "enum", "record", ";"):
                k += 1
            if s.at(k) in ("class", "interface", "enum", "record"):
                return self.class_declaration(k, limit)
        return self.expr_until(j, limit, (";",)) + 1

    def for_statement(self, j: int, limit: int) -> int:
        s = self.s
        open_ = j + 1
        close = s.match[open_]
        semis = [k for k in self._top_level(open_ + 1, close) if s.at(k) == ";"]
        names: list[int] = []
        if not semis:
            found, after = self.declaration(open_ + 1, enders=(":",))
            if found:
                names = found
            self.expr(open_ + 1, close)
        else:
            found, after = self.declaration(open_ + 1, enders=("=", ";", ",", "["))
            rest = open_ + 1
            if found is not None and after is not None:
                rest = self.declarators(found, after, semis[0] + 1)
                names = found
            self.expr(rest, close)
        self.depth += 1
        end = self.statement(close + 1, limit)
        self.depth -= 1
        for pos in names:
            self._add(pos, end, depth=self.depth)
        return end

    def switch_block(self, i: int) -> int:
        return self.block(i)

    def class_declaration(self, j: int, limit: int) -> int:
        s = self.s
        k = j
        while k < limit and s.at(k) != "{":
            if s.is_ident(k):
                self.excluded.add(s.at(k))
            k += 1
        if s.at(k) == "{":
            return self.class_body(k)
        return k

    def class_body(self, i: int) -> int:
        s = self.s
        end = s.match[i]
        self.excluded.update(s.text[k] for k in range(i + 1, end) if s.is_ident(k))
        return end + 1

    # declarations --------------------------------------------------------

    def _add(self, pos: int, scope_end: int, depth: int | None = None) -> None:
        self.decls.append(_Decl(self.s.at(pos), pos, scope_end,
                                self.depth if depth is None else depth, False))

    def enclosing_end(self, j: int) -> int:
        s = self.s
        k = j
        while k < s.n:
            t = s.at(k)
            if t in ("(", "[", "{"):
                k = s.match[k] + 1
                continue
            if t == "}":
                return k
            k += 1
        return s.n

    def _modifier_led(self, j: int) -> bool:
        return self.s.at(j) in ("final", "abstract", "static", "strictfp", "@")

    def declaration(self, j: int, enders: tuple[str, ...]) -> tuple[list[int] | None, int | None]:
        """Parse ``[modifiers] Type name`` at ``j``; return name position and follower."""
        s = self.s
        k = j
        while True:
            if s.at(k) == "final":
                k += 1
            elif s.at(k) == "@" and s.is_ident(k + 1) and s.at(k + 1) != "interface":
                k += 2
                while s.at(k) == "." and s.is_ident(k + 1):
                    k += 2
                if s.at(k) == "(":
                    k = s.match[k] + 1
            else:
                break
        k = self.type_(k)
        if k is None or not s.is_ident(k):
            return None, None
        if s.at(k + 1) not in enders:
            return None, None
        return [k], k + 1

    def type_(self, k: int) -> int | None:
        s = self.s
        if s.at(k) in PRIMITIVES:
            k += 1
        elif s.is_ident(k) and s.at(k) not in _STOP_TYPE:
            k += 1
            while True:
                if s.at(k) == "<":
                    k = self.type_args(k)
                    if k is None:
                        return None
                if s.at(k) == "." and s.is_ident(k + 1):
                    k += 2
                    continue
                break
        else:
            return None
        while s.at(k) == "[" and s.at(k + 1) == "]":
            k += 2
        if s.at(k) == "...":
            return None
        return k

    def type_args(self, k: int) -> int | None:
        s = self.s
        depth = 0
        while k < s.n:
            t = s.at(k)
            if t and set(t) == {"<"}:
                depth += len(t)
            elif t and set(t) == {">"}:
                depth -= len(t)
                if depth < 0:
                    return None
                if depth == 0:
                    return k + 1
            elif t in ("?", ",", ".", "[", "]", "&", "extends", "super", "@") or t in PRIMITIVES:
                pass
            elif s.is_ident(k):
                pass
            else:
                return None
            k += 1
        return None

    def declarators(self, names: list[int], after: int, limit: int) -> int:
        """Consume initializers and further ``, name = ...`` declarators."""
        s = self.s
        k = after
        while True:
            while s.at(k) == "[" and s.at(k + 1) == "]":
                k += 2
            if s.at(k) == "=":
                k = self.expr_until(k + 1, limit, (",", ";"))
            if s.at(k) == "," and s.is_ident(k + 1) and s.at(k + 2) in ("=", ",", ";", "["):
                names.append(k + 1)
                k += 2
                continue
            if s.at(k) == ";":
                return k + 1
            # unknown shape: drop every name from this statement
            for pos in names:
                self.excluded.add(s.at(pos))
            names.clear()
            return self.expr_until(k, limit, (";",)) + 1

    def mark_declared_names(self, start: int, end: int) -> None:
        s = self.s
        for k in range(start, end):
            if s.is_ident(k) and s.at(k + 1) in ("=", ",", ")", ";", ":", "["):
                self.excluded.add(s.at(k))

    # expressions ---------------------------------------------------------

    def _top_level(self, start: int, end: int):
        s = self.s
        k = start
        while k < end:
            yield k
            k = s.match[k] + 1 if s.at(k) in ("(", "[", "{") else k + 1

    def parens(self, j: int) -> int:
        s = self.s
        if s.at(j) != "(":
            return j
        close = s.match[j]
        self.expr(j + 1, close)
        return close + 1

    def expr_until(self, j: int, limit: int, stops: tuple[str, ...]) -> int:
        s = self.s
        k = j
        while k < limit and s.at(k) not in stops:
            if s.at(k) in ("(", "[", "{"):
                close = s.match[k]
                self.nested(k)
                k = close + 1
            else:
                self.lambda_params(k)
                k += 1
        return k

    def expr(self, start: int, end: int) -> None:
        s = self.s
        k = start
        while k < end:
            if s.at(k) in ("(", "[", "{"):
                self.nested(k)
                k = s.match[k] + 1
            else:
                self.lambda_params(k)
                k += 1

    def nested(self, k: int) -> None:
        s = self.s
        t = s.at(k)
        close = s.match[k]
        if t == "{":
            prev = s.at(k - 1)
            if prev == "->":
                self.block(k)
            elif prev == ")" and self._anonymous(s.match[k - 1]):
                self.class_body(k)
            elif prev in ("]", "=", ",", "{", "("):
                self.expr(k + 1, close)
            else:
                self.class_body(k)
        else:
            self.expr(k + 1, close)

    def _anonymous(self, open_paren: int) -> bool:
        s = self.s
        k = open_paren - 1
        while k >= 0 and (s.is_ident(k) or s.at(k) in (".", ",", "?", "extends", "super")
                          or (s.at(k) and set(s.at(k)) <= {"<", ">"})):
            k -= 1
        return s.at(k) == "new"

    def lambda_params(self, k: int) -> None:
        s = self.s
        if s.at(k) != "->":
            return
        p = k - 1
        if s.is_ident(p):
            self.excluded.add(s.at(p))
        elif s.at(p) == ")":
            o = s.match[p]
            self.excluded.update(s.text[q] for q in range(o + 1, p) if s.is_ident(q))


def _body_open(s: _Stream) -> tuple[int, list[str]] | None:
    """Locate the method body brace and collect formal parameter names."""
    j = _header_paren(s.text)
    if j is None:
        return None
    close = s.match[j]
    params = [s.at(k) for k in range(j + 1, close) if s.is_ident(k)]
    k = close + 1
    while k < s.n and s.at(k) not in ("{", ";"):
        k += 1
    if s.at(k) != "{":
        return None
    return k, params


def find_local_variables(method: "MethodUnit | Sequence[Token]") -> list[LocalVariable]:
    """Locally declared variables of a method that are safe to rename.

    Only statement declarations, classic for-init and enhanced-for variables are
    reported. A name is dropped if it is declared more than once, matches a
    parameter, lambda or catch parameter, a label, anything declared inside a
    local or anonymous class, or if any bare occurrence falls outside the
    variable's scope.
    """
    tokens = method.body_tokens if hasattr(method, "body_tokens") else method
    s = _Stream(tokens)
    found = _body_open(s)
    if found is None:
        return []
    body, params = found
    walker = _ScopeWalker(s)
    try:
        walker.block(body)
    except (KeyError, IndexError):
        return []
    excluded = walker.excluded | walker.labels | set(params)
    by_name: dict[str, list[_Decl]] = {}
    for d in walker.decls:
        by_name.setdefault(d.name, []).append(d)

    out: list[LocalVariable] = []
    for name, decls in by_name.items():
        if len(decls) != 1 or name in excluded:
            continue
        d = decls[0]
        uses = _uses(s, d, body)
        if uses is None:
            continue
        t = s.tok[d.pos]
        out.append(LocalVariable(
            name=name,
            decl_span=(t.start, t.end),
            use_spans=tuple((s.tok[k].start, s.tok[k].end) for k in uses),
            scope_depth=d.depth,
        ))
    out.sort(key=lambda v: v.decl_span)
    return out


def _uses(s: _Stream, d: _Decl, body: int) -> list[int] | None:
    uses = []
    for k in range(s.n):
        if k == d.pos or s.at(k) != d.name or not s.is_ident(k):
            continue
        prev, nxt = s.at(k - 1), s.at(k + 1)
        if prev in (".", "::") or nxt == "(":
            continue
        if prev == "@" or s.is_ident(k + 1) or s.is_ident(k - 1):
            return None
        if not (d.pos < k < d.scope_end):
            return None
        uses.append(k)
    return uses


# -- renaming ------------------------------------------------------------------


@dataclass(frozen=True)
class RenameResult:
    new_source: str
    replaced_count: int
    replacement: str


def rename_variable(method: "MethodUnit", var: LocalVariable, new_name: str) -> RenameResult:
    """Rename ``var`` and all its uses to ``new_name``; other bytes are untouched."""
    if not _IDENT_RE.fullmatch(new_name):
        raise RenameError(f"invalid identifier: {new_name!r}")
    if new_name in RESERVED:
        raise RenameError(f"reserved word: {new_name!r}")
    source = method.source
    if new_name != var.name and any(
        t.kind == "identifier" and t.text == new_name for t in method.body_tokens
    ):
        raise RenameError(f"name conflict: {new_name!r}")
    spans = sorted((var.decl_span, *var.use_spans))
    parts = []
    pos = 0
    for start, end in spans:
        if source[start:end] != var.name:
            raise RenameError(f"span {start}:{end} does not hold {var.name!r}")
        parts.append(source[pos:start])
        parts.append(new_name)
        pos = end
    parts.append(source[pos:])
    return RenameResult("".join(parts), len(spans), new_name)


def token_diff(before: Sequence[Token], after: Sequence[Token]) -> list[tuple[int, int]] | None:
    """Original spans of identifier tokens whose text changed, or None if the
    token streams differ in any other way (count, kind, or non-identifier text)."""
    if len(before) != len(after):
        return None
    changed = []
    for a, b in zip(before, after):
        if a.kind != b.kind:
            return None
        if a.text != b.text:
            if a.kind != "identifier":
                return None
            changed.append((a.start, a.end))
    return changed
