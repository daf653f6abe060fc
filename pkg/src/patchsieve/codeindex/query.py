"""Constrained structural query language over the code index.

One conjunctive filter per query: `kind=<function|call|usage>` first,
then zero or more `and key=value` predicates. Values are bare words or
double-quoted strings; name-like and file predicates accept shell globs;
`line=N` or `line=A..B` filters by line (span intersection for
functions, site line otherwise). The full EBNF lives in docs/query.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fnmatch import fnmatchcase

from ..errors import MalformedQuery
from .index import CallSite, CodeIndex, FunctionDef, UsageSite

KINDS = ("function", "call", "usage")

_KEYS_FOR_KIND = {
    "function": ("name", "file", "line"),
    "call": ("callee_name", "caller", "file", "line"),
    "usage": ("symbol", "usage_kind", "enclosing", "file", "line"),
}

_LINE_RE = re.compile(r"^(\d+)(?:\.\.(\d+))?$")


@dataclass(frozen=True)
class QuerySpec:
    kind: str
    predicates: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class QueryResult:
    kind: str
    matches: tuple

    def rows(self) -> list[dict]:
        out = []
        for m in self.matches:
            if isinstance(m, FunctionDef):
                out.append({"kind": "function", "name": m.qualified_name,
                            "file": m.file, "line": m.start_line})
            elif isinstance(m, CallSite):
                out.append({"kind": "call", "caller": m.caller,
                            "callee_name": m.callee_name, "file": m.file,
                            "line": m.line})
            else:
                out.append({"kind": "usage", "symbol": m.symbol,
                            "usage_kind": m.kind, "file": m.file,
                            "line": m.line,
                            "enclosing": m.enclosing_function or ""})
        return out


def _tokenize(text: str) -> list[tuple[str, int]]:
    """Whitespace-separated tokens; double quotes group and may follow `=`."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        start = i
        buf = []
        while i < n and not text[i].isspace():
            if text[i] == '"':
                close = text.find('"', i + 1)
                if close == -1:
                    raise MalformedQuery(i, "closing quote")
                buf.append(text[i + 1:close])
                i = close + 1
            else:
                buf.append(text[i])
                i += 1
        tokens.append(("".join(buf), start))
    return tokens


def parse_query(text: str) -> QuerySpec:
    """Parse query text; MalformedQuery carries position and expectation."""
    tokens = _tokenize(text)
    if not tokens:
        raise MalformedQuery(0, "kind=<function|call|usage>")
    clauses: list[tuple[str, str, int]] = []
    expect_clause = True
    for tok, pos in tokens:
        if expect_clause:
            if "=" not in tok:
                raise MalformedQuery(pos, "key=value")
            key, _, value = tok.partition("=")
            if not key or not value:
                raise MalformedQuery(pos, "key=value")
            clauses.append((key, value, pos))
            expect_clause = False
        else:
            if tok.lower() != "and":
                raise MalformedQuery(pos, "'and'")
            expect_clause = True
    if expect_clause:
        raise MalformedQuery(tokens[-1][1], "a clause after 'and'")
    key, value, pos = clauses[0]
    if key != "kind":
        raise MalformedQuery(pos, "kind=<function|call|usage> first")
    if value not in KINDS:
        raise MalformedQuery(pos, "one of function, call, usage")
    kind = value
    predicates = []
    for key, val, pos in clauses[1:]:
        if key == "kind":
            raise MalformedQuery(pos, "a single kind clause")
        if key not in _KEYS_FOR_KIND[kind]:
            raise MalformedQuery(pos, f"one of {', '.join(_KEYS_FOR_KIND[kind])}")
        if key == "line" and not _LINE_RE.match(val):
            raise MalformedQuery(pos, "line=N or line=A..B")
        predicates.append((key, val))
    return QuerySpec(kind=kind, predicates=tuple(predicates))


def query_info(index: CodeIndex, query: QuerySpec | str) -> QueryResult:
    """Evaluate a parsed or textual query; an empty result is valid."""
    spec = parse_query(query) if isinstance(query, str) else query
    if spec.kind == "function":
        pool = [d for defs in index.functions.values() for d in defs]
        pool.sort(key=lambda d: (d.file, d.start_line, d.qualified_name))
        matches = [d for d in pool if _match_function(d, spec.predicates)]
    elif spec.kind == "call":
        pool = [s for sites in index.calls.values() for s in sites]
        pool.sort(key=lambda s: (s.file, s.line, s.callee_name))
        matches = [s for s in pool if _match_call(s, spec.predicates)]
    else:
        pool = [s for sites in index.usages.values() for s in sites]
        pool.sort(key=lambda s: (s.file, s.line, s.symbol, s.kind))
        matches = [s for s in pool if _match_usage(s, spec.predicates)]
    return QueryResult(kind=spec.kind, matches=tuple(matches))


def _line_range(val: str) -> tuple[int, int]:
    m = _LINE_RE.match(val)
    a = int(m.group(1))
    b = int(m.group(2)) if m.group(2) else a
    return a, b


def _match_function(d: FunctionDef, preds) -> bool:
    for key, val in preds:
        if key == "name" and not (fnmatchcase(d.name, val)
                                  or fnmatchcase(d.qualified_name, val)):
            return False
        if key == "file" and not fnmatchcase(d.file, val):
            return False
        if key == "line":
            a, b = _line_range(val)
            if d.end_line < a or d.start_line > b:
                return False
    return True


def _match_call(s: CallSite, preds) -> bool:
    for key, val in preds:
        if key == "callee_name" and not fnmatchcase(s.callee_name, val):
            return False
        if key == "caller" and not fnmatchcase(s.caller, val):
            return False
        if key == "file" and not fnmatchcase(s.file, val):
            return False
        if key == "line":
            a, b = _line_range(val)
            if not a <= s.line <= b:
                return False
    return True


def _match_usage(s: UsageSite, preds) -> bool:
    for key, val in preds:
        if key == "symbol" and not fnmatchcase(s.symbol, val):
            return False
        if key == "usage_kind" and s.kind != val:
            return False
        if key == "enclosing" and not fnmatchcase(s.enclosing_function or "", val):
            return False
        if key == "file" and not fnmatchcase(s.file, val):
            return False
        if key == "line":
            a, b = _line_range(val)
            if not a <= s.line <= b:
                return False
    return True
