"""Index construction and the function/caller/code/value lookup tools."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NoParsableFiles, UnknownFile, UnsupportedLanguage
from ..ingest import SnapshotRef
from . import lexer

log = logging.getLogger("patchsieve.codeindex")

SUPPORTED_LANGUAGES = frozenset({"c", "cpp", "java"})

_KIND_RANK = {"definition": 0, "initialization": 1}


@dataclass(frozen=True)
class FunctionDef:
    name: str
    qualified_name: str
    file: str
    start_line: int
    end_line: int
    signature: str
    body: str


@dataclass(frozen=True)
class CallSite:
    caller: str       # qualified name of the enclosing function
    callee_name: str
    file: str
    line: int


@dataclass(frozen=True)
class UsageSite:
    symbol: str
    kind: str         # definition | initialization | read | write | member_access
    file: str
    line: int
    enclosing_function: str | None


@dataclass(frozen=True)
class CodeSnippet:
    file: str
    start: int
    end: int
    lines: tuple[str, ...]
    clamped: bool
    clamp_note: str
    has_trailing_newline: bool

    def raw_text(self) -> str:
        """Verbatim reconstruction; concatenating full-file snippets
        reproduces the file byte-exactly."""
        body = "\n".join(self.lines)
        if self.has_trailing_newline:
            body += "\n"
        return body

    def annotated(self) -> str:
        out = [f"// {self.file}:{self.start}-{self.end}"]
        out.extend(f"{self.start + i:5d}| {l}" for i, l in enumerate(self.lines))
        if self.clamp_note:
            out.append(f"// note: {self.clamp_note}")
        return "\n".join(out)


@dataclass
class CodeIndex:
    """Read-only after build; safe for unlimited concurrent readers."""

    snapshot: SnapshotRef
    functions: dict[str, list[FunctionDef]] = field(default_factory=dict)
    calls: dict[str, list[CallSite]] = field(default_factory=dict)
    usages: dict[str, list[UsageSite]] = field(default_factory=dict)
    files: dict[str, tuple[str, ...]] = field(default_factory=dict)
    trailing_newline: dict[str, bool] = field(default_factory=dict)
    parse_failures: list[tuple[str, str]] = field(default_factory=list)


def build_index(snapshot: SnapshotRef, languages: set[str] | None = None) -> CodeIndex:
    """Scan every admitted file under the snapshot into an index.

    Per-file parse failures are recorded, not raised; an empty admitted
    set (or a snapshot where every file fails) raises NoParsableFiles.
    """
    languages = set(languages or {"c", "cpp", "java"})
    unknown = languages - SUPPORTED_LANGUAGES
    if unknown:
        raise UnsupportedLanguage(
            f"no grammar for: {sorted(unknown)} (supported: {sorted(SUPPORTED_LANGUAGES)})")
    index = CodeIndex(snapshot=snapshot)
    root = Path(snapshot.root_dir)
    admitted = []
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.name == ".patchsieve-complete":
            continue
        rel = str(path.relative_to(root))
        lang = lexer.language_for_path(rel, languages)
        if lang:
            admitted.append((rel, path, lang))
    parsed_any = False
    for rel, path, lang in admitted:
        text = path.read_text(encoding="utf-8", errors="replace")
        scan = lexer.scan_file(text, lang)
        if scan.failure:
            index.parse_failures.append((rel, scan.failure))
            log.warning("parse failure in %s: %s", rel, scan.failure)
            continue
        parsed_any = True
        lines = tuple(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))
        index.files[rel] = lines
        index.trailing_newline[rel] = text.endswith("\n")
        lmap = lexer.LineMap(text)
        raw_to_def = {}
        for raw in scan.functions:
            start = lmap.line(raw.header_start)
            end = lmap.line(raw.close_brace)
            fdef = FunctionDef(
                name=raw.name, qualified_name=raw.qualified_name, file=rel,
                start_line=start, end_line=end, signature=raw.header_text,
                body="\n".join(lines[start - 1:end]),
            )
            raw_to_def[id(raw)] = fdef
            index.functions.setdefault(raw.name, []).append(fdef)
        for raw_fn, call in scan.calls:
            site = CallSite(
                caller=raw_to_def[id(raw_fn)].qualified_name,
                callee_name=call.callee, file=rel, line=lmap.line(call.offset),
            )
            index.calls.setdefault(call.callee, []).append(site)
        for raw_fn, usage in scan.usages:
            site = UsageSite(
                symbol=usage.symbol, kind=usage.kind, file=rel,
                line=lmap.line(usage.offset),
                enclosing_function=(raw_to_def[id(raw_fn)].qualified_name
                                    if raw_fn is not None else None),
            )
            index.usages.setdefault(usage.symbol, []).append(site)
    if not parsed_any:
        raise NoParsableFiles(f"no parsable {sorted(languages)} files under {root}")
    for defs in index.functions.values():
        defs.sort(key=lambda d: (d.file, d.start_line))
    for sites in index.calls.values():
        sites.sort(key=lambda s: (s.file, s.line))
    for sites in index.usages.values():
        sites.sort(key=lambda s: (s.file, s.line, _KIND_RANK.get(s.kind, 2)))
    return index


def func_info(index: CodeIndex, name: str, file_hint: str | None = None) -> list[FunctionDef]:
    """All definitions matching a (simple or qualified) name.

    With a file_hint, matches in that file sort first. Unknown names
    yield an empty list, which is a valid answer.
    """
    matches = list(index.functions.get(name, []))
    if not matches and ("::" in name or "." in name):
        simple = name.replace("::", ".").split(".")[-1]
        matches = [d for d in index.functions.get(simple, [])
                   if d.qualified_name in (name, name.replace(".", "::"))]
    if file_hint:
        matches.sort(key=lambda d: (d.file != file_hint, d.file, d.start_line))
    return matches


def caller_info(index: CodeIndex, name: str) -> list[CallSite]:
    """Every site whose callee matches the bare name (name-based resolution)."""
    return list(index.calls.get(name, []))


def code_info(index: CodeIndex, file: str, start: int, end: int) -> CodeSnippet:
    """Verbatim lines start..end inclusive, clamped to the file with a note."""
    if start > end:
        raise ValueError("start must be <= end")
    if file not in index.files:
        raise UnknownFile(file)
    lines = index.files[file]
    n = len(lines)
    cstart, cend = max(1, start), min(n, end)
    if cstart > n:
        cstart = max(1, n)
        cend = n
    clamped = (cstart, cend) != (start, end)
    note = (f"range {start}..{end} clamped to {cstart}..{cend} (file has {n} lines)"
            if clamped else "")
    is_tail = cend == n
    return CodeSnippet(
        file=file, start=cstart, end=cend, lines=tuple(lines[cstart - 1:cend]),
        clamped=clamped, clamp_note=note,
        has_trailing_newline=(not is_tail) or index.trailing_newline[file],
    )


def canonical_symbol(symbol: str) -> str:
    """Normalize a symbol expression: `s->a` and `s . a` both key `s.a`."""
    return symbol.strip().replace("->", ".").replace(" ", "").replace("\t", "")


def value_info(index: CodeIndex, symbol: str, kind: str = "variable",
               scope_hint: str | None = None) -> list[UsageSite]:
    """Usage sites for a variable or `base.field` member key.

    A kind/shape mismatch (member without a dot, variable with one)
    yields an empty list. scope_hint narrows to one enclosing function by
    simple or qualified name.
    """
    if kind not in ("variable", "member"):
        raise ValueError("kind must be variable or member")
    key = canonical_symbol(symbol)
    if kind == "member" and "." not in key:
        return []
    if kind == "variable" and "." in key:
        return []
    sites = list(index.usages.get(key, []))
    if scope_hint:
        sites = [s for s in sites if _scope_matches(s.enclosing_function, scope_hint)]
    return sites


def _scope_matches(enclosing: str | None, hint: str) -> bool:
    if enclosing is None:
        return False
    if enclosing == hint:
        return True
    return enclosing.replace("::", ".").split(".")[-1] == hint
