"""Lexical groundwork for the syntactic code index.

The scan rules below define the index's semantics for C, C++, and Java.
The test suite re-implements them in an independent brute-force oracle,
so they are written down precisely:

- The *mask* is the source text with comments, string/char literals, and
  (for C/C++) preprocessor directive lines blanked to spaces; newlines
  survive, so offsets and line numbers match the original.
- Function definitions are headers `NAME(params) {` at file scope (C),
  at namespace/class scope or file scope (C++), or at class/interface
  scope (Java). Out-of-class C++ definitions keep their `Scope::name`
  qualifier. Headers containing `=` never open functions.
- Statement segments are mask spans between `;`, `{`, and `}`. A `for (`
  prefix is stripped before checking the first segment of a loop header
  for a declaration.
- A declaration is a single-declarator statement `quals TYPE decorators
  NAME [array] [= init]`; it yields a definition site (plus an
  initialization site when an initializer is present) anchored at the
  declarator name, and the initializer expression is scanned for further
  usages. Array-extent expressions in declarations are not scanned.
- At file scope (C/C++ only), only declaration-shaped statements yield
  sites; prototypes and other file-scope text are ignored. Java has no
  file-scope statements to scan. Declarations inside struct/class/enum
  bodies (fields) are not usage sites.
- Function parameters yield definition sites anchored at the parameter
  name.
- In an expression, an identifier is classified left to right:
  keyword -> ignored; followed by `(` -> call site (callee is the bare
  identifier); followed by `::` -> qualifier, ignored; preceded by
  `.`/`->` -> member field (call site if followed by `(`, otherwise
  folded into its base's member site); followed by `.`/`->` -> base of a
  member expression, recorded as a read, plus a member site
  `base.field` keyed on the first link whose kind (write vs
  member_access) is decided by the operator after the whole chain or an
  adjacent `++`/`--`; adjacent `++`/`--` or a following assignment
  operator -> write; anything else -> read. Member sites anchor at the
  base identifier.

Deliberate lexical simplifications (shared with the oracle): deref
assignment `*p = x` records p as a write; array-element assignment
`a[i] = x` records a as a read; a cast's type name reads as an
identifier; only the first link of a member chain forms the member key;
a member chain whose first link is a call records only the base read and
the call.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field

LANG_EXTENSIONS: dict[str, tuple[str, ...]] = {
    "c": (".c", ".h"),
    "cpp": (".cpp", ".cc", ".cxx", ".hpp", ".hh", ".hxx"),
    "java": (".java",),
}

_BASE_KEYWORDS = {
    "if", "else", "for", "while", "do", "switch", "case", "default",
    "return", "break", "continue", "goto", "sizeof", "struct", "union",
    "enum", "typedef", "static", "extern", "const", "volatile", "unsigned",
    "signed", "void", "int", "char", "short", "long", "float", "double",
    "register", "inline", "auto", "defined", "NULL", "true", "false",
}

KEYWORDS: dict[str, frozenset[str]] = {
    "c": frozenset(_BASE_KEYWORDS),
    "cpp": frozenset(_BASE_KEYWORDS | {
        "class", "namespace", "template", "typename", "new", "delete",
        "this", "public", "private", "protected", "virtual", "override",
        "final", "bool", "using", "operator", "try", "catch", "throw",
        "noexcept", "constexpr", "nullptr",
    }),
    "java": frozenset(_BASE_KEYWORDS | {
        "class", "interface", "extends", "implements", "import", "package",
        "public", "private", "protected", "abstract", "synchronized",
        "transient", "native", "strictfp", "new", "this", "super", "try",
        "catch", "finally", "throw", "throws", "boolean", "byte",
        "instanceof", "null", "assert",
    }),
}

TYPE_KEYWORDS = {
    "void", "int", "char", "short", "long", "float", "double", "unsigned",
    "signed", "bool", "boolean", "byte", "size_t",
}

_STMT_KEYWORDS = {
    "if", "else", "return", "while", "do", "switch", "case", "goto",
    "break", "continue", "sizeof", "new", "delete", "throw", "try",
    "catch", "using", "typedef", "public", "private", "protected",
    "package", "import", "this", "super", "assert", "default",
}

IDENT_RE = re.compile(r"[A-Za-z_]\w*")

DECL_RE = re.compile(
    r"^\s*"
    r"(?:(?:const|static|unsigned|signed|volatile|register|struct|union|enum|final|extern|inline|long|short)\s+)*"
    r"(?P<type>[A-Za-z_]\w*(?:::[A-Za-z_]\w*)*(?:<[^<>;=]*>)?)"
    r"(?P<deco>(?:[\s\*&]|\[\s*\])+)"
    r"(?P<name>[A-Za-z_]\w*)\s*(?:\[[^\]]*\])?\s*"
    r"(?P<init>=(?!=)[\s\S]*)?$"
)

_FOR_PREFIX_RE = re.compile(r"^(\s*for\s*\()", re.DOTALL)

FUNC_HEADER_RE = re.compile(
    r"^(?P<pre>[\s\S]*?)(?P<name>[A-Za-z_]\w*)\s*\((?P<params>[^()]*)\)\s*"
    r"(?P<trailer>(?:const|noexcept|override|final)[\s\w]*|throws\s+[\w.,\s]+)?$"
)

_QUALIFIER_TAIL_RE = re.compile(r"((?:[A-Za-z_]\w*::)+)$")

SCOPE_HEADER_RE = {
    "c": re.compile(r"(?:^|[\s\S]*\s)(struct|union|enum)(?:\s+([A-Za-z_]\w*))?\s*$"),
    "cpp": re.compile(
        r"(?:^|[\s\S]*\s)(namespace|class|struct|union|enum)"
        r"(?:\s+([A-Za-z_]\w*))?\s*(?::[^{]*)?$"),
    "java": re.compile(
        r"(?:^|[\s\S]*\s)(class|interface|enum)\s+([A-Za-z_]\w*)"
        r"(?:\s+(?:extends|implements)[^{]*)?\s*$"),
}

# scope kinds inside which function definitions may appear
_FUNC_SCOPES = {
    "c": frozenset(),
    "cpp": frozenset({"namespace", "class", "struct", "union"}),
    "java": frozenset({"class", "interface"}),
}

ASSIGN_OP_RE = re.compile(r"(<<=|>>=|[+\-*/%&|^]=(?!=)|=(?!=))")

WS = " \t\r\n"


def language_for_path(path: str, languages: set[str]) -> str | None:
    """Map a file path to an admitted language, or None."""
    lower = path.lower()
    for lang in ("c", "cpp", "java"):
        if lang in languages and any(lower.endswith(e) for e in LANG_EXTENSIONS[lang]):
            return lang
    if "cpp" in languages and "c" not in languages and lower.endswith(".h"):
        return "cpp"
    return None


def mask_source(text: str, language: str) -> tuple[str, str | None]:
    """Blank comments, literals, and (C/C++) directives. Keeps offsets.

    Returns (mask, failure_reason); a non-None reason marks the file
    unparsable (unterminated literal or comment).
    """
    out = list(text)
    n = len(text)
    i = 0
    state = "code"
    at_line_start = True
    directives = language in ("c", "cpp")
    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if state == "code":
            if directives and at_line_start and ch == "#":
                state = "directive"
                out[i] = " "
            elif ch == "/" and nxt == "/":
                state = "line_comment"
                out[i] = out[i + 1] = " "
                i += 1
            elif ch == "/" and nxt == "*":
                state = "block_comment"
                out[i] = out[i + 1] = " "
                i += 1
            elif ch == '"':
                state = "string"
            elif ch == "'":
                state = "char"
        elif state == "directive":
            if ch == "\n":
                back = i - 1
                if back >= 0 and text[back] == "\r":
                    back -= 1
                if back < 0 or text[back] != "\\":
                    state = "code"
            elif ch != "\r":
                out[i] = " "
        elif state == "line_comment":
            if ch == "\n":
                state = "code"
            elif ch != "\r":
                out[i] = " "
        elif state == "block_comment":
            if ch == "*" and nxt == "/":
                out[i] = out[i + 1] = " "
                state = "code"
                i += 1
            elif ch not in "\n\r":
                out[i] = " "
        elif state in ("string", "char"):
            closing = '"' if state == "string" else "'"
            if ch == "\\":
                out[i] = " "
                if i + 1 < n and text[i + 1] not in "\n\r":
                    out[i + 1] = " "
                    i += 1
            elif ch == closing:
                state = "code"
            elif ch in "\n\r":
                return "".join(out), "unterminated literal at line break"
            else:
                out[i] = " "
        if ch == "\n":
            at_line_start = True
        elif at_line_start and (ch not in " \t" or state != "code"):
            at_line_start = False
        i += 1
    if state == "block_comment":
        return "".join(out), "unterminated block comment"
    if state in ("string", "char"):
        return "".join(out), "unterminated literal"
    return "".join(out), None


class LineMap:
    """Offset -> 1-based line number."""

    def __init__(self, text: str):
        self.starts = [0]
        for m in re.finditer(r"\n", text):
            self.starts.append(m.end())

    def line(self, offset: int) -> int:
        return bisect_right(self.starts, offset)


@dataclass
class RawFunction:
    name: str
    qualified_name: str
    header_start: int   # offset of first non-ws header char
    params_open: int    # offset of the parameter-list `(`
    open_brace: int     # offset of `{`
    close_brace: int    # offset of matching `}`
    open_depth: int     # brace depth just before `{`
    params_text: str
    header_text: str


@dataclass
class RawCall:
    callee: str
    offset: int


@dataclass
class RawUsage:
    symbol: str
    kind: str  # definition | initialization | read | write | member_access
    offset: int


@dataclass
class FileScan:
    functions: list[RawFunction] = field(default_factory=list)
    calls: list[tuple[RawFunction, RawCall]] = field(default_factory=list)
    usages: list[tuple[RawFunction | None, RawUsage]] = field(default_factory=list)
    failure: str | None = None


def skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i] in WS:
        i += 1
    return i


def skip_ws_back(text: str, i: int) -> int:
    """Index of the last non-ws char at or before i, or -1."""
    while i >= 0 and text[i] in WS:
        i -= 1
    return i


def scan_file(text: str, language: str) -> FileScan:
    """Full scan of one file: functions, calls, usage sites."""
    scan = FileScan()
    mask, failure = mask_source(text, language)
    if failure:
        scan.failure = failure
        return scan

    depth = 0
    scope_stack: list[tuple[str, str | None, int]] = []  # (kind, name, open_depth)
    current: RawFunction | None = None
    last_boundary = 0
    keywords = KEYWORDS[language]

    for i, ch in enumerate(mask):
        if ch == "{":
            if current is None:
                header = mask[last_boundary:i]
                scope = _match_scope(header, language)
                if scope:
                    scope_stack.append((scope[0], scope[1], depth))
                else:
                    fn = _match_function(header, language, depth, scope_stack, keywords)
                    if fn:
                        name, qualified, params, paren_rel = fn
                        lead = len(header) - len(header.lstrip())
                        current = RawFunction(
                            name=name, qualified_name=qualified,
                            header_start=last_boundary + lead,
                            params_open=last_boundary + lead + paren_rel,
                            open_brace=i, close_brace=-1, open_depth=depth,
                            params_text=params, header_text=" ".join(header.split()),
                        )
            depth += 1
            last_boundary = i + 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return FileScan(failure="unbalanced braces (extra '}')")
            if current is not None and depth == current.open_depth:
                current.close_brace = i
                scan.functions.append(current)
                _scan_function(scan, mask, current, language, keywords)
                current = None
            while scope_stack and scope_stack[-1][2] == depth:
                scope_stack.pop()
            last_boundary = i + 1
        elif ch == ";":
            if (current is None and depth == 0 and not scope_stack
                    and language != "java"):
                _scan_segment(scan, mask[last_boundary:i], last_boundary, None,
                              language, keywords, decl_only=True)
            last_boundary = i + 1
    if depth != 0 or current is not None:
        return FileScan(failure="unbalanced braces at end of file")
    return scan


def _match_scope(header: str, language: str):
    if "=" in header or "(" in header:
        return None
    m = SCOPE_HEADER_RE[language].match(header)
    if not m:
        return None
    return m.group(1), m.group(2)


def _match_function(header: str, language: str, depth: int, scope_stack, keywords):
    """Return (name, qualified_name, params, paren_offset) for a function header."""
    if "=" in header:
        return None
    if language == "c":
        if depth != 0 or scope_stack:
            return None
    else:
        if depth != len(scope_stack):
            return None
        if any(s[0] not in _FUNC_SCOPES[language] for s in scope_stack):
            return None
        if language == "java" and not scope_stack:
            return None
    stripped = header.strip()
    m = FUNC_HEADER_RE.match(stripped)
    if not m:
        return None
    name = m.group("name")
    if name in keywords:
        return None
    pre = m.group("pre")
    if pre and pre[-1] not in " \t\r\n*&:":
        return None
    sep = "." if language == "java" else "::"
    parts = [s[1] for s in scope_stack if s[1]]
    if language == "cpp":
        qm = _QUALIFIER_TAIL_RE.search(pre)
        if qm:
            parts.extend(p for p in qm.group(1).split("::") if p)
    parts.append(name)
    qualified = name if language == "c" else sep.join(parts)
    paren_rel = m.start("params") - 1  # position of '(' in the stripped header
    return name, qualified, m.group("params"), paren_rel


def _scan_function(scan: FileScan, mask: str, fn: RawFunction, language: str, keywords):
    _scan_params(scan, fn)
    body_start, body_end = fn.open_brace + 1, fn.close_brace
    pos = body_start
    for j in range(body_start, body_end):
        if mask[j] in ";{}":
            _scan_segment(scan, mask[pos:j], pos, fn, language, keywords)
            pos = j + 1
    _scan_segment(scan, mask[pos:body_end], pos, fn, language, keywords)


def _scan_params(scan: FileScan, fn: RawFunction):
    base = fn.params_open + 1
    offset = 0
    for part in fn.params_text.split(","):
        no_brackets = re.sub(r"\[[^\]]*\]", lambda m: " " * len(m.group(0)), part)
        idents = list(IDENT_RE.finditer(no_brackets))
        if idents:
            last = idents[-1]
            name = last.group(0)
            skip = (len(idents) == 1 and name in TYPE_KEYWORDS) or name == "void"
            if not skip:
                scan.usages.append(
                    (fn, RawUsage(name, "definition", base + offset + last.start())))
        offset += len(part) + 1


def _scan_segment(scan: FileScan, segment: str, abs_off: int,
                  fn: RawFunction | None, language: str, keywords,
                  decl_only: bool = False):
    if not segment.strip():
        return
    decl_text, decl_off = segment, 0
    fm = _FOR_PREFIX_RE.match(segment)
    if fm:
        decl_text = segment[fm.end(1):]
        decl_off = fm.end(1)
    dm = DECL_RE.match(decl_text)
    if dm and _valid_decl(dm, keywords):
        name = dm.group("name")
        name_abs = abs_off + decl_off + dm.start("name")
        scan.usages.append((fn, RawUsage(name, "definition", name_abs)))
        init = dm.group("init")
        if init is not None:
            scan.usages.append((fn, RawUsage(name, "initialization", name_abs)))
            init_abs = abs_off + decl_off + dm.start("init") + 1  # past '='
            _scan_expr(scan, init[1:], init_abs, fn, language, keywords)
        return
    if not decl_only:
        _scan_expr(scan, segment, abs_off, fn, language, keywords)


def _valid_decl(dm: re.Match, keywords) -> bool:
    base = dm.group("type").split("::")[0].split("<")[0]
    if base in _STMT_KEYWORDS:
        return False
    if dm.group("name") in keywords:
        return False
    return True


def _scan_expr(scan: FileScan, text: str, abs_off: int,
               fn: RawFunction | None, language: str, keywords):
    """Classify identifier occurrences in an expression span."""
    for m in IDENT_RE.finditer(text):
        name, start, end = m.group(0), m.start(), m.end()
        if name in keywords:
            continue
        after = skip_ws(text, end)
        if text[after:after + 1] == "(":
            if fn is not None:
                scan.calls.append((fn, RawCall(name, abs_off + start)))
            continue
        if text[after:after + 2] == "::":
            continue
        if _prev_sep(text, start):
            continue  # member-field position; folded into its base
        if _next_sep(text, end):
            chain = _walk_chain(text, end)
            scan.usages.append((fn, RawUsage(name, "read", abs_off + start)))
            if chain is not None:
                first_field, chain_end = chain
                symbol = f"{name}.{first_field}"
                if (_assign_follows(text, chain_end)
                        or _incdec_before(text, start)
                        or _incdec_after(text, chain_end)):
                    kind = "write"
                else:
                    kind = "member_access"
                scan.usages.append((fn, RawUsage(symbol, kind, abs_off + start)))
            continue
        if (_incdec_before(text, start) or _incdec_after(text, end)
                or _assign_follows(text, end)):
            scan.usages.append((fn, RawUsage(name, "write", abs_off + start)))
        else:
            scan.usages.append((fn, RawUsage(name, "read", abs_off + start)))


def _prev_sep(text: str, start: int) -> bool:
    j = skip_ws_back(text, start - 1)
    if j < 0:
        return False
    if text[j] == ".":
        return True
    return text[j] == ">" and j >= 1 and text[j - 1] == "-"


def _next_sep(text: str, end: int) -> bool:
    j = skip_ws(text, end)
    if text[j:j + 1] == "." and text[j:j + 3] != "...":
        return True
    return text[j:j + 2] == "->"


def _walk_chain(text: str, end: int):
    """Follow `.f`/`->f` links from a base identifier.

    Returns (first_field, offset_after_chain), or None when the first
    linked member is a method call (only the base read is recorded then).
    """
    first_field = None
    pos = end
    while True:
        j = skip_ws(text, pos)
        if text[j:j + 2] == "->":
            j += 2
        elif text[j:j + 1] == "." and text[j:j + 3] != "...":
            j += 1
        else:
            break
        j = skip_ws(text, j)
        fm = IDENT_RE.match(text, j)
        if not fm:
            break
        after_field = skip_ws(text, fm.end())
        if text[after_field:after_field + 1] == "(":
            # method call terminates the chain
            return (first_field, pos) if first_field else None
        if first_field is None:
            first_field = fm.group(0)
        pos = fm.end()
    return (first_field, pos) if first_field else None


def _assign_follows(text: str, pos: int) -> bool:
    j = skip_ws(text, pos)
    return ASSIGN_OP_RE.match(text, j) is not None


def _incdec_before(text: str, start: int) -> bool:
    j = skip_ws_back(text, start - 1)
    return j >= 1 and text[j - 1:j + 1] in ("++", "--")


def _incdec_after(text: str, end: int) -> bool:
    k = skip_ws(text, end)
    return text[k:k + 2] in ("++", "--")
