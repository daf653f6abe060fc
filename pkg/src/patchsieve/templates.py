"""Prompt template registry.

Templates are ordered (role, text) blocks with `{{name}}` placeholders.
Rendering is strict: an unbound placeholder is an error, never emitted
literally. Each template carries the model tag that selects which
configured model serves it.

Structured-output contract: unless noted otherwise, responses must carry a
fenced ```json block whose object is the step's machine-readable result;
wording outside the fence is free-form rationale. The detection task uses
a final-token contract (last token VUL or NO_VUL) instead.
"""

from __future__ import annotations

from dataclasses import dataclass

MODEL_TAGS = ("classify", "analysis", "context", "detect", "judge")


@dataclass(frozen=True)
class Template:
    template_id: str
    model_tag: str
    blocks: tuple[tuple[str, str], ...]  # (role, text with {{placeholders}})


_STRUCTURED_NOTE = (
    "End your reply with one fenced ```json block containing exactly the "
    "keys listed above."
)

_REGISTRY: dict[str, Template] = {}


def _register(template_id: str, model_tag: str, *blocks: tuple[str, str]) -> None:
    _REGISTRY[template_id] = Template(template_id, model_tag, tuple(blocks))


def get_template(template_id: str) -> Template | None:
    return _REGISTRY.get(template_id)


def template_ids() -> tuple[str, ...]:
    return tuple(_REGISTRY)


# --- stage one: patch classification ----------------------------------------

_register(
    "classify_intent", "classify",
    ("system",
     "You review version-control patches. Work only from the provided "
     "patch, commit message, and discussion; judge the change's purpose "
     "from its repair strategy and technical impact. Prioritize "
     "code-level evidence over prose claims."),
    ("user",
     "Patch metadata:\n{{metadata}}\n\nCommit message:\n{{commit_message}}\n\n"
     "Changed hunks:\n{{patch}}\n\nFunction before:\n{{func_before}}\n\n"
     "Function after:\n{{func_after}}\n\nDiscussion:\n{{auxiliary}}\n\n"
     "Summarize what this patch is for in a few sentences.\n"
     "Keys: intent_summary. " + _STRUCTURED_NOTE),
)

_register(
    "classify_boundary", "classify",
    ("system",
     "You assess whether a patch addresses a security boundary: did the "
     "pre-patch code contain a condition that could, under "
     "attacker-controlled inputs or certain operational scenarios, "
     "compromise the system's intended security properties, and is the "
     "patch intended to eliminate that condition?"),
    ("user",
     "Intent summary:\n{{intent_summary}}\n\nChanged hunks:\n{{patch}}\n\n"
     "Function before:\n{{func_before}}\n\n"
     "Answer whether both criteria hold.\n"
     "Keys: security_boundary (true/false), boundary_assessment. "
     + _STRUCTURED_NOTE),
)

_register(
    "classify_category", "classify",
    ("system",
     "You label patches that do not primarily address a security boundary. "
     "Categories:\n"
     "- test: testing and validation updates (testcases, debug statements, "
     "logging).\n"
     "- support: supporting, non-core improvements (comments, style, "
     "configuration) outside core logic blocks.\n"
     "- defect: non-security bug fixes or feature/efficiency upgrades to "
     "core logic.\n"
     "The defect boundary is the hardest: if you are uncertain whether the "
     "change removes a security condition, favor security rather than "
     "forcing a non-security label."),
    ("user",
     "Intent summary:\n{{intent_summary}}\n\nBoundary assessment:\n"
     "{{boundary_assessment}}\n\nChanged hunks:\n{{patch}}\n\n"
     "Pick one category: test, support, defect, or security (only when "
     "uncertainty forces the recall-biased escape).\n"
     "Keys: category, rationale. " + _STRUCTURED_NOTE),
)

_register(
    "classify_confidence", "classify",
    ("system",
     "You score your certainty in a patch classification from 0.0 to 1.0."),
    ("user",
     "Category: {{category}}\nIntent summary:\n{{intent_summary}}\n"
     "Assessment:\n{{assessment}}\n\n"
     "Keys: confidence. " + _STRUCTURED_NOTE),
)

# --- stage two: analysis loop ------------------------------------------------

_register(
    "analysis_review", "analysis",
    ("system",
     "You are the analysis side of a vulnerability tracing loop, operating "
     "under a Zero-Assumption policy: infer nothing beyond the explicitly "
     "provided code. Classify the vulnerability into a broad category "
     "(memory, logic, configuration, concurrency, other) and explain each "
     "hunk of the patch, citing the file name and a line number for every "
     "observation."),
    ("user",
     "{{cve_hint}}Patched files and hunks:\n{{bundle}}\n\n"
     "Keys: broad_category, hunk_explanations (list of objects with file, "
     "line, explanation). " + _STRUCTURED_NOTE),
)

_register(
    "analysis_trace", "analysis",
    ("system",
     "Continue tracing the vulnerability's root cause by strictly following "
     "function calls and data flows in the code you have. Where the "
     "evidence chain breaks -- a call or data flow leaves the available "
     "code -- record a GAP stating why the analysis cannot continue."),
    ("user",
     "Initial review:\n{{review}}\n\nPatched files and hunks:\n{{bundle}}\n\n"
     "Collected context so far:\n{{contexts}}\n\n"
     "Keys: narrative, gaps (list of objects with description, break_point, "
     "reason). " + _STRUCTURED_NOTE),
)

_register(
    "analysis_formulate", "analysis",
    ("system",
     "Turn open gaps into precise context requests. Each request has a kind "
     "(function, code, caller, variable, query), a target (function name, "
     "file:start-end range, variable or member expression, or structural "
     "query), and a rationale. Do not repeat requests already fulfilled; "
     "if a previous attempt for similar information came back empty, you "
     "may try an alternative kind."),
    ("user",
     "Open gaps:\n{{gaps}}\n\nAlready fulfilled request keys:\n{{fulfilled}}\n\n"
     "Previously empty request keys:\n{{empties}}\n\n"
     "Keys: requests (list of objects with kind, target, rationale). "
     + _STRUCTURED_NOTE),
)

_register(
    "analysis_score", "analysis",
    ("system",
     "Score your confidence in the traced root cause from 0.0 to 1.0. "
     "Assign a high score only if the full trigger chain is evident in the "
     "available code; an incomplete chain earns a low score."),
    ("user",
     "Current narrative:\n{{narrative}}\n\nOpen gaps:\n{{gaps}}\n\n"
     "Collected context count: {{context_count}}\n\n"
     "Keys: confidence. " + _STRUCTURED_NOTE),
)

_register(
    "analysis_label_undecidable", "analysis",
    ("system",
     "The analysis hit its iteration cap. Label why, using exactly one of:\n"
     "- runtime_high_level: needs runtime information or high-level program "
     "understanding (hidden system-level consequences).\n"
     "- logic_dependent: violates complex or unstated application logic "
     "known only to developers.\n"
     "- ambiguous_defensive: a defensive check whose necessity and placement "
     "cannot be established from context.\n"
     "- external_knowledge: depends on external specifications, API "
     "conventions, or device-specific knowledge.\n"
     "- misclassified_functional: the patch is functional or an "
     "optimization, not a security fix.\n"
     "- tool_limited: tooling failures or noise blocked the critical path."),
    ("user",
     "Transcript summary:\n{{transcript}}\n\n"
     "Keys: reason, justification. " + _STRUCTURED_NOTE),
)

# --- context agent: tool parameter extraction --------------------------------

_register(
    "context_params_function", "context",
    ("system",
     "Extract tool parameters for a function-definition lookup from the "
     "request below."),
    ("user",
     "Request target: {{target}}\nRationale: {{rationale}}\n\n"
     "Keys: name, file_hint (path or null). " + _STRUCTURED_NOTE),
)

_register(
    "context_params_caller", "context",
    ("system",
     "Extract tool parameters for a caller lookup from the request below."),
    ("user",
     "Request target: {{target}}\nRationale: {{rationale}}\n\n"
     "Keys: name. " + _STRUCTURED_NOTE),
)

_register(
    "context_params_code", "context",
    ("system",
     "Extract tool parameters for a code-snippet extraction from the "
     "request below."),
    ("user",
     "Request target: {{target}}\nRationale: {{rationale}}\n\n"
     "Keys: file, start, end. " + _STRUCTURED_NOTE),
)

_register(
    "context_params_variable", "context",
    ("system",
     "Extract tool parameters for a variable or structure-member usage "
     "trace from the request below."),
    ("user",
     "Request target: {{target}}\nRationale: {{rationale}}\n\n"
     "Keys: symbol, kind (variable or member), scope_hint (function name "
     "or null). " + _STRUCTURED_NOTE),
)

_register(
    "context_params_query", "context",
    ("system",
     "Write one structural query for the code index. Grammar: "
     "kind=function|call|usage followed by `and field=value` predicates; "
     "fields: name, callee_name, caller, symbol, usage_kind, file (globs "
     "allowed), line=A..B."),
    ("user",
     "Request target: {{target}}\nRationale: {{rationale}}\n\n"
     "Keys: query. " + _STRUCTURED_NOTE),
)

# --- repair ------------------------------------------------------------------

_register(
    "repair_structured", "classify",
    ("system",
     "Your previous reply did not satisfy the structured-output contract. "
     "Re-emit it, fixing only the machine-readable part."),
    ("user",
     "Previous reply:\n{{previous}}\n\nProblem: {{problem}}\n\n"
     "Required keys: {{keys}}. " + _STRUCTURED_NOTE),
)

_register(
    "repair_final_token", "detect",
    ("system",
     "Your previous reply did not end with the required final token. "
     "Re-emit your analysis ending with exactly one of: VUL or NO_VUL."),
    ("user", "Previous reply:\n{{previous}}\n"),
)

# --- detection eval ------------------------------------------------------------

_register(
    "detect_vd", "detect",
    ("system",
     "You are a vulnerability detector. Analyze the code step by step for "
     "the weakness class described in the task, then answer with exactly "
     "one final token on the last line: VUL or NO_VUL."),
    ("user",
     "Task:\n{{task_description}}\n\nCode:\n{{code}}\n{{context_block}}\n"
     "Respond with your analysis, then the final token."),
)

_register(
    "judge_root_cause", "judge",
    ("system",
     "You judge whether a detector's claimed root cause matches the known "
     "vulnerability. Ground truth follows; compare mechanism and location, "
     "not wording."),
    ("user",
     "Ground truth:\nCVE description: {{cve_description}}\nCWE ids: "
     "{{cwe_ids}}\nPatch:\n{{patch}}\nKnown root cause:\n{{root_cause}}\n\n"
     "Detector analysis ({{side}}-patch code):\n{{analysis}}\n\n"
     "Keys: match (true/false), rationale. " + _STRUCTURED_NOTE),
)
