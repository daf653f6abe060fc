"""Stage one: semantic patch classification and the CVE confidence gate.

classify_patch runs four model steps in order: (1) patch-and-context
analysis with CVE descriptions deliberately excluded, (2) security
boundary assessment, (3) non-security categorization only when step 2
fails (recall-biased toward security), (4) confidence scoring. A CVE is
kept for stage two iff at least one of its patches classifies as security
with confidence at or above the threshold; the boundary comparison is
`>=`, so 0.9 passes a 0.9 gate and 0.8999 does not.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .errors import EmptyPatch, MixedCveInput
from .ingest import Discussion, Hunk, PatchRecord
from .llmgateway import LlmSession, structured_call

CATEGORIES = ("security", "test", "support", "defect")

DEFAULT_THRESHOLD = 0.9


@dataclass(frozen=True)
class ClassificationResult:
    patch_ref: str
    cve_id: str
    language: str
    category: str
    confidence: float
    intent_summary: str
    boundary_assessment: str
    used_auxiliary: bool

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category: {self.category}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence out of [0,1]")
        if (self.category == "security") != bool(self.boundary_assessment):
            raise ValueError("boundary_assessment non-empty iff category=security")


@dataclass(frozen=True)
class GateDecision:
    cve_id: str
    kept: bool
    qualifying_patches: tuple[str, ...]
    threshold: float


@dataclass
class ClassificationReport:
    """Per-language category counts and percentages (Table-style summary)."""

    by_language: dict[str, dict[str, int]] = field(default_factory=dict)
    percentages: dict[str, dict[str, float]] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    grand_total: int = 0


def render_hunks(hunks: tuple[Hunk, ...]) -> str:
    """Human-readable hunk listing used in prompts."""
    parts = []
    for i, h in enumerate(hunks, start=1):
        parts.append(f"hunk {i} (old line {h.old_start}, new line {h.new_start}):")
        parts.extend(f"  - {l}" for l in h.removed)
        parts.extend(f"  + {l}" for l in h.added)
    return "\n".join(parts)


def _auxiliary_block(discussion: Discussion, ablate: bool) -> tuple[str, bool]:
    if ablate or discussion.source == "none" or not discussion.body_texts:
        return "(no discussion available)", False
    bodies = "\n---\n".join(discussion.body_texts)
    return f"source: {discussion.source}\n{bodies}", True


def classify_patch(record: PatchRecord, discussion: Discussion,
                   gateway: LlmSession, ablate_auxiliary: bool = False) -> ClassificationResult:
    """Run the four classification steps for one patch.

    CVE description text never enters these prompts; it emphasizes impact
    over fix mechanics and would bias the outcome. When ablate_auxiliary
    is set, discussion bodies are withheld as well.
    """
    if not record.diff_hunks:
        raise EmptyPatch(record.record_id)
    patch_text = render_hunks(record.diff_hunks)
    auxiliary, used_aux = _auxiliary_block(discussion, ablate_auxiliary)
    metadata = (f"repo: {record.repo_id}\nfile: {record.file_path}\n"
                f"language: {record.language}")

    intent = structured_call(
        gateway, "classify_intent",
        {"metadata": metadata, "commit_message": record.commit_message,
         "patch": patch_text, "func_before": record.func_before,
         "func_after": record.func_after, "auxiliary": auxiliary},
        ("intent_summary",),
    )
    intent_summary = str(intent["intent_summary"])

    boundary = structured_call(
        gateway, "classify_boundary",
        {"intent_summary": intent_summary, "patch": patch_text,
         "func_before": record.func_before},
        ("security_boundary", "boundary_assessment"),
        validate=_require_bool("security_boundary"),
    )

    if boundary["security_boundary"]:
        category = "security"
        boundary_assessment = str(boundary["boundary_assessment"])
        assessment_for_confidence = boundary_assessment
    else:
        cat = structured_call(
            gateway, "classify_category",
            {"intent_summary": intent_summary,
             "boundary_assessment": str(boundary["boundary_assessment"]),
             "patch": patch_text},
            ("category", "rationale"),
            validate=_require_category,
        )
        category = str(cat["category"])
        # recall-biased escape: step 3 may still land on security
        boundary_assessment = str(cat["rationale"]) if category == "security" else ""
        assessment_for_confidence = str(cat["rationale"])

    conf = structured_call(
        gateway, "classify_confidence",
        {"category": category, "intent_summary": intent_summary,
         "assessment": assessment_for_confidence},
        ("confidence",),
        validate=_require_number("confidence"),
    )
    confidence = min(1.0, max(0.0, float(conf["confidence"])))

    return ClassificationResult(
        patch_ref=record.record_id,
        cve_id=record.cve_id,
        language=record.language,
        category=category,
        confidence=confidence,
        intent_summary=intent_summary,
        boundary_assessment=boundary_assessment,
        used_auxiliary=used_aux,
    )


def _require_bool(key):
    def check(obj):
        if not isinstance(obj[key], bool):
            raise ValueError(f"{key} must be a boolean")
    return check


def _require_number(key):
    def check(obj):
        if not isinstance(obj[key], (int, float)) or isinstance(obj[key], bool):
            raise ValueError(f"{key} must be a number")
    return check


def _require_category(obj):
    if obj["category"] not in CATEGORIES:
        raise ValueError(f"category must be one of {CATEGORIES}")


def gate_cve(results: list[ClassificationResult], threshold: float = DEFAULT_THRESHOLD) -> GateDecision:
    """Keep a CVE iff some patch is security with confidence >= threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0,1]")
    if not results:
        raise MixedCveInput("gate_cve needs at least one result")
    cve_ids = {r.cve_id for r in results}
    if len(cve_ids) != 1:
        raise MixedCveInput(f"results span CVEs: {sorted(cve_ids)}")
    qualifying = tuple(r.patch_ref for r in results
                       if r.category == "security" and r.confidence >= threshold)
    return GateDecision(cve_id=results[0].cve_id, kept=bool(qualifying),
                        qualifying_patches=qualifying, threshold=threshold)


def summarize_classification(results: list[ClassificationResult]) -> ClassificationReport:
    """Category counts per language with per-language percentages."""
    report = ClassificationReport()
    counts: dict[str, dict[str, int]] = defaultdict(lambda: {c: 0 for c in CATEGORIES})
    for r in results:
        counts[r.language][r.category] += 1
    for lang in sorted(counts):
        report.by_language[lang] = dict(counts[lang])
        total = sum(counts[lang].values())
        report.totals[lang] = total
        report.percentages[lang] = {
            c: (100.0 * counts[lang][c] / total) if total else 0.0
            for c in CATEGORIES
        }
    report.grand_total = sum(report.totals.values())
    return report
