"""Patch-record import, snapshot materialization, and discussion cache.

The input feed is UTF-8 line-delimited JSON, one record per line with keys
exactly: cve_id, cwe_ids, repo_id, commit_hash, parent_hash, file_path,
language, func_before, func_after, diff, commit_message. `diff` is
unified-diff text for the file; context lines are dropped during parsing,
so a Hunk holds changed lines only.

Repository snapshots come from local git clones under
`<workspace>/clones/<repo_id>`; there is no network access here. Discussion
text comes from a per-record cache file and degrades to `source=none` when
absent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import stat
import subprocess
import tarfile
import threading
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DirtyWorkspace, MissingClone, MissingCommit, UnreadableFile

log = logging.getLogger("patchsieve.ingest")

LANGUAGES = ("c", "cpp", "java", "other")

FEED_KEYS = (
    "cve_id", "cwe_ids", "repo_id", "commit_hash", "parent_hash",
    "file_path", "language", "func_before", "func_after", "diff",
    "commit_message",
)

_HEX_RE = re.compile(r"^[0-9a-f]{7,64}$")
_HUNK_HEADER_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass(frozen=True)
class Hunk:
    """One changed region of a unified diff, context lines excluded."""

    old_start: int
    old_lines: int
    new_start: int
    new_lines: int
    removed: tuple[str, ...]
    added: tuple[str, ...]

    def __post_init__(self):
        if self.old_lines != len(self.removed) or self.new_lines != len(self.added):
            raise ValueError("hunk line counts must match removed/added lengths")
        if not self.removed and not self.added:
            raise ValueError("hunk must change at least one line")


@dataclass(frozen=True)
class PatchRecord:
    """One file-level patch of one commit of one CVE."""

    cve_id: str
    cwe_ids: tuple[str, ...]
    repo_id: str
    commit_hash: str
    parent_hash: str
    file_path: str
    language: str
    func_before: str
    func_after: str
    diff_hunks: tuple[Hunk, ...]
    commit_message: str

    def __post_init__(self):
        if self.commit_hash == self.parent_hash:
            raise ValueError("commit_hash must differ from parent_hash")
        if not self.file_path:
            raise ValueError("file_path must be non-empty")

    @property
    def record_id(self) -> str:
        return f"{self.cve_id}::{self.commit_hash[:12]}::{self.file_path}"


@dataclass(frozen=True)
class SnapshotRef:
    """Materialized checkout of one side of a patch commit."""

    repo_id: str
    commit_hash: str
    side: str  # "pre" | "post"
    root_dir: Path
    file_count: int


@dataclass(frozen=True)
class Discussion:
    """Cached PR/issue discussion attached to a patch, or none."""

    source: str  # "pull_request" | "issue" | "none"
    url: str
    body_texts: tuple[str, ...]

    @property
    def total_words(self) -> int:
        return sum(len(t.split()) for t in self.body_texts)


@dataclass(frozen=True)
class Reject:
    line_no: int
    field: str
    message: str


@dataclass
class LoadResult:
    records: list[PatchRecord] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)


def parse_hunks(diff_text: str) -> tuple[Hunk, ...]:
    """Parse unified-diff text into Hunks holding changed lines only.

    One Hunk per `@@` section. Header line counts are recomputed from the
    +/- lines actually present, so context-bearing diffs and contextless
    diffs parse to the same Hunk values.
    """
    hunks = []
    cur = None  # (old_start, new_start, removed, added)
    for line in diff_text.splitlines():
        m = _HUNK_HEADER_RE.match(line)
        if m:
            if cur and (cur[2] or cur[3]):
                hunks.append(_mk_hunk(*cur))
            cur = (int(m.group(1)), int(m.group(3)), [], [])
            continue
        if cur is None:
            continue  # file headers (---/+++), noise before first @@
        if line.startswith("-") and not line.startswith("---"):
            cur[2].append(line[1:])
        elif line.startswith("+") and not line.startswith("+++"):
            cur[3].append(line[1:])
    if cur and (cur[2] or cur[3]):
        hunks.append(_mk_hunk(*cur))
    return tuple(hunks)


def _mk_hunk(old_start, new_start, removed, added) -> Hunk:
    return Hunk(
        old_start=old_start,
        old_lines=len(removed),
        new_start=new_start,
        new_lines=len(added),
        removed=tuple(removed),
        added=tuple(added),
    )


def render_diff(hunks: tuple[Hunk, ...]) -> str:
    """Render hunks back to contextless unified-diff text.

    parse_hunks(render_diff(h)) == h, which gives the feed round-trip.
    """
    out = []
    for h in hunks:
        out.append(f"@@ -{h.old_start},{h.old_lines} +{h.new_start},{h.new_lines} @@")
        out.extend("-" + l for l in h.removed)
        out.extend("+" + l for l in h.added)
    return "\n".join(out) + ("\n" if out else "")


def record_to_feed_obj(record: PatchRecord) -> dict:
    """Serialize a record to the feed's line-object shape."""
    return {
        "cve_id": record.cve_id,
        "cwe_ids": list(record.cwe_ids),
        "repo_id": record.repo_id,
        "commit_hash": record.commit_hash,
        "parent_hash": record.parent_hash,
        "file_path": record.file_path,
        "language": record.language,
        "func_before": record.func_before,
        "func_after": record.func_after,
        "diff": render_diff(record.diff_hunks),
        "commit_message": record.commit_message,
    }


def record_from_feed_obj(obj: dict) -> PatchRecord:
    """Build a PatchRecord from a parsed feed object. Raises on bad fields."""
    missing = [k for k in FEED_KEYS if k not in obj]
    if missing:
        raise KeyError(missing[0])
    extra = [k for k in obj if k not in FEED_KEYS]
    if extra:
        raise ValueError(f"unexpected key: {extra[0]}")
    for key in ("cve_id", "repo_id", "commit_hash", "parent_hash", "file_path",
                "language", "func_before", "func_after", "diff", "commit_message"):
        if not isinstance(obj[key], str):
            raise TypeError(key)
    if not isinstance(obj["cwe_ids"], list) or not all(isinstance(c, str) for c in obj["cwe_ids"]):
        raise TypeError("cwe_ids")
    for key in ("commit_hash", "parent_hash"):
        if not _HEX_RE.match(obj[key]):
            raise ValueError(f"not a hex hash: {key}")
    if obj["language"] not in LANGUAGES:
        raise ValueError("language")
    return PatchRecord(
        cve_id=obj["cve_id"],
        cwe_ids=tuple(obj["cwe_ids"]),
        repo_id=obj["repo_id"],
        commit_hash=obj["commit_hash"],
        parent_hash=obj["parent_hash"],
        file_path=obj["file_path"],
        language=obj["language"],
        func_before=obj["func_before"],
        func_after=obj["func_after"],
        diff_hunks=parse_hunks(obj["diff"]),
        commit_message=obj["commit_message"],
    )


def load_patch_records(path: Path | str) -> LoadResult:
    """Load the line-delimited feed. Malformed lines land in .rejects.

    Records keep input line order. A reject names the first offending
    field of its line; it never aborts the load.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UnreadableFile(str(e)) from e
    result = LoadResult()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise TypeError("record")
            result.records.append(record_from_feed_obj(obj))
        except json.JSONDecodeError as e:
            result.rejects.append(Reject(line_no, "(json)", str(e)))
        except KeyError as e:
            result.rejects.append(Reject(line_no, str(e.args[0]), "missing field"))
        except TypeError as e:
            result.rejects.append(Reject(line_no, str(e.args[0]) if e.args else "(type)", "wrong type"))
        except ValueError as e:
            msg = str(e)
            fld = msg.split(": ")[-1] if ": " in msg else msg.split(":")[0]
            result.rejects.append(Reject(line_no, _reject_field(msg, fld), msg))
    return result


def _reject_field(msg: str, fallback: str) -> str:
    for key in FEED_KEYS:
        if key in msg:
            return key
    return fallback


def sanitize_repo_id(repo_id: str) -> str:
    """Filesystem-safe form of a repo id (slashes and friends become _)."""
    return re.sub(r"[^A-Za-z0-9._-]", "_", repo_id)


_checkout_locks: dict[str, threading.Lock] = {}
_checkout_locks_guard = threading.Lock()


def _repo_lock(repo_id: str) -> threading.Lock:
    with _checkout_locks_guard:
        return _checkout_locks.setdefault(repo_id, threading.Lock())


def materialize_snapshot(record: PatchRecord, side: str, workspace: Path | str) -> SnapshotRef:
    """Check out one side of a patch commit into an isolated directory.

    side="pre" materializes parent_hash, side="post" commit_hash, via
    `git archive` from `<workspace>/clones/<repo_id>`. Idempotent: repeated
    calls return the same root_dir. Files are made read-only after
    extraction. Materialization is serialized per repo_id.
    """
    if side not in ("pre", "post"):
        raise ValueError("side must be pre or post")
    workspace = Path(workspace)
    commit = record.parent_hash if side == "pre" else record.commit_hash
    safe_repo = sanitize_repo_id(record.repo_id)
    clone = workspace / "clones" / safe_repo
    if not clone.exists():
        clone_raw = workspace / "clones" / record.repo_id
        if clone_raw.exists():
            clone = clone_raw
        else:
            raise MissingClone(f"no local clone for {record.repo_id} under {workspace / 'clones'}")
    root = workspace / "snapshots" / safe_repo / commit
    marker = root / ".patchsieve-complete"

    with _repo_lock(safe_repo):
        if root.exists():
            if not marker.exists():
                raise DirtyWorkspace(f"half-materialized snapshot at {root}")
            file_count = int(marker.read_text(encoding="utf-8"))
            return SnapshotRef(record.repo_id, commit, side, root, file_count)

        probe = subprocess.run(
            ["git", "-C", str(clone), "cat-file", "-e", f"{commit}^{{commit}}"],
            capture_output=True,
        )
        if probe.returncode != 0:
            raise MissingCommit(f"{record.repo_id} lacks commit {commit}")

        archive = subprocess.run(
            ["git", "-C", str(clone), "archive", "--format=tar", commit],
            capture_output=True,
        )
        if archive.returncode != 0:
            raise MissingCommit(archive.stderr.decode("utf-8", "replace").strip())
        root.mkdir(parents=True)
        with tarfile.open(fileobj=io.BytesIO(archive.stdout)) as tf:
            tf.extractall(root)
        file_count = 0
        for p in sorted(root.rglob("*")):
            if p.is_file():
                file_count += 1
                p.chmod(stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
        marker.write_text(str(file_count), encoding="utf-8")
        marker.chmod(stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
        # marker is excluded from file_count: it is bookkeeping, not tree content
        return SnapshotRef(record.repo_id, commit, side, root, file_count)


def snapshot_content_hash(ref: SnapshotRef) -> str:
    """Content hash over every file in the snapshot; isolation checks diff this."""
    h = hashlib.sha256()
    for p in sorted(ref.root_dir.rglob("*")):
        if p.is_file() and p.name != ".patchsieve-complete":
            h.update(str(p.relative_to(ref.root_dir)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def discussion_cache_key(record: PatchRecord) -> str:
    return f"{sanitize_repo_id(record.repo_id)}_{record.commit_hash}.disc"


def fetch_discussion(record: PatchRecord, cache_dir: Path | str) -> Discussion:
    """Offline-first discussion lookup; absent or corrupt cache -> source=none."""
    cache_dir = Path(cache_dir)
    entry = cache_dir / discussion_cache_key(record)
    if not entry.exists():
        return Discussion(source="none", url="", body_texts=())
    try:
        obj = json.loads(entry.read_text(encoding="utf-8"))
        source = obj["source"]
        if source not in ("pull_request", "issue", "none"):
            raise ValueError("source")
        bodies = obj["body_texts"]
        if not isinstance(bodies, list) or not all(isinstance(b, str) for b in bodies):
            raise ValueError("body_texts")
        return Discussion(source=source, url=str(obj.get("url", "")), body_texts=tuple(bodies))
    except (json.JSONDecodeError, KeyError, ValueError, OSError) as e:
        log.warning("CorruptCacheEntry: %s: %s", entry.name, e)
        return Discussion(source="none", url="", body_texts=())
