"""Single choke point for model traffic.

Every model call flows through an LlmSession: prompt rendering, per-role
model selection, transport with bounded retries and rate limiting, and
digest-keyed record/replay cassettes. Replay mode never touches a
transport, which is what makes full pipeline runs deterministic.

Cassette file: line-delimited JSON. An optional first line holds
{"cassette_meta": {...}}; every other line is one entry with fields
digest, model, response_text, token_counts (see docs/cassette.md).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import templates
from .errors import (
    CassetteMiss,
    GatewayFailure,
    MalformedModelOutput,
    UnboundPlaceholder,
    UnknownTemplate,
)

log = logging.getLogger("patchsieve.llmgateway")

MODES = ("live", "record", "replay")

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)\}\}")
_FENCE_RE = re.compile(r"```json\s*\n(.*?)```", re.DOTALL)

DEFAULT_MODELS = {
    "classify": "classify-model",
    "analysis": "analysis-model",
    "context": "context-model",
    "detect": "detect-model",
    "judge": "judge-model",
}

ENV_MODEL_VARS = {
    "classify": "LLM_MODEL_CLASSIFY",
    "analysis": "LLM_MODEL_ANALYSIS",
    "context": "LLM_MODEL_CONTEXT",
    "detect": "LLM_MODEL_DETECT",
    "judge": "LLM_MODEL_JUDGE",
}


@dataclass(frozen=True)
class PromptEnvelope:
    template_id: str
    role_blocks: tuple[tuple[str, str], ...]
    model_tag: str
    request_digest: str

    def full_text(self) -> str:
        return "\n".join(text for _, text in self.role_blocks)


@dataclass(frozen=True)
class Completion:
    text: str
    model: str
    token_counts: dict[str, int]
    from_cassette: bool = False


def compute_digest(template_id: str, role_blocks, model_tag: str) -> str:
    """Stable cryptographic digest of a prompt; the cassette key."""
    payload = json.dumps(
        {"template_id": template_id,
         "role_blocks": [[r, t] for r, t in role_blocks],
         "model_tag": model_tag},
        sort_keys=True, ensure_ascii=True, separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def render_prompt(template_id: str, variables: dict[str, str],
                  model_tag: str | None = None) -> PromptEnvelope:
    """Render a registered template; unbound placeholders are an error.

    Substitution is single-pass: placeholder-looking text inside variable
    values is never re-expanded.
    """
    tpl = templates.get_template(template_id)
    if tpl is None:
        raise UnknownTemplate(template_id)
    blocks = []
    for role, text in tpl.blocks:
        for name in _PLACEHOLDER_RE.findall(text):
            if name not in variables:
                raise UnboundPlaceholder(name)
        rendered = _PLACEHOLDER_RE.sub(lambda m: str(variables[m.group(1)]), text)
        blocks.append((role, rendered))
    tag = model_tag or tpl.model_tag
    digest = compute_digest(template_id, blocks, tag)
    return PromptEnvelope(template_id, tuple(blocks), tag, digest)


class Cassette:
    """Digest-keyed store of recorded responses; order-independent lookup."""

    def __init__(self, path: Path | str | None = None, metadata: dict | None = None):
        self.path = Path(path) if path else None
        self.entries: dict[str, dict] = {}
        self.metadata: dict = metadata or {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "cassette_meta" in obj:
                self.metadata = obj["cassette_meta"]
                continue
            self.entries[obj["digest"]] = {
                "model": obj["model"],
                "response_text": obj["response_text"],
                "token_counts": obj["token_counts"],
            }

    def lookup(self, digest: str) -> dict | None:
        return self.entries.get(digest)

    def append(self, digest: str, model: str, response_text: str,
               token_counts: dict[str, int]) -> None:
        entry = {"model": model, "response_text": response_text,
                 "token_counts": token_counts}
        with self._lock:
            first = not self.entries and self.path and not self.path.exists()
            self.entries[digest] = entry
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    if first and self.metadata:
                        f.write(json.dumps({"cassette_meta": self.metadata},
                                           sort_keys=True) + "\n")
                    f.write(json.dumps({"digest": digest, **entry},
                                       sort_keys=True) + "\n")
                    f.flush()

    def __len__(self) -> int:
        return len(self.entries)


class RateLimiter:
    """Minimum-interval limiter; the gateway's only shared mutable state."""

    def __init__(self, calls_per_second: float, clock=time.monotonic,
                 sleep=time.sleep):
        self.interval = 1.0 / calls_per_second
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self.interval
        if wait > 0:
            self._sleep(wait)


def forbidden_transport(envelope: PromptEnvelope, model: str):
    """Transport that must never run; installed under replay in tests."""
    raise AssertionError(
        f"transport invoked in replay mode (template {envelope.template_id})")


class HttpTransport:
    """OpenAI-style chat-completions transport configured from env vars."""

    def __init__(self, base_url: str, api_key: str, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def __call__(self, envelope: PromptEnvelope, model: str):
        import requests

        resp = requests.post(
            f"{self.base_url}/chat/completions",
            headers={"Authorization": f"Bearer {self.api_key}"},
            json={
                "model": model,
                "messages": [{"role": r, "content": t}
                             for r, t in envelope.role_blocks],
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
        usage = data.get("usage", {})
        counts = {"prompt": int(usage.get("prompt_tokens", 0)),
                  "completion": int(usage.get("completion_tokens", 0))}
        return text, counts


def naive_token_counts(envelope: PromptEnvelope, text: str) -> dict[str, int]:
    return {"prompt": len(envelope.full_text().split()),
            "completion": len(text.split())}


class LlmSession:
    """Gateway handle passed to every stage that talks to a model.

    mode=live: transport with retries/rate limiting. mode=record: live,
    with every response appended to the cassette (idempotent on digest
    hits). mode=replay: cassette lookup only; a miss raises, a transport
    is never touched.
    """

    def __init__(self, mode: str, cassette: Cassette | None = None,
                 transport: Callable | None = None,
                 models: dict[str, str] | None = None,
                 retry_budget: int = 3, backoff_base: float = 0.5,
                 rate_limiter: RateLimiter | None = None,
                 sleep=time.sleep):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode in ("live", "record") and transport is None:
            raise ValueError(f"{mode} mode requires a transport")
        if mode in ("record", "replay") and cassette is None:
            raise ValueError(f"{mode} mode requires a cassette")
        self.mode = mode
        self.cassette = cassette
        self.transport = transport
        self.models = dict(DEFAULT_MODELS, **(models or {}))
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        self.calls = 0

    def complete(self, envelope: PromptEnvelope) -> Completion:
        self.calls += 1
        if self.mode == "replay":
            entry = self.cassette.lookup(envelope.request_digest)
            if entry is None:
                raise CassetteMiss(envelope.request_digest)
            return Completion(entry["response_text"], entry["model"],
                              dict(entry["token_counts"]), from_cassette=True)
        if self.mode == "record":
            entry = self.cassette.lookup(envelope.request_digest)
            if entry is not None:
                return Completion(entry["response_text"], entry["model"],
                                  dict(entry["token_counts"]), from_cassette=True)
        model = self.models[envelope.model_tag]
        text, counts = self._transport_with_retries(envelope, model)
        if self.mode == "record":
            self.cassette.append(envelope.request_digest, model, text, counts)
        return Completion(text, model, counts, from_cassette=False)

    def _transport_with_retries(self, envelope: PromptEnvelope, model: str):
        last = None
        for attempt in range(self.retry_budget):
            if self.rate_limiter:
                self.rate_limiter.acquire()
            try:
                result = self.transport(envelope, model)
                if isinstance(result, tuple):
                    text, counts = result
                else:
                    text, counts = result, naive_token_counts(envelope, result)
                return text, counts
            except AssertionError:
                raise
            except Exception as e:  # noqa: BLE001 - transport faults are opaque
                last = e
                if attempt + 1 < self.retry_budget:
                    self._sleep(self.backoff_base * (2 ** attempt))
        raise GatewayFailure(f"transport failed after {self.retry_budget} attempts: {last}")


def models_from_env(environ=os.environ) -> dict[str, str]:
    return {tag: environ.get(var, DEFAULT_MODELS[tag])
            for tag, var in ENV_MODEL_VARS.items()}


def session_from_env(mode: str, cassette_path: Path | str | None,
                     environ=os.environ,
                     calls_per_second: float | None = None) -> LlmSession:
    """Build a session for the CLI: env-configured transport and models."""
    cassette = Cassette(cassette_path) if cassette_path else None
    transport = None
    if mode in ("live", "record"):
        base_url = environ.get("LLM_BASE_URL")
        if not base_url:
            raise GatewayFailure("LLM_BASE_URL is not set; live/record needs a provider")
        transport = HttpTransport(base_url, environ.get("LLM_API_KEY", ""))
    models = models_from_env(environ)
    if cassette is not None and not cassette.metadata:
        cassette.metadata = {"created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                             "models": models, "decoding": {"temperature": "provider-default"}}
    limiter = RateLimiter(calls_per_second) if calls_per_second else None
    return LlmSession(mode, cassette=cassette, transport=transport,
                      models=models, rate_limiter=limiter)


# --- structured-output protocol ----------------------------------------------

def extract_fenced_json(text: str) -> dict:
    """Pull the last fenced ```json block out of a reply. Raises ValueError."""
    matches = _FENCE_RE.findall(text)
    if not matches:
        raise ValueError("no fenced json block")
    obj = json.loads(matches[-1])
    if not isinstance(obj, dict):
        raise ValueError("fenced block is not an object")
    return obj


def structured_call(session: LlmSession, template_id: str,
                    variables: dict[str, str], required_keys: tuple[str, ...],
                    validate: Callable[[dict], None] | None = None) -> dict:
    """Complete a prompt under the fenced-json contract.

    One repair re-prompt is attempted on a contract violation; a second
    violation raises MalformedModelOutput.
    """
    envelope = render_prompt(template_id, variables)
    completion = session.complete(envelope)
    try:
        return _parse_structured(completion.text, required_keys, validate)
    except ValueError as first_error:
        repair = render_prompt(
            "repair_structured",
            {"previous": completion.text, "problem": str(first_error),
             "keys": ", ".join(required_keys)},
            model_tag=envelope.model_tag,
        )
        repaired = session.complete(repair)
        try:
            return _parse_structured(repaired.text, required_keys, validate)
        except ValueError as second_error:
            raise MalformedModelOutput(
                f"{template_id}: {second_error} (after repair for: {first_error})"
            ) from second_error


def _parse_structured(text: str, required_keys: tuple[str, ...],
                      validate: Callable[[dict], None] | None) -> dict:
    obj = extract_fenced_json(text)
    for key in required_keys:
        if key not in obj:
            raise ValueError(f"missing key: {key}")
    if validate:
        validate(obj)
    return obj


def parse_final_token(text: str) -> str:
    """Final-token contract: the reply's last token is VUL or NO_VUL."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty reply")
    last = tokens[-1].strip(".,:;!`")
    if last not in ("VUL", "NO_VUL"):
        raise ValueError(f"final token is {last!r}, not VUL/NO_VUL")
    return last


def final_token_call(session: LlmSession, template_id: str,
                     variables: dict[str, str]) -> tuple[str, str]:
    """Complete a prompt under the final-token contract; returns (label, analysis).

    Same repair policy as structured_call: one re-prompt, then
    MalformedModelOutput.
    """
    envelope = render_prompt(template_id, variables)
    completion = session.complete(envelope)
    try:
        return parse_final_token(completion.text), completion.text
    except ValueError as first_error:
        repair = render_prompt("repair_final_token",
                               {"previous": completion.text},
                               model_tag=envelope.model_tag)
        repaired = session.complete(repair)
        try:
            return parse_final_token(repaired.text), repaired.text
        except ValueError as second_error:
            raise MalformedModelOutput(
                f"{template_id}: {second_error} (after repair for: {first_error})"
            ) from second_error
