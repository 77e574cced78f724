"""Model endpoint access: chat, embeddings, token logprobs, image judging.

All network providers speak JSON over HTTP through an injectable transport
callable, so tests can script replies without sockets. Every successful call
appends one entry to a shared :class:`UsageLedger`; per-run cost figures are
computed from those entries, never estimated after the fact.

Wire contracts
--------------
chat      POST {model, messages, temperature} -> {choices: [{message: {content}}], usage}
embed     POST {model, input: [texts]}        -> {data: [{embedding: [...]}, ...]}
logprob   POST {model, text, context}         -> {tokens: [...], logprobs: [...]}
          POST {model, text, mode: "tokenize"} -> {tokens: [...]}
judge     chat schema with an image_url content part (base64 data URL)

Endpoints whose URL starts with ``mock:`` resolve to the deterministic
offline backend in :mod:`pageforge.offline`.
"""

from __future__ import annotations

import base64
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

from .errors import (
    AuthenticationError,
    CapabilityError,
    JsonExtractError,
    ProviderError,
    ValidationFailed,
)

Message = tuple[str, str]
Transport = Callable[[str, dict, dict, float], dict]


@dataclass
class ProviderConfig:
    endpoint: str
    model_name: str
    api_credential: str = ""
    max_retries: int = 2
    temperature: float = 0.7
    request_timeout: float = 60.0
    unit_cost_per_token: float | None = None
    retry_backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class UsageEntry:
    stage: str
    prompt_tokens: int
    completion_tokens: int
    unit_cost: float | None
    elapsed: float

    @property
    def cost(self) -> float | None:
        if self.unit_cost is None:
            return None
        return (self.prompt_tokens + self.completion_tokens) * self.unit_cost


class UsageLedger:
    """Append-only, thread-safe record of every provider call."""

    def __init__(self) -> None:
        self._entries: list[UsageEntry] = []
        self._lock = threading.Lock()

    def record(
        self,
        stage: str,
        prompt_tokens: int,
        completion_tokens: int,
        unit_cost: float | None,
        elapsed: float,
    ) -> UsageEntry:
        entry = UsageEntry(stage, int(prompt_tokens), int(completion_tokens), unit_cost, elapsed)
        with self._lock:
            self._entries.append(entry)
        return entry

    @property
    def entries(self) -> list[UsageEntry]:
        with self._lock:
            return list(self._entries)

    def totals(self) -> dict[str, Any]:
        entries = self.entries
        known = [e.cost for e in entries if e.cost is not None]
        return {
            "calls": len(entries),
            "prompt_tokens": sum(e.prompt_tokens for e in entries),
            "completion_tokens": sum(e.completion_tokens for e in entries),
            "elapsed": sum(e.elapsed for e in entries),
            # Cost stays None-able: entries without a configured unit cost
            # are excluded rather than counted as zero.
            "cost": sum(known) if known else None,
            "cost_entries_missing": sum(1 for e in entries if e.cost is None),
        }

    def count_stage(self, *prefixes) -> int:
        flat: tuple[str, ...] = ()
        for p in prefixes:
            flat += tuple(p) if isinstance(p, (tuple, list)) else (p,)
        return sum(1 for e in self.entries if e.stage.startswith(flat))

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {
                "stage": e.stage,
                "prompt_tokens": e.prompt_tokens,
                "completion_tokens": e.completion_tokens,
                "unit_cost": e.unit_cost,
                "elapsed": e.elapsed,
            }
            for e in self.entries
        ]


@dataclass(frozen=True)
class JudgeScore:
    reason: str
    score: int

    def __post_init__(self) -> None:
        if not isinstance(self.score, int) or not 1 <= self.score <= 5:
            raise ValidationFailed(f"judge score must be an integer in 1..5, got {self.score!r}")


# --- structured-reply helpers ----------------------------------------------

_FENCE = re.compile(r"```(\w*)[ \t]*\n(.*?)```", re.DOTALL)


def extract_json_block(reply: str) -> Any:
    """Parse the first fenced json block; fall back to the bare reply."""
    candidates = []
    for lang, body in _FENCE.findall(reply):
        if lang.lower() == "json":
            candidates.append(body)
    if not candidates:
        candidates = [body for _, body in _FENCE.findall(reply)]
    candidates.append(reply.strip())
    for text in candidates:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            continue
    raise JsonExtractError(f"no parseable JSON in reply: {reply[:200]!r}")


def extract_html_block(reply: str) -> str:
    for lang, body in _FENCE.findall(reply):
        if lang.lower() in ("html", ""):
            stripped = body.strip()
            if stripped.lower().startswith(("<!doctype", "<html")):
                return stripped
    stripped = reply.strip()
    if stripped.lower().startswith(("<!doctype", "<html")):
        return stripped
    raise JsonExtractError("reply does not contain a fenced html document")


# --- protocols ---------------------------------------------------------------


class ChatProvider(Protocol):
    def chat(
        self, messages: list[Message], *, stage: str = "chat", temperature: float | None = None
    ) -> str: ...


class EmbedProvider(Protocol):
    def embed(self, texts: list[str]) -> list[list[float]]: ...


class LogprobProvider(Protocol):
    def tokenize(self, text: str) -> list[str]: ...

    def detokenize(self, tokens: list[str]) -> str: ...

    def token_logprobs(self, text: str, context: str = "") -> list[tuple[str, float]]: ...


class JudgeProvider(Protocol):
    def vision_chat(
        self, image: bytes, prompt: str, *, stage: str = "judge", temperature: float = 0.0
    ) -> str: ...

    def judge(self, image: bytes, rubric_prompt: str, *, stage: str = "judge") -> JudgeScore: ...


def chat_json(
    provider: ChatProvider,
    messages: list[Message],
    *,
    stage: str,
    temperature: float | None = None,
    validator: Callable[[Any], Any] | None = None,
) -> Any:
    """Chat expecting a fenced json reply, with one error-echo repair retry.

    ``validator`` may transform the parsed value; raising
    :class:`ValidationFailed` (or ``JsonExtractError``) triggers the single
    repair round with the error text appended to the conversation.
    """
    attempt_messages = list(messages)
    last_error: Exception | None = None
    for attempt in range(2):
        reply = provider.chat(attempt_messages, stage=stage, temperature=temperature)
        try:
            value = extract_json_block(reply)
            return validator(value) if validator is not None else value
        except (JsonExtractError, ValidationFailed) as exc:
            last_error = exc
            if attempt == 0:
                attempt_messages = attempt_messages + [
                    ("assistant", reply),
                    (
                        "user",
                        "Your previous reply could not be used: "
                        f"{exc}. Reply again, strictly following the requested "
                        "output format (a fenced ```json block).",
                    ),
                ]
    raise ValidationFailed(f"reply invalid after repair retry ({stage}): {last_error}")


# --- HTTP implementations ----------------------------------------------------


def default_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import httpx

    try:
        resp = httpx.post(url, headers=headers, json=payload, timeout=timeout)
    except httpx.HTTPError as exc:
        raise ConnectionError(str(exc)) from exc
    if resp.status_code in (401, 403):
        raise AuthenticationError(f"endpoint rejected credentials (HTTP {resp.status_code})")
    if resp.status_code >= 400:
        raise ConnectionError(f"HTTP {resp.status_code}: {resp.text[:200]}")
    return resp.json()


class _HttpBase:
    def __init__(
        self,
        cfg: ProviderConfig,
        ledger: UsageLedger | None = None,
        transport: Transport | None = None,
    ) -> None:
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()
        self.transport = transport or default_transport
        self.last_request: dict | None = None

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_credential:
            headers["Authorization"] = f"Bearer {self.cfg.api_credential}"
        return headers

    def _post(self, payload: dict, stage: str) -> tuple[dict, float]:
        self.last_request = payload
        attempts = self.cfg.max_retries + 1
        start = time.monotonic()
        for attempt in range(attempts):
            try:
                data = self.transport(
                    self.cfg.endpoint, self._headers(), payload, self.cfg.request_timeout
                )
                return data, time.monotonic() - start
            except AuthenticationError:
                raise
            except ConnectionError as exc:
                if attempt + 1 >= attempts:
                    raise ProviderError(
                        f"{stage}: transport failed after {attempts} attempts: {exc}"
                    ) from exc
                time.sleep(self.cfg.retry_backoff * (2**attempt))
        raise AssertionError("unreachable")

    def _record(self, stage: str, data: dict, elapsed: float, fallback_text: str = "") -> None:
        usage = data.get("usage") or {}
        prompt = usage.get("prompt_tokens")
        completion = usage.get("completion_tokens")
        if prompt is None:
            prompt = len(fallback_text.split())
        if completion is None:
            completion = 0
        self.ledger.record(stage, prompt, completion, self.cfg.unit_cost_per_token, elapsed)


class HttpChatProvider(_HttpBase):
    def chat(
        self, messages: list[Message], *, stage: str = "chat", temperature: float | None = None
    ) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": role, "content": text} for role, text in messages],
            "temperature": self.cfg.temperature if temperature is None else temperature,
        }
        data, elapsed = self._post(payload, stage)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"{stage}: malformed chat response: {data!r}") from exc
        self._record(stage, data, elapsed, fallback_text=" ".join(t for _, t in messages))
        return content


class HttpEmbedProvider(_HttpBase):
    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts or any(not t for t in texts):
            raise ValueError("texts must be non-empty and contain no empty strings")
        payload = {"model": self.cfg.model_name, "input": list(texts)}
        data, elapsed = self._post(payload, "embed")
        try:
            vectors = [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"embed: malformed response: {data!r}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"embed: {len(texts)} inputs but {len(vectors)} vectors")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProviderError(f"embed: inconsistent vector dimensions {sorted(dims)}")
        self._record("embed", data, elapsed, fallback_text=" ".join(texts))
        return vectors


class HttpLogprobProvider(_HttpBase):
    def tokenize(self, text: str) -> list[str]:
        payload = {"model": self.cfg.model_name, "text": text, "mode": "tokenize"}
        data, _ = self._post(payload, "logprob")
        if "tokens" not in data:
            raise CapabilityError("endpoint does not expose a tokenizer")
        return list(data["tokens"])

    def detokenize(self, tokens: list[str]) -> str:
        # Whitespace join matches the tokenize contract of the reference
        # logprob service; subword backends must provide their own joiner.
        return " ".join(tokens)

    def token_logprobs(self, text: str, context: str = "") -> list[tuple[str, float]]:
        if not text:
            raise ValueError("text must be non-empty")
        payload = {"model": self.cfg.model_name, "text": text, "context": context}
        data, elapsed = self._post(payload, "logprob")
        if "logprobs" not in data or "tokens" not in data:
            raise CapabilityError("endpoint does not support token logprobs")
        tokens, logprobs = data["tokens"], data["logprobs"]
        if len(tokens) != len(logprobs):
            raise ProviderError("logprob: token/logprob arity mismatch")
        self._record("logprob", data, elapsed, fallback_text=text)
        return list(zip(tokens, [float(x) for x in logprobs]))


class HttpJudgeProvider(_HttpBase):
    def vision_chat(
        self, image: bytes, prompt: str, *, stage: str = "judge", temperature: float = 0.0
    ) -> str:
        encoded = base64.b64encode(image).decode("ascii")
        payload = {
            "model": self.cfg.model_name,
            "temperature": temperature,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{encoded}"},
                        },
                    ],
                }
            ],
        }
        data, elapsed = self._post(payload, stage)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"{stage}: malformed judge response: {data!r}") from exc
        self._record(stage, data, elapsed, fallback_text=prompt)
        return content

    def judge(self, image: bytes, rubric_prompt: str, *, stage: str = "judge") -> JudgeScore:
        return parse_judge_reply(
            lambda p: self.vision_chat(image, p, stage=stage), rubric_prompt
        )


def parse_judge_reply(ask: Callable[[str], str], rubric_prompt: str) -> JudgeScore:
    """Run a judge prompt with one repair retry on malformed replies."""
    prompt = rubric_prompt
    last_error: Exception | None = None
    for attempt in range(2):
        reply = ask(prompt)
        try:
            value = extract_json_block(reply)
            if not isinstance(value, dict) or "score" not in value:
                raise ValidationFailed(f"judge reply missing score field: {value!r}")
            return JudgeScore(reason=str(value.get("reason", "")), score=value["score"])
        except (JsonExtractError, ValidationFailed) as exc:
            last_error = exc
            prompt = (
                rubric_prompt
                + f"\n\nYour previous reply was invalid ({exc}). Reply with exactly "
                '{"reason": "...", "score": <integer 1-5>}.'
            )
    raise ValidationFailed(f"judge reply invalid after repair retry: {last_error}")


# --- config + factory --------------------------------------------------------

ROLES = ("chat", "judge", "embed", "logprob")


@dataclass
class ProviderSet:
    chat: ChatProvider | None = None
    judge: JudgeProvider | None = None
    embed: EmbedProvider | None = None
    logprob: LogprobProvider | None = None
    ledger: UsageLedger = field(default_factory=UsageLedger)


def load_provider_configs(path: str | Path) -> dict[str, ProviderConfig]:
    """Read provider configs from a JSON or YAML file.

    Schema: ``providers.{chat,judge,embed,logprob}.{endpoint, model,
    credential_env, temperature, max_retries, request_timeout,
    unit_cost_per_token}``. Credentials are only ever read from the
    environment variable named by ``credential_env``.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        import yaml

        raw = yaml.safe_load(text)
    else:
        raw = json.loads(text)
    configs: dict[str, ProviderConfig] = {}
    for role, entry in (raw.get("providers") or {}).items():
        if role not in ROLES:
            raise ValueError(f"unknown provider role {role!r}; expected one of {ROLES}")
        credential = ""
        if entry.get("credential_env"):
            credential = os.environ.get(entry["credential_env"], "")
        configs[role] = ProviderConfig(
            endpoint=entry["endpoint"],
            model_name=entry.get("model", ""),
            api_credential=credential,
            max_retries=int(entry.get("max_retries", 2)),
            temperature=float(entry.get("temperature", 0.7)),
            request_timeout=float(entry.get("request_timeout", 60.0)),
            unit_cost_per_token=entry.get("unit_cost_per_token"),
        )
    return configs


def build_providers(
    configs: dict[str, ProviderConfig], ledger: UsageLedger | None = None
) -> ProviderSet:
    """Instantiate provider clients; ``mock:`` endpoints get the offline backend."""
    from . import offline

    ledger = ledger if ledger is not None else UsageLedger()
    out = ProviderSet(ledger=ledger)
    for role, cfg in configs.items():
        if cfg.endpoint.startswith("mock:"):
            impl: Any = offline.build(role, cfg, ledger)
        elif role == "chat":
            impl = HttpChatProvider(cfg, ledger)
        elif role == "judge":
            impl = HttpJudgeProvider(cfg, ledger)
        elif role == "embed":
            impl = HttpEmbedProvider(cfg, ledger)
        elif role == "logprob":
            impl = HttpLogprobProvider(cfg, ledger)
        else:
            raise ValueError(f"unknown provider role {role!r}")
        setattr(out, role, impl)
    return out
