"""OpenAI-compatible chat client, prompt templates, and reply parsing.

The wire protocol is the chat-completions shape served by both closed
endpoints and common open-source servers.  ``repetition_penalty`` rides
along as the extension key those servers accept and is dropped once if an
endpoint rejects it.  Replies are free text that usually wraps a JSON
object in prose; ``parse_agent_json`` digs the first balanced object out.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

logger = logging.getLogger(__name__)

ENV_BASE_URL = "DYTAGEN_BASE_URL"
ENV_API_KEY = "DYTAGEN_API_KEY"
ENV_MODEL = "DYTAGEN_MODEL"

_TRANSIENT_STATUS = {429, 500, 502, 503, 504}


class ChatError(RuntimeError):
    def __init__(self, message: str, status: int | None = None, elapsed_ms: float | None = None):
        super().__init__(message)
        self.status = status
        self.elapsed_ms = elapsed_ms


class ReplyParseError(ValueError):
    pass


@dataclass(frozen=True)
class ChatConfig:
    base_url: str
    model: str
    api_key: str = ""
    temperature: float = 0.8
    top_p: float = 0.9
    repetition_penalty: float = 1.1
    max_tokens: int = 2000
    timeout_ms: int = 60_000
    max_retries: int = 3
    backoff_base_s: float = 0.25

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must lie in (0, 1], got {self.top_p}")

    @classmethod
    def from_env(cls, **overrides: object) -> "ChatConfig":
        base_url = str(overrides.pop("base_url", os.environ.get(ENV_BASE_URL, "")))
        if not base_url:
            raise ChatError(f"no chat endpoint configured; set {ENV_BASE_URL}")
        model = str(overrides.pop("model", os.environ.get(ENV_MODEL, "default")))
        api_key = str(overrides.pop("api_key", os.environ.get(ENV_API_KEY, "")))
        return cls(base_url=base_url, model=model, api_key=api_key, **overrides)  # type: ignore[arg-type]


class ResponseCache:
    """On-disk reply cache keyed by the request-body hash, for reruns."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(body: Mapping[str, object]) -> str:
        canon = json.dumps(body, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def get(self, body: Mapping[str, object]) -> str | None:
        path = self.directory / f"{self.key(body)}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["content"]

    def put(self, body: Mapping[str, object], content: str) -> None:
        path = self.directory / f"{self.key(body)}.json"
        path.write_text(json.dumps({"content": content}, ensure_ascii=False), encoding="utf-8")


def _request_body(config: ChatConfig, messages: Sequence[Mapping[str, str]], with_penalty: bool) -> dict[str, object]:
    body: dict[str, object] = {
        "model": config.model,
        "messages": list(messages),
        "temperature": config.temperature,
        "top_p": config.top_p,
        "max_tokens": config.max_tokens,
    }
    if with_penalty:
        body["repetition_penalty"] = config.repetition_penalty
    return body


def chat(
    config: ChatConfig,
    messages: Sequence[Mapping[str, str]],
    cache: ResponseCache | None = None,
    on_retry: Callable[[int, str], None] | None = None,
) -> str:
    """Send one chat-completion request and return the first choice's content.

    Transient failures (connection errors, timeouts, 429/5xx) retry with
    exponential backoff up to ``max_retries``; other non-2xx responses
    surface immediately with their body.  ``on_retry`` is called with
    (attempt, reason) before each retry.
    """
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    timeout_s = config.timeout_ms / 1000.0
    with_penalty = True

    body = _request_body(config, messages, with_penalty)
    if cache is not None:
        cached = cache.get(body)
        if cached is not None:
            return cached

    started = time.monotonic()
    attempt = 0
    while True:
        body = _request_body(config, messages, with_penalty)
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=timeout_s)
        except requests.Timeout:
            elapsed = (time.monotonic() - started) * 1000.0
            if attempt >= config.max_retries:
                raise ChatError(
                    f"chat request timed out after {elapsed:.0f} ms", elapsed_ms=elapsed
                ) from None
            reason = "timeout"
            resp = None
        except requests.ConnectionError as exc:
            if attempt >= config.max_retries:
                raise ChatError(f"chat endpoint unreachable: {exc}") from None
            reason = "connection error"
            resp = None

        if resp is not None:
            if resp.status_code == 400 and with_penalty and "repetition_penalty" in resp.text:
                logger.warning("endpoint rejected repetition_penalty; resending without it")
                with_penalty = False
                continue
            if resp.status_code in _TRANSIENT_STATUS:
                if attempt >= config.max_retries:
                    raise ChatError(
                        f"chat failed with status {resp.status_code} after "
                        f"{attempt} retries: {resp.text[:500]}",
                        status=resp.status_code,
                    )
                reason = f"status {resp.status_code}"
            elif resp.status_code != 200:
                raise ChatError(
                    f"chat failed with status {resp.status_code}: {resp.text[:500]}",
                    status=resp.status_code,
                )
            else:
                payload = resp.json()
                choices = payload.get("choices") or []
                if not choices:
                    raise ChatError("chat reply contained no choices")
                content = choices[0].get("message", {}).get("content")
                if content is None:
                    raise ChatError("chat reply choice had no message content")
                if cache is not None:
                    cache.put(_request_body(config, messages, True), content)
                return content

        attempt += 1
        if on_retry is not None:
            on_retry(attempt, reason)
        time.sleep(config.backoff_base_s * (2 ** (attempt - 1)))


# ---------------------------------------------------------------------------
# Reply parsing
# ---------------------------------------------------------------------------


def _balanced_objects(text: str) -> list[str]:
    """All top-level balanced {...} spans, string-literal aware."""
    spans: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i] != "{":
            i += 1
            continue
        depth = 0
        in_string = False
        escaped = False
        for j in range(i, n):
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    spans.append(text[i : j + 1])
                    i = j
                    break
        i += 1
    return spans


def parse_agent_json(
    reply: str,
    expected_keys: Sequence[str] | Mapping[str, type] = (),
) -> dict[str, object]:
    """Extract and validate the first balanced JSON object in a reply.

    Models routinely wrap their JSON in prose; the first span that parses
    wins, and any further parseable object only triggers a warning.
    ``expected_keys`` may be a list of required keys or a mapping from key
    to required type.
    """
    parsed: dict[str, object] | None = None
    extras = 0
    for span in _balanced_objects(reply):
        try:
            candidate = json.loads(span)
        except json.JSONDecodeError:
            continue
        if not isinstance(candidate, dict):
            continue
        if parsed is None:
            parsed = candidate
        else:
            extras += 1
    if parsed is None:
        raise ReplyParseError(f"no balanced JSON object found in reply: {reply[:200]!r}")
    if extras:
        logger.warning("reply contained %d extra JSON object(s); using the first", extras)

    if isinstance(expected_keys, Mapping):
        wanted: Mapping[str, type | None] = expected_keys
    else:
        wanted = {k: None for k in expected_keys}
    for key, typ in wanted.items():
        if key not in parsed:
            raise ReplyParseError(f"reply JSON missing key {key!r}")
        if typ is not None and not isinstance(parsed[key], typ):
            raise ReplyParseError(
                f"reply key {key!r} has type {type(parsed[key]).__name__}, expected {typ.__name__}"
            )
    return parsed


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str
    required_slots: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        present = set(_SLOT_RE.findall(self.text))
        missing = [s for s in self.required_slots if s not in present]
        if missing:
            raise ValueError(
                f"template {self.template_id!r} lacks placeholders for required slots {missing}"
            )


class MissingSlotError(KeyError):
    pass


def render_template(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Fill {slot} placeholders; unfilled required slots fail fast."""
    for slot in template.required_slots:
        if slot not in slots:
            raise MissingSlotError(f"template {template.template_id!r} missing slot {slot!r}")
    placeholders = set(_SLOT_RE.findall(template.text))
    unknown = set(slots) - placeholders
    if unknown:
        logger.warning(
            "template %r ignoring unknown slot(s): %s",
            template.template_id,
            ", ".join(sorted(unknown)),
        )
    text = template.text
    for name in placeholders & set(slots):
        text = text.replace("{" + name + "}", str(slots[name]))
    return text


_INTERACTION_JSON_SPEC = """\
Respond using the following detailed JSON format (one object, no extra keys):
{
  "interaction": {
    "item_id": "<the ID of the chosen candidate; must be one of the IDs listed above>",
    "timestamp": "<the time of the interaction; relatively later than or equal to the times in your history>",
    "label": "<the category label of the interaction>",
    "text": "<your detailed interaction text>"
  }
}
Respond."""

_NODE_JSON_SPEC = """\
Respond using the following detailed JSON format (one object, no extra keys):
{
  "node": {
    "node_id": "<the ID of the generated node (format: G + 5-digit random number)>",
    "text": "<the full textual profile of the generated node>"
  }
}
Respond."""


def _interaction_template(template_id: str, persona: str, items_name: str) -> PromptTemplate:
    text = (
        f"{persona}\n"
        "{node_info}\n\n"
        "Here is your past interaction history:\n"
        "{node_memory}\n\n"
        f"Here are the candidate {items_name} you can choose from:\n"
        "{node_items}\n\n"
        "Here is an example of how to proceed:\n"
        "{interaction_example}\n\n"
        f"You should choose exactly ONE of the candidate {items_name}, preferring ones "
        "you have interacted with before when that fits your history. "
        "Write the interaction in detail and give it a label. "
        "The predicted time must be firmly related to the times in your history "
        "(relatively later than or equal to them).\n"
        + _INTERACTION_JSON_SPEC
    )
    return PromptTemplate(
        template_id=template_id,
        text=text,
        required_slots=("node_info", "node_memory", "node_items", "interaction_example"),
    )


def _reflection_template(template_id: str, persona: str) -> PromptTemplate:
    text = (
        f"{persona}\n"
        "{node_info}\n\n"
        "Here is your past interaction history:\n"
        "{node_memory}\n\n"
        "Now, based on your personal description and past history, progressively "
        "refine your memory into a concise version, ensuring it reflects your "
        "personal preferences.\n"
        "Respond."
    )
    return PromptTemplate(
        template_id=template_id, text=text, required_slots=("node_info", "node_memory")
    )


def _node_generation_template(template_id: str, collection: str) -> PromptTemplate:
    text = (
        f"We are growing a dataset of {collection}.\n"
        "Here is information about the recent active nodes:\n"
        "{recent_node_info}\n\n"
        "You are expected to generate ONE new {role_name} node for this dataset, and "
        "ensure the generated node is somewhat different from the existing nodes.\n"
        + _NODE_JSON_SPEC
    )
    return PromptTemplate(
        template_id=template_id,
        text=text,
        required_slots=("recent_node_info", "role_name"),
    )


@dataclass(frozen=True)
class ScenarioTemplates:
    scenario_id: str
    interaction: PromptTemplate
    reflection: PromptTemplate
    node_generation: PromptTemplate


def scenario_templates(scenario_id: str = "generic") -> ScenarioTemplates:
    """Prompt bundles for the shipped scenarios.

    ``bipartite-review`` speaks as a customer reviewing items on a shopping
    platform; ``social-network`` as a user interacting with other users on
    a social platform; ``generic`` is domain-neutral.
    """
    if scenario_id == "bipartite-review":
        persona = (
            "You are a customer of an online shopping platform; you can review "
            "the platform's products based on the provided information and your own situation:"
        )
        return ScenarioTemplates(
            scenario_id=scenario_id,
            interaction=_interaction_template("bipartite-review/interaction", persona, "products"),
            reflection=_reflection_template("bipartite-review/reflection", persona),
            node_generation=_node_generation_template(
                "bipartite-review/node-generation", "customers reviewing products"
            ),
        )
    if scenario_id == "social-network":
        persona = (
            "You are a user of an online social media platform; you can search for "
            "other users who may interact with you:"
        )
        return ScenarioTemplates(
            scenario_id=scenario_id,
            interaction=_interaction_template("social-network/interaction", persona, "users"),
            reflection=_reflection_template("social-network/reflection", persona),
            node_generation=_node_generation_template(
                "social-network/node-generation", "users interacting with each other"
            ),
        )
    if scenario_id == "generic":
        persona = (
            "You are an actor in an evolving interaction network; you can interact "
            "with the listed counterparts based on the provided information:"
        )
        return ScenarioTemplates(
            scenario_id=scenario_id,
            interaction=_interaction_template("generic/interaction", persona, "counterparts"),
            reflection=_reflection_template("generic/reflection", persona),
            node_generation=_node_generation_template(
                "generic/node-generation", "interacting entities"
            ),
        )
    raise ValueError(f"unknown scenario {scenario_id!r}")
