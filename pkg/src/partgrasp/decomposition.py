"""Language backend: split the task-relevant object into parts to grasp and avoid.

The remote backend speaks the chat-completion JSON protocol and demands a
strict-JSON reply ({"object", "grasp_parts", "avoid_parts"}); one repair
re-prompt is attempted before giving up.  The fixture backend is an
exact-match table from task string to decomposition, for deterministic runs
without a network.

Decomposition depends only on the task text — no image ever reaches this
module.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import requests

from .errors import (
    BackendUnavailableError,
    InvalidDecompositionError,
    MalformedDecompositionError,
    UsageError,
)
from .model import PartDecomposition, TaskRequest, normalize_labels

REQUEST_TIMEOUT_S = 60.0
FIXTURE_DEFAULT_KEY = "*"

SYSTEM_PROMPT = (
    "You are a robot grasp planner's reasoning assistant. Given a manipulation task, "
    "name the single object most relevant to the task, then split that object into parts. "
    "Parts a gripper should hold to accomplish the task go in grasp_parts; parts the gripper "
    "must stay away from go in avoid_parts. Use short lowercase part names. "
    'Reply with exactly one JSON object of the form '
    '{"object": string, "grasp_parts": [string, ...], "avoid_parts": [string, ...]} '
    "and nothing else: no prose, no markdown fences."
)

REPAIR_PROMPT = (
    "Your previous reply was not a single valid JSON object with keys "
    '"object", "grasp_parts", and "avoid_parts". Reply again with only that JSON object.'
)


@dataclass(frozen=True)
class DecompositionBackendConfig:
    kind: str
    endpoint_url: str | None = None
    model_name: str | None = None
    api_key_env_var: str | None = None
    fixture_path: str | None = None
    temperature: float = 0.0
    max_retries: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "fixture"):
            raise UsageError(f"decomposition backend kind must be remote|fixture, got {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint_url and self.model_name):
            raise UsageError("remote decomposition backend needs endpoint_url and model_name")
        if self.kind == "fixture" and not self.fixture_path:
            raise UsageError("fixture decomposition backend needs fixture_path")
        if self.temperature < 0:
            raise UsageError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise UsageError(f"max_retries must be >= 0, got {self.max_retries}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint_url": self.endpoint_url,
            "model_name": self.model_name,
            "api_key_env_var": self.api_key_env_var,
            "fixture_path": self.fixture_path,
            "temperature": self.temperature,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DecompositionBackendConfig":
        return cls(
            kind=str(d["kind"]),
            endpoint_url=d.get("endpoint_url"),
            model_name=d.get("model_name"),
            api_key_env_var=d.get("api_key_env_var"),
            fixture_path=d.get("fixture_path"),
            temperature=float(d.get("temperature", 0.0)),
            max_retries=int(d.get("max_retries", 1)),
        )


def build_prompt(task: TaskRequest) -> tuple[str, str]:
    """Deterministic (system, user) prompt pair; the task text appears exactly once."""
    return (SYSTEM_PROMPT, f"Task: {task.task}")


def parse_decomposition_content(text: str) -> PartDecomposition:
    """Parse a strict-JSON decomposition reply and normalize its part names.

    Raises MalformedDecompositionError for anything that is not the expected
    JSON shape; InvalidDecompositionError when the shape is right but the
    content is unusable (no graspable part, or a part on both lists).
    """
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDecompositionError(f"reply is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedDecompositionError("reply JSON must be an object")
    missing = {"object", "grasp_parts", "avoid_parts"} - obj.keys()
    if missing:
        raise MalformedDecompositionError(f"reply JSON missing keys: {sorted(missing)}")
    name = obj["object"]
    grasp = obj["grasp_parts"]
    avoid = obj["avoid_parts"]
    if not isinstance(name, str):
        raise MalformedDecompositionError("'object' must be a string")
    if not isinstance(grasp, list) or not isinstance(avoid, list):
        raise MalformedDecompositionError("'grasp_parts' and 'avoid_parts' must be lists")
    desirable = normalize_labels([str(p) for p in grasp])
    undesirable = normalize_labels([str(p) for p in avoid])
    if not desirable:
        raise InvalidDecompositionError(f"no graspable part named for object {name!r}")
    return PartDecomposition(
        object_name=name.strip().lower(),
        desirable_parts=tuple(desirable),
        undesirable_parts=tuple(undesirable),
    )


def _post_chat(config: DecompositionBackendConfig, messages: list[dict]) -> str:
    body = {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key_env_var:
        key = os.environ.get(config.api_key_env_var)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    last_error: Exception | None = None
    for _ in range(config.max_retries + 1):
        try:
            resp = requests.post(
                config.endpoint_url, json=body, headers=headers, timeout=REQUEST_TIMEOUT_S
            )
            if resp.status_code >= 500:
                last_error = BackendUnavailableError(
                    f"language endpoint returned {resp.status_code}"
                )
                continue
            if resp.status_code != 200:
                raise BackendUnavailableError(
                    f"language endpoint returned {resp.status_code}: {resp.text[:200]}"
                )
            data = resp.json()
            break
        except requests.RequestException as exc:
            last_error = exc
    else:
        raise BackendUnavailableError(f"language endpoint unreachable: {last_error}")
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedDecompositionError(f"chat reply missing message content: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedDecompositionError("chat reply content is not text")
    return content


def decompose(task: TaskRequest, config: DecompositionBackendConfig) -> PartDecomposition:
    """Produce the part decomposition for a task via the configured backend."""
    if config.kind == "fixture":
        return _decompose_fixture(task, config)
    return _decompose_remote(task, config)


def _decompose_fixture(
    task: TaskRequest, config: DecompositionBackendConfig
) -> PartDecomposition:
    try:
        with open(config.fixture_path) as f:
            table = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedDecompositionError(
            f"cannot read decomposition fixture {config.fixture_path}: {exc}"
        ) from exc
    if not isinstance(table, dict):
        raise MalformedDecompositionError("decomposition fixture must be a JSON object")
    entry = table.get(task.task.strip(), table.get(FIXTURE_DEFAULT_KEY))
    if entry is None:
        raise MalformedDecompositionError(
            f"no fixture entry for task {task.task.strip()!r} and no default"
        )
    return parse_decomposition_content(json.dumps(entry))


def _decompose_remote(
    task: TaskRequest, config: DecompositionBackendConfig
) -> PartDecomposition:
    system, user = build_prompt(task)
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]
    content = _post_chat(config, messages)
    try:
        return parse_decomposition_content(content)
    except MalformedDecompositionError:
        # one repair attempt: show the bad reply, demand valid JSON
        repair_messages = messages + [
            {"role": "assistant", "content": content},
            {"role": "user", "content": REPAIR_PROMPT},
        ]
        repaired = _post_chat(config, repair_messages)
        return parse_decomposition_content(repaired)
