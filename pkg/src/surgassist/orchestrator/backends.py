"""Model backends: deterministic scripted replay and a remote HTTP client.

A backend is anything with ``generate(conversation) -> str`` returning a
structured-reply candidate; it must be stateless, with all conversation
state carried in the turns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from .turns import Turn

DEFAULT_NO_CALL_REPLY = (
    "<think>No registered function seems applicable to this query.</think>\n"
    "<reply>I am not able to answer that from the current view.</reply>"
)


class BackendUnavailableError(Exception):
    kind = "backend_unavailable"

    def __init__(self, cause: str, message: str):
        super().__init__(f"{cause}: {message}")
        self.cause = cause


class LlmBackend(Protocol):
    def generate(self, conversation: Sequence[Turn]) -> str: ...


def _last_user_query(conversation: Sequence[Turn]) -> str:
    for turn in reversed(conversation):
        if turn.role == "user":
            return turn.content
    return ""


def _has_function_turn(conversation: Sequence[Turn]) -> bool:
    # Only function turns after the last user turn count: each dispatch
    # keys on its own query/result pair, not on earlier rounds.
    seen_user = False
    for turn in reversed(conversation):
        if turn.role == "user":
            seen_user = True
            break
        if turn.role == "function":
            return True
    return False if seen_user else False


class ScriptedBackend:
    """Replays fixture replies keyed by (last user query, function turn seen).

    Unmatched queries get a designated default no-call reply.
    """

    def __init__(
        self,
        fixtures: dict[tuple[str, bool], str],
        default_reply: str = DEFAULT_NO_CALL_REPLY,
    ):
        self.fixtures = dict(fixtures)
        self.default_reply = default_reply

    def generate(self, conversation: Sequence[Turn]) -> str:
        key = (_last_user_query(conversation), _has_function_turn(conversation))
        return self.fixtures.get(key, self.default_reply)


def scripted_backend(
    fixtures: dict[tuple[str, bool], str],
    default_reply: str = DEFAULT_NO_CALL_REPLY,
) -> ScriptedBackend:
    return ScriptedBackend(fixtures, default_reply)


@dataclass(frozen=True)
class RemoteBackendConfig:
    url: str
    timeout: float = 30.0
    attempts: int = 3
    send_images: bool = False  # inline base64 instead of references


class RemoteBackend:
    """POSTs the conversation to a chat-completion-style endpoint.

    Request: {"messages": [{"role", "content", "image_ref"|"image_base64"}]}.
    Response: {"text": "<structured reply>"}. Bounded retries on transport
    errors and 5xx; anything that exhausts them raises BackendUnavailable.
    """

    def __init__(self, config: RemoteBackendConfig, image_loader=None):
        self.config = config
        self.image_loader = image_loader

    def _message(self, turn: Turn) -> dict:
        msg = {"role": turn.role, "content": turn.content}
        if turn.image_ref:
            if self.config.send_images and self.image_loader is not None:
                import base64

                raw = self.image_loader(turn.image_ref)
                if raw is not None:
                    msg["image_base64"] = base64.b64encode(raw).decode("ascii")
            else:
                msg["image_ref"] = turn.image_ref
        return msg

    def generate(self, conversation: Sequence[Turn]) -> str:
        payload = {"messages": [self._message(t) for t in conversation]}
        last_err: Exception | None = None
        for _ in range(self.config.attempts):
            try:
                response = requests.post(
                    self.config.url, json=payload, timeout=self.config.timeout
                )
            except requests.Timeout as exc:
                last_err = exc
                continue
            except requests.RequestException as exc:
                last_err = exc
                continue
            if response.status_code != 200:
                last_err = RuntimeError(f"status {response.status_code}")
                if 500 <= response.status_code < 600:
                    continue
                break
            try:
                body = response.json()
                text = body["text"]
            except (ValueError, KeyError):
                raise BackendUnavailableError(
                    "protocol", "endpoint response lacks a text field"
                ) from None
            if not isinstance(text, str):
                raise BackendUnavailableError("protocol", "text field is not a string")
            return text
        cause = "timeout" if isinstance(last_err, requests.Timeout) else "transport"
        raise BackendUnavailableError(cause, f"backend unreachable: {last_err}")


def remote_backend(config: RemoteBackendConfig, image_loader=None) -> RemoteBackend:
    return RemoteBackend(config, image_loader)
