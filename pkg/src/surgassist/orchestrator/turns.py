"""Conversation structure: turns, sessions, and dispatch traces."""

from __future__ import annotations

import hashlib
import threading
import time
import uuid
from dataclasses import dataclass, field

from surgassist.functions.types import FunctionResult
from surgassist.protocol.wire import FunctionCall, StructuredReply

ROLES = ("user", "assistant", "function")


@dataclass(frozen=True)
class Turn:
    role: str
    content: str
    image_ref: str | None = None
    attached_result: FunctionResult | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role: {self.role!r}")
        if self.role == "function" and self.attached_result is None:
            raise ValueError("function turns must carry an attached_result")

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "content": self.content,
            "image_ref": self.image_ref,
            "attached_result": self.attached_result.to_dict()
            if self.attached_result
            else None,
        }


class Session:
    """Append-only conversation state plus a content-addressed image store."""

    def __init__(self, session_id: str | None = None):
        self.id = session_id or uuid.uuid4().hex
        self.turns: list[Turn] = []
        self.image_store: dict[str, bytes] = {}
        self.created_at = time.time()
        self.updated_at = self.created_at
        self.lock = threading.Lock()  # one in-flight dispatch per session

    def append(self, turn: Turn) -> None:
        self.turns.append(turn)
        self.updated_at = time.time()

    def add_image(self, data: bytes) -> str:
        ref = "sha256:" + hashlib.sha256(data).hexdigest()
        self.image_store[ref] = data
        return ref

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "turns": [t.to_dict() for t in self.turns],
            "image_refs": sorted(self.image_store),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


@dataclass
class DispatchTrace:
    """Everything one query dispatch did, for eval and UI replay."""

    first_reply: StructuredReply | None = None
    executed_call: FunctionCall | None = None
    function_result: FunctionResult | None = None
    second_reply: StructuredReply | None = None
    rounds: int = 1
    error: dict | None = None  # {"kind": ..., "message": ...}
    trace_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "first_reply": self.first_reply.to_dict() if self.first_reply else None,
            "executed_call": self.executed_call.to_dict()
            if self.executed_call
            else None,
            "function_result": self.function_result.to_dict()
            if self.function_result
            else None,
            "second_reply": self.second_reply.to_dict() if self.second_reply else None,
            "rounds": self.rounds,
            "error": self.error,
        }
