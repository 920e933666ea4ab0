"""Wire format for structured assistant replies.

A reply is three tagged blocks, canonically in this order::

    <think>...</think>
    <call>{"api_name": "...", "api_params": {...}}</call>
    <reply>...</reply>

The call block is optional and absent exactly when no function is invoked.
Block content is escaped so the delimiters may appear in free text: every
backslash becomes ``\\\\`` and every literal tag string gets a leading
backslash. A tag occurrence counts as a real delimiter only when preceded by
an even number of backslashes.

``parse_structured`` is total: malformed input raises exactly one of the
four typed errors (MissingReply, DuplicateBlock, MalformedCallPayload,
UnbalancedTags), each carrying byte offsets. Text outside blocks is ignored,
and blocks are accepted in any order; content inside blocks round-trips
byte-exact.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

API_NAME_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")

_BLOCKS = ("think", "call", "reply")
_OPEN = {kind: f"<{kind}>" for kind in _BLOCKS}
_CLOSE = {kind: f"</{kind}>" for kind in _BLOCKS}
_ALL_TAGS = tuple(_OPEN.values()) + tuple(_CLOSE.values())
_TAG_RE = re.compile("|".join(re.escape(t) for t in _ALL_TAGS))


class ParseError(ValueError):
    """Base of all structured-reply parse failures."""

    kind = "parse_error"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": str(self), "offset": self.offset}


class MissingReplyError(ParseError):
    kind = "missing_reply"


class DuplicateBlockError(ParseError):
    kind = "duplicate_block"

    def __init__(self, block: str, offset: int):
        super().__init__(f"duplicate <{block}> block", offset)
        self.block = block


class MalformedCallPayloadError(ParseError):
    kind = "malformed_call_payload"

    def __init__(self, reason: str, span: tuple[int, int]):
        super().__init__(f"malformed call payload ({reason})", span[0])
        self.span = span

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["span"] = list(self.span)
        return d


class UnbalancedTagsError(ParseError):
    kind = "unbalanced_tags"


@dataclass(frozen=True)
class FunctionCall:
    """An executable API invocation: name plus an ordered name->value map."""

    api_name: str
    api_params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not API_NAME_RE.match(self.api_name or ""):
            raise ValueError(f"invalid api_name: {self.api_name!r}")
        for key, value in self.api_params.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValueError("api_params must map strings to strings")

    def to_dict(self) -> dict:
        return {"api_name": self.api_name, "api_params": dict(self.api_params)}


@dataclass(frozen=True)
class StructuredReply:
    """Parsed three-part model output."""

    thinking: str
    calling: FunctionCall | None
    replying: str

    def to_dict(self) -> dict:
        return {
            "thinking": self.thinking,
            "calling": self.calling.to_dict() if self.calling else None,
            "replying": self.replying,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StructuredReply":
        calling = obj.get("calling")
        return cls(
            thinking=obj.get("thinking", ""),
            calling=FunctionCall(calling["api_name"], dict(calling.get("api_params", {})))
            if calling
            else None,
            replying=obj["replying"],
        )


def escape_text(text: str) -> str:
    text = text.replace("\\", "\\\\")
    for tag in _ALL_TAGS:
        text = text.replace(tag, "\\" + tag)
    return text


def unescape_text(text: str) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n:
            if text[i + 1] == "\\":
                out.append("\\")
                i += 2
                continue
            for tag in _ALL_TAGS:
                if text.startswith(tag, i + 1):
                    out.append(tag)
                    i += 1 + len(tag)
                    break
            else:
                out.append(ch)
                i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def render_structured(reply: StructuredReply) -> str:
    """Canonical tagged text; ``parse_structured`` inverts it exactly."""
    parts = [f"<think>{escape_text(reply.thinking)}</think>"]
    if reply.calling is not None:
        payload = json.dumps(
            {
                "api_name": reply.calling.api_name,
                "api_params": dict(reply.calling.api_params),
            },
            ensure_ascii=False,
        )
        parts.append(f"<call>{escape_text(payload)}</call>")
    parts.append(f"<reply>{escape_text(reply.replying)}</reply>")
    return "\n".join(parts)


def _is_escaped(text: str, pos: int) -> bool:
    backslashes = 0
    i = pos - 1
    while i >= 0 and text[i] == "\\":
        backslashes += 1
        i -= 1
    return backslashes % 2 == 1


def _scan_tags(text: str) -> list[tuple[str, bool, int, int]]:
    """All unescaped tag occurrences as (kind, is_open, start, end)."""
    tokens = []
    for m in _TAG_RE.finditer(text):
        if _is_escaped(text, m.start()):
            continue
        tag = m.group(0)
        is_open = not tag.startswith("</")
        kind = tag.strip("</>")
        tokens.append((kind, is_open, m.start(), m.end()))
    return tokens


def _parse_call_payload(raw: str, span: tuple[int, int]) -> FunctionCall:
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedCallPayloadError(f"invalid JSON: {exc.msg}", span) from None
    if not isinstance(payload, dict):
        raise MalformedCallPayloadError("payload is not a JSON object", span)
    if set(payload.keys()) != {"api_name", "api_params"}:
        raise MalformedCallPayloadError(
            "payload keys must be exactly api_name and api_params", span
        )
    name = payload["api_name"]
    params = payload["api_params"]
    if not isinstance(name, str) or not API_NAME_RE.match(name):
        raise MalformedCallPayloadError(f"invalid api_name: {name!r}", span)
    if not isinstance(params, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in params.items()
    ):
        raise MalformedCallPayloadError("api_params must map strings to strings", span)
    return FunctionCall(api_name=name, api_params=params)


def parse_structured(text: str) -> StructuredReply:
    """Extract the three components from tagged text.

    Raises a :class:`ParseError` subclass on any malformed input; never
    anything else.
    """
    tokens = _scan_tags(text)
    blocks: dict[str, str] = {}
    spans: dict[str, tuple[int, int]] = {}
    i = 0
    while i < len(tokens):
        kind, is_open, start, end = tokens[i]
        if not is_open:
            raise UnbalancedTagsError(
                f"closing </{kind}> at byte {start} without an open tag", start
            )
        if i + 1 >= len(tokens):
            raise UnbalancedTagsError(f"<{kind}> at byte {start} is never closed", start)
        nkind, nopen, nstart, nend = tokens[i + 1]
        if nopen or nkind != kind:
            raise UnbalancedTagsError(
                f"<{kind}> at byte {start} closed by "
                f"{'<' if nopen else '</'}{nkind}> at byte {nstart}",
                nstart,
            )
        if kind in blocks:
            raise DuplicateBlockError(kind, start)
        blocks[kind] = text[end:nstart]
        spans[kind] = (end, nstart)
        i += 2

    if "reply" not in blocks:
        raise MissingReplyError("no <reply> block found")

    calling = None
    if "call" in blocks:
        raw = unescape_text(blocks["call"]).strip()
        calling = _parse_call_payload(raw, spans["call"])

    return StructuredReply(
        thinking=unescape_text(blocks.get("think", "")),
        calling=calling,
        replying=unescape_text(blocks["reply"]),
    )
