"""One-or-two-round dispatch over a model backend and a function registry.

A query is answered directly when the parsed reply carries no call;
otherwise exactly one function is executed, its rendered result is appended
as a function turn, and the backend is run once more for the final reply.
At most one call ever executes per query; a call in the second reply is
recorded but never executed. Every failure mode maps to one typed error in
the trace, a fallback reply to the user, and a consistent session;
dispatch never raises.
"""

from __future__ import annotations

from surgassist.functions.registry import (
    FunctionFailedError,
    FunctionRegistry,
    ParamValidationError,
    UnknownFunctionError,
    validate_params,
)
from surgassist.functions.types import FunctionResult
from surgassist.protocol.wire import FunctionCall, ParseError, parse_structured

from .backends import BackendUnavailableError, LlmBackend
from .turns import DispatchTrace, Session, Turn

FALLBACK_REPLY = "I am sorry, I could not complete that request."


def execute_call(
    call: FunctionCall, registry: FunctionRegistry, image_ref: str | None
) -> FunctionResult:
    """Dispatch by exact name, validate parameters, run, and check the result."""
    spec, impl = registry.lookup(call.api_name)
    validate_params(spec, call.api_params)
    try:
        result = impl(dict(call.api_params), image_ref)
    except FunctionFailedError:
        raise
    except Exception as exc:  # wrap the function's own failure
        raise FunctionFailedError("execution", str(exc)) from exc
    if result.output_kind != spec.output_kind:
        raise FunctionFailedError(
            "validation",
            f"function returned {result.output_kind!r}, spec says {spec.output_kind!r}",
        )
    return result


def render_result_turn(result: FunctionResult) -> Turn:
    """Function-role turn carrying the canonical textual rendering."""
    return Turn(role="function", content=result.text, attached_result=result)


def _error_dict(kind: str, exc: Exception, **extra) -> dict:
    err = {"kind": kind, "message": str(exc)}
    err.update(extra)
    return err


class Orchestrator:
    def __init__(self, backend: LlmBackend, registry: FunctionRegistry):
        self.backend = backend
        self.registry = registry

    def handle_query(
        self, session: Session, query: str, image_ref: str | None = None
    ) -> tuple[str, DispatchTrace]:
        with session.lock:
            return self._dispatch(session, query, image_ref)

    def _dispatch(
        self, session: Session, query: str, image_ref: str | None
    ) -> tuple[str, DispatchTrace]:
        trace = DispatchTrace()
        session.append(Turn(role="user", content=query, image_ref=image_ref))

        def fail(kind: str, exc: Exception, rounds: int = 1, **extra) -> tuple[str, DispatchTrace]:
            trace.error = _error_dict(kind, exc, **extra)
            trace.rounds = rounds
            session.append(Turn(role="assistant", content=FALLBACK_REPLY))
            return FALLBACK_REPLY, trace

        try:
            first_text = self.backend.generate(session.turns)
        except BackendUnavailableError as exc:
            return fail(exc.kind, exc, cause=exc.cause)

        try:
            first = parse_structured(first_text)
        except ParseError as exc:
            return fail("parse_failed", exc, parser_error=exc.to_dict())
        trace.first_reply = first

        if first.calling is None:
            trace.rounds = 1
            session.append(Turn(role="assistant", content=first_text))
            return first.replying, trace

        try:
            result = execute_call(first.calling, self.registry, image_ref)
        except UnknownFunctionError as exc:
            return fail(exc.kind, exc)
        except ParamValidationError as exc:
            return fail(exc.kind, exc, param=exc.param)
        except FunctionFailedError as exc:
            return fail(exc.kind, exc, cause=exc.cause)

        trace.executed_call = first.calling
        trace.function_result = result
        session.append(Turn(role="assistant", content=first_text))
        session.append(render_result_turn(result))
        trace.rounds = 2

        try:
            second_text = self.backend.generate(session.turns)
        except BackendUnavailableError as exc:
            return fail(exc.kind, exc, rounds=2, cause=exc.cause)

        try:
            second = parse_structured(second_text)
        except ParseError as exc:
            # Degrade gracefully: surface the raw text, record the failure.
            trace.error = _error_dict("parse_failed", exc, parser_error=exc.to_dict())
            session.append(Turn(role="assistant", content=second_text))
            return second_text, trace

        trace.second_reply = second  # any calling here is ignored: hard round cap
        session.append(Turn(role="assistant", content=second_text))
        return second.replying, trace
