from .turns import DispatchTrace, Session, Turn
from .backends import (
    DEFAULT_NO_CALL_REPLY,
    BackendUnavailableError,
    LlmBackend,
    RemoteBackend,
    RemoteBackendConfig,
    ScriptedBackend,
    remote_backend,
    scripted_backend,
)
from .engine import FALLBACK_REPLY, Orchestrator, execute_call, render_result_turn

__all__ = [
    "BackendUnavailableError",
    "DEFAULT_NO_CALL_REPLY",
    "DispatchTrace",
    "FALLBACK_REPLY",
    "LlmBackend",
    "Orchestrator",
    "RemoteBackend",
    "RemoteBackendConfig",
    "ScriptedBackend",
    "Session",
    "Turn",
    "execute_call",
    "remote_backend",
    "render_result_turn",
    "scripted_backend",
]
