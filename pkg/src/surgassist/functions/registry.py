"""Surgical function registry: exact-name dispatch over registered specs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .types import FunctionResult

OUTPUT_KINDS = ("detections", "mask", "scene")

# Implementations take (api_params, image_ref) and return a FunctionResult.
FunctionImpl = Callable[[dict, str | None], FunctionResult]


class RegistryError(Exception):
    kind = "registry_error"


class DuplicateNameError(RegistryError):
    kind = "duplicate_name"


class UnknownFunctionError(RegistryError):
    kind = "unknown_function"


class ParamValidationError(Exception):
    kind = "param_validation"

    def __init__(self, param: str, reason: str):
        super().__init__(f"parameter {param!r}: {reason}")
        self.param = param


class FunctionFailedError(Exception):
    """A function implementation failed; ``cause`` labels the failure class."""

    kind = "function_failed"

    def __init__(self, cause: str, message: str):
        super().__init__(f"{cause}: {message}")
        self.cause = cause


@dataclass(frozen=True)
class FunctionSpec:
    api_name: str
    required_params: tuple[tuple[str, str], ...]  # (name, description)
    output_kind: str
    description: str

    def __post_init__(self):
        if self.output_kind not in OUTPUT_KINDS:
            raise ValueError(f"unknown output_kind: {self.output_kind!r}")

    def to_dict(self) -> dict:
        return {
            "api_name": self.api_name,
            "required_params": [
                {"name": n, "description": d} for n, d in self.required_params
            ],
            "output_kind": self.output_kind,
            "description": self.description,
        }


def validate_params(spec: FunctionSpec, params: dict) -> None:
    """Required params must be present; unknown params are rejected."""
    required = {name for name, _ in spec.required_params}
    for name in required:
        if name not in params:
            raise ParamValidationError(name, "required parameter missing")
    for name in params:
        if name not in required:
            raise ParamValidationError(name, "unexpected parameter")


class FunctionRegistry:
    """Immutable-after-startup mapping of api_name to (spec, implementation)."""

    def __init__(self):
        self._entries: dict[str, tuple[FunctionSpec, FunctionImpl]] = {}

    def register(self, spec: FunctionSpec, implementation: FunctionImpl) -> None:
        if spec.api_name in self._entries:
            raise DuplicateNameError(f"function {spec.api_name!r} already registered")
        self._entries[spec.api_name] = (spec, implementation)

    def list_specs(self) -> list[FunctionSpec]:
        return [spec for spec, _ in self._entries.values()]

    def lookup(self, api_name: str) -> tuple[FunctionSpec, FunctionImpl]:
        try:
            return self._entries[api_name]
        except KeyError:
            raise UnknownFunctionError(f"no function named {api_name!r}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, api_name: str) -> bool:
        return api_name in self._entries
