"""HTTP adapter for production detection/segmentation/scene services.

Protocol: POST {"image": base64-or-null, "params": {...}} to the configured
endpoint; the response body must match the declared output kind. Any
transport, schema, or invariant violation surfaces as FunctionFailedError
with the failure class in ``cause``; results always satisfy the same type
invariants as fixture results.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Callable

import requests

from .registry import FunctionFailedError
from .types import (
    Detection,
    FunctionResult,
    SceneAnalysis,
    SegmentationMask,
    detections_result,
    mask_result,
    scene_result,
)


@dataclass(frozen=True)
class RemoteEndpointConfig:
    url: str
    output_kind: str
    timeout: float = 10.0
    attempts: int = 3


def _parse_detections(body: dict) -> FunctionResult:
    items = body.get("detections")
    if not isinstance(items, list):
        raise FunctionFailedError("schema", "response lacks a detections list")
    parsed = []
    for item in items:
        try:
            parsed.append(
                Detection(
                    class_name=item["class_name"],
                    bbox=tuple(item["bbox"]),
                    score=float(item.get("score", 1.0)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise FunctionFailedError("schema", f"bad detection entry: {exc}") from None
        except ValueError as exc:
            raise FunctionFailedError("validation", str(exc)) from None
    return detections_result(parsed)


def _parse_mask(body: dict) -> FunctionResult:
    obj = body.get("mask")
    if not isinstance(obj, dict):
        raise FunctionFailedError("schema", "response lacks a mask object")
    try:
        mask = SegmentationMask(
            width=obj["width"], height=obj["height"], rle=tuple(obj["rle"])
        )
    except (KeyError, TypeError) as exc:
        raise FunctionFailedError("schema", f"bad mask object: {exc}") from None
    except ValueError as exc:
        raise FunctionFailedError("validation", str(exc)) from None
    return mask_result(mask)


def _parse_scene(body: dict) -> FunctionResult:
    obj = body.get("scene")
    if not isinstance(obj, dict):
        raise FunctionFailedError("schema", "response lacks a scene object")
    try:
        triplets = tuple(tuple(t) for t in obj["triplets"])
        if any(len(t) != 3 for t in triplets):
            raise FunctionFailedError("validation", "triplets must have three parts")
        scene = SceneAnalysis(triplets=triplets, description=obj.get("description", ""))
    except (KeyError, TypeError) as exc:
        raise FunctionFailedError("schema", f"bad scene object: {exc}") from None
    return scene_result(scene)


_PARSERS = {
    "detections": _parse_detections,
    "mask": _parse_mask,
    "scene": _parse_scene,
}


def remote_function(
    config: RemoteEndpointConfig,
    image_loader: Callable[[str], bytes | None] | None = None,
):
    """Build a registry implementation backed by an HTTP endpoint."""
    parser = _PARSERS.get(config.output_kind)
    if parser is None:
        raise ValueError(f"unknown output_kind: {config.output_kind!r}")

    def impl(params: dict, image_ref: str | None) -> FunctionResult:
        image_b64 = None
        if image_ref is not None and image_loader is not None:
            raw = image_loader(image_ref)
            if raw is not None:
                image_b64 = base64.b64encode(raw).decode("ascii")
        payload = {"image": image_b64, "params": dict(params)}
        last_err = None
        for _ in range(config.attempts):
            try:
                response = requests.post(
                    config.url, json=payload, timeout=config.timeout
                )
            except requests.RequestException as exc:
                last_err = exc
                continue
            if response.status_code != 200:
                last_err = FunctionFailedError(
                    "transport", f"endpoint returned status {response.status_code}"
                )
                if 500 <= response.status_code < 600:
                    continue
                raise last_err
            try:
                body = response.json()
            except ValueError:
                raise FunctionFailedError("schema", "response body is not JSON") from None
            return parser(body)
        if isinstance(last_err, FunctionFailedError):
            raise last_err
        raise FunctionFailedError("transport", f"endpoint unreachable: {last_err}")

    return impl
