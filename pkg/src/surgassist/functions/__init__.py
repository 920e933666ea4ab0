from .types import (
    Detection,
    FunctionResult,
    SceneAnalysis,
    SegmentationMask,
    detections_result,
    format_bbox,
    mask_bbox,
    mask_result,
    render_detections_text,
    render_mask_text,
    render_scene_text,
    scene_result,
)
from .rle import empty_mask, full_mask, rect_mask, rle_decode, rle_encode
from .registry import (
    DuplicateNameError,
    FunctionFailedError,
    FunctionRegistry,
    FunctionSpec,
    ParamValidationError,
    UnknownFunctionError,
    validate_params,
)
from .fixtures import (
    DEFAULT_VOCABULARY,
    DETECT_SPEC,
    DISTRACTOR_SPECS,
    PROBE_BBOX,
    SCENE_SPEC,
    SEGMENT_SPEC,
    ClassNotFoundError,
    FixtureBundle,
    SceneFixture,
    Vocabulary,
    build_demo_bundle,
    build_registry,
    fixture_detect,
    fixture_implementations,
    fixture_scene,
    fixture_segment,
    load_fixture_bundle,
    save_fixture_bundle,
)
from .remote import RemoteEndpointConfig, remote_function

__all__ = [
    "ClassNotFoundError",
    "DEFAULT_VOCABULARY",
    "DETECT_SPEC",
    "DISTRACTOR_SPECS",
    "Detection",
    "DuplicateNameError",
    "FixtureBundle",
    "FunctionFailedError",
    "FunctionRegistry",
    "FunctionResult",
    "FunctionSpec",
    "PROBE_BBOX",
    "ParamValidationError",
    "RemoteEndpointConfig",
    "SCENE_SPEC",
    "SEGMENT_SPEC",
    "SceneAnalysis",
    "SceneFixture",
    "SegmentationMask",
    "UnknownFunctionError",
    "Vocabulary",
    "build_demo_bundle",
    "build_registry",
    "detections_result",
    "empty_mask",
    "fixture_detect",
    "fixture_implementations",
    "fixture_scene",
    "fixture_segment",
    "format_bbox",
    "full_mask",
    "load_fixture_bundle",
    "mask_bbox",
    "mask_result",
    "rect_mask",
    "remote_function",
    "render_detections_text",
    "render_mask_text",
    "render_scene_text",
    "rle_decode",
    "rle_encode",
    "save_fixture_bundle",
    "scene_result",
    "validate_params",
]
