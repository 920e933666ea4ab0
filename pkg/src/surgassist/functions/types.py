"""Typed outputs of surgical functions and their canonical text renderings."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Detection:
    """One detected object: corner-format box normalized to [0, 1]."""

    class_name: str
    bbox: tuple[float, float, float, float]  # x1, y1, x2, y2
    score: float = 1.0

    def __post_init__(self):
        x1, y1, x2, y2 = self.bbox
        if not (0.0 <= x1 < x2 <= 1.0 and 0.0 <= y1 < y2 <= 1.0):
            raise ValueError(f"invalid normalized bbox: {self.bbox}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1]: {self.score}")


@dataclass(frozen=True)
class SegmentationMask:
    """Binary mask as row-major run lengths, first run counting zeros.

    Canonical form: the first run may be 0 (mask starts with a 1 pixel);
    every later run is positive; runs sum to width * height.
    """

    width: int
    height: int
    rle: tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be positive")
        if not self.rle:
            raise ValueError("rle must not be empty")
        if any(r < 0 for r in self.rle):
            raise ValueError("rle runs must be nonnegative")
        if any(r == 0 for r in self.rle[1:]):
            raise ValueError("only the first rle run may be zero")
        total = sum(self.rle)
        if total != self.width * self.height:
            raise ValueError(
                f"rle runs sum to {total}, expected {self.width * self.height}"
            )

    def area(self) -> int:
        """Number of set pixels (runs at odd positions)."""
        return sum(self.rle[1::2])

    def area_fraction(self) -> float:
        return self.area() / (self.width * self.height)


@dataclass(frozen=True)
class SceneAnalysis:
    """Recognized activity as (instrument, verb, target) triplets."""

    triplets: tuple[tuple[str, str, str], ...]
    description: str


def format_bbox(bbox) -> str:
    x1, y1, x2, y2 = bbox
    return f"[{x1:.2f}, {y1:.2f}, {x2:.2f}, {y2:.2f}]"


def render_detections_text(detections) -> str:
    if not detections:
        return "no objects detected"
    return "\n".join(
        f"{d.class_name} {format_bbox(d.bbox)} {d.score:.2f}" for d in detections
    )


def mask_bbox(mask: SegmentationMask) -> tuple[float, float, float, float] | None:
    """Normalized bounding box of the set pixels, or None for an empty mask."""
    min_r = min_c = None
    max_r = max_c = None
    pos = 0
    for i, run in enumerate(mask.rle):
        if i % 2 == 1 and run > 0:
            for offset in (0, run - 1):
                p = pos + offset
                r, c = divmod(p, mask.width)
                min_r = r if min_r is None else min(min_r, r)
                max_r = r if max_r is None else max(max_r, r)
            # Column extent needs every row the run touches.
            start_r, start_c = divmod(pos, mask.width)
            end_r, end_c = divmod(pos + run - 1, mask.width)
            if start_r == end_r:
                lo_c, hi_c = start_c, end_c
            else:
                lo_c, hi_c = 0, mask.width - 1
            min_c = lo_c if min_c is None else min(min_c, lo_c)
            max_c = hi_c if max_c is None else max(max_c, hi_c)
        pos += run
    if min_r is None:
        return None
    return (
        min_c / mask.width,
        min_r / mask.height,
        (max_c + 1) / mask.width,
        (max_r + 1) / mask.height,
    )


def render_mask_text(mask: SegmentationMask) -> str:
    box = mask_bbox(mask)
    if box is None:
        return "empty mask (no pixels set)"
    return f"mask area fraction {mask.area_fraction():.4f}, bounding box {format_bbox(box)}"


def render_scene_text(scene: SceneAnalysis) -> str:
    if not scene.triplets:
        return "no activity recognized"
    lines = [", ".join(t) for t in scene.triplets]
    if scene.description:
        lines.append(scene.description)
    return "\n".join(lines)


@dataclass(frozen=True)
class FunctionResult:
    """Typed function output plus its deterministic textual rendering."""

    output_kind: str  # detections | mask | scene
    detections: tuple[Detection, ...] = ()
    mask: SegmentationMask | None = None
    scene: SceneAnalysis | None = None
    text: str = ""

    def is_empty(self) -> bool:
        """True when the function found nothing (basis of rejection checks)."""
        if self.output_kind == "detections":
            return not self.detections
        if self.output_kind == "mask":
            return self.mask is None or self.mask.area() == 0
        if self.output_kind == "scene":
            return self.scene is None or not self.scene.triplets
        return True

    def to_dict(self) -> dict:
        return {
            "output_kind": self.output_kind,
            "detections": [
                {"class_name": d.class_name, "bbox": list(d.bbox), "score": d.score}
                for d in self.detections
            ],
            "mask": {
                "width": self.mask.width,
                "height": self.mask.height,
                "rle": list(self.mask.rle),
            }
            if self.mask
            else None,
            "scene": {
                "triplets": [list(t) for t in self.scene.triplets],
                "description": self.scene.description,
            }
            if self.scene
            else None,
            "text": self.text,
        }


def detections_result(detections) -> FunctionResult:
    detections = tuple(detections)
    return FunctionResult(
        output_kind="detections",
        detections=detections,
        text=render_detections_text(detections),
    )


def mask_result(mask: SegmentationMask) -> FunctionResult:
    return FunctionResult(output_kind="mask", mask=mask, text=render_mask_text(mask))


def scene_result(scene: SceneAnalysis) -> FunctionResult:
    return FunctionResult(output_kind="scene", scene=scene, text=render_scene_text(scene))
