"""Per-query ground-truth expectations consumed by the metric suite."""

from __future__ import annotations

from dataclasses import dataclass, field

from surgassist.functions.types import SegmentationMask


@dataclass(frozen=True)
class EvalCase:
    id: str
    query: str
    image_ref: str | None = None
    expect_call: str | None = None  # None means no call expected
    keywords: tuple[str, ...] = ()
    is_negative: bool = False
    reference_reply: str = ""
    gt_boxes: tuple[tuple[float, float, float, float], ...] | None = None
    gt_mask: SegmentationMask | None = None

    def __post_init__(self):
        if self.is_negative and (self.keywords or self.gt_boxes or self.gt_mask):
            raise ValueError(
                "negative cases carry no keywords and no ground-truth geometry"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "query": self.query,
            "image_ref": self.image_ref,
            "expect_call": self.expect_call,
            "keywords": list(self.keywords),
            "is_negative": self.is_negative,
            "reference_reply": self.reference_reply,
            "gt_boxes": [list(b) for b in self.gt_boxes] if self.gt_boxes else None,
            "gt_mask": {
                "width": self.gt_mask.width,
                "height": self.gt_mask.height,
                "rle": list(self.gt_mask.rle),
            }
            if self.gt_mask
            else None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalCase":
        mask = obj.get("gt_mask")
        boxes = obj.get("gt_boxes")
        return cls(
            id=obj["id"],
            query=obj["query"],
            image_ref=obj.get("image_ref"),
            expect_call=obj.get("expect_call"),
            keywords=tuple(obj.get("keywords") or ()),
            is_negative=bool(obj.get("is_negative", False)),
            reference_reply=obj.get("reference_reply", ""),
            gt_boxes=tuple(tuple(b) for b in boxes) if boxes else None,
            gt_mask=SegmentationMask(
                width=mask["width"], height=mask["height"], rle=tuple(mask["rle"])
            )
            if mask
            else None,
        )
