"""Function-calling conversation dataset generator.

Produces positive (call-expecting), negative (absent-object), and no-call
records from deterministic templates over fixture scenes, plus an unseen
test split drawn from a disjoint template pool. Output is JSON Lines, one
record per line, each line carrying a schema-version field.

Generation is a pure function of (templates, fixtures, counts, seed), and
query text maps to exactly one gold behavior across the whole dataset: a
given (template, target) pair is always served by the same pinned scene, so
scripted backends keyed on query text never see conflicting fixtures.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from surgassist.evaluation.cases import EvalCase
from surgassist.functions.fixtures import FixtureBundle, fixture_scene
from surgassist.functions.types import format_bbox

from .wire import FunctionCall, StructuredReply

DATASET_SCHEMA_VERSION = 1

CORE_FUNCTIONS = ("detect", "segment", "analyze_scene")

# Desk-scale default counts (positive, negative, no-call, unseen).
DEFAULT_COUNTS = (2000, 200, 200, 200)


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class ConversationTemplate:
    template_id: str
    kind: str  # positive | negative | no-call
    query_pattern: str  # may reference {target}
    api_name: str | None = None
    thinking_pattern: str = ""
    fixed_reply: str | None = None  # no-call templates answer directly


TRAIN_TEMPLATES: tuple[ConversationTemplate, ...] = (
    ConversationTemplate(
        "det-where", "positive", "Where is the {target} in the image?", "detect",
        "Locating the {target} calls for the detection function.",
    ),
    ConversationTemplate(
        "det-locate", "positive", "Please locate the {target}.", "detect",
        "A detection pass will confirm the position of the {target}.",
    ),
    ConversationTemplate(
        "seg-outline", "positive", "Segment the {target} for me.", "segment",
        "A pixel mask of the {target} requires the segmentation function.",
    ),
    ConversationTemplate(
        "seg-extent", "positive", "Show the exact extent of the {target}.", "segment",
        "The segmentation function gives the precise extent of the {target}.",
    ),
    ConversationTemplate(
        "scene-activity", "positive", "What is happening in this scene?", "analyze_scene",
        "Summarizing the activity needs the scene analysis function.",
    ),
    ConversationTemplate(
        "scene-describe", "positive", "Describe the current surgical activity.", "analyze_scene",
        "The scene analysis function recognizes the ongoing action.",
    ),
    ConversationTemplate(
        "neg-any", "negative", "Is there a {target} anywhere in this image?", "detect",
        "The {target} should be verified with a detection pass before answering.",
    ),
    ConversationTemplate(
        "neg-find", "negative", "Can you find a {target} in this view?", "detect",
        "Checking for a {target} is a job for the detection function.",
    ),
    ConversationTemplate(
        "nc-next", "no-call", "Any general advice before the next step?",
        fixed_reply="Keep the field clear, confirm landmarks, and advance along the planned trajectory.",
    ),
    ConversationTemplate(
        "nc-risk", "no-call", "What should I generally watch out for here?",
        fixed_reply="Watch for bleeding, protect surrounding structures, and keep suction ready.",
    ),
    ConversationTemplate(
        "nc-team", "no-call", "How should the team prepare for closure?",
        fixed_reply="Count instruments and sponges, confirm hemostasis, and ready the closure tray.",
    ),
)

UNSEEN_TEMPLATES: tuple[ConversationTemplate, ...] = (
    ConversationTemplate(
        "u-det-spot", "positive", "Point out the {target} for me.", "detect",
        "Pinpointing the {target} is best done with the detection function.",
    ),
    ConversationTemplate(
        "u-seg-mask", "positive", "Give me a mask of the {target}.", "segment",
        "Producing a mask of the {target} requires segmentation.",
    ),
    ConversationTemplate(
        "u-scene-now", "positive", "Summarize what the instruments are doing now.", "analyze_scene",
        "Scene analysis will recognize the instrument activity.",
    ),
)


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    split: str  # train | test-unseen
    kind: str  # positive | negative | no-call
    image_ref: str | None
    query: str
    gold: StructuredReply
    expectations: EvalCase

    def to_dict(self) -> dict:
        return {
            "schema_version": DATASET_SCHEMA_VERSION,
            "id": self.id,
            "split": self.split,
            "kind": self.kind,
            "image_ref": self.image_ref,
            "query": self.query,
            "gold": self.gold.to_dict(),
            "expectations": self.expectations.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetRecord":
        return cls(
            id=obj["id"],
            split=obj["split"],
            kind=obj["kind"],
            image_ref=obj.get("image_ref"),
            query=obj["query"],
            gold=StructuredReply.from_dict(obj["gold"]),
            expectations=EvalCase.from_dict(obj["expectations"]),
        )


def _pin_scene(template_id: str, target: str | None, eligible: list[str]) -> str:
    """Deterministically pin a (template, target) pair to one scene."""
    key = f"{template_id}|{target or ''}".encode()
    return sorted(eligible)[zlib.crc32(key) % len(eligible)]


def _detect_reply(target: str, detections) -> str:
    boxes = ", ".join(format_bbox(d.bbox) for d in detections)
    if len(detections) == 1:
        return f"The {target} is detected in the image at {boxes}."
    return f"{len(detections)} instances of the {target} are detected at {boxes}."


def _segment_reply(target: str, mask) -> str:
    return (
        f"The {target} is segmented; its mask covers "
        f"{mask.area_fraction():.4f} of the frame."
    )


def _scene_reply(analysis) -> str:
    listed = "; ".join(", ".join(t) for t in analysis.triplets)
    return f"Current activity: {listed}. {analysis.description}"


def _negative_reply(target: str) -> str:
    return f"The {target} is not present in this image."


def _keywords(triplets) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for triplet in triplets:
        for word in triplet:
            seen.setdefault(word, None)
    return tuple(seen)


class _Builder:
    def __init__(self, bundle: FixtureBundle, rng: random.Random):
        self.bundle = bundle
        self.rng = rng
        self.refs = sorted(bundle.fixtures)

    def positive(self, template: ConversationTemplate, rec_id: str, split: str) -> DatasetRecord:
        if template.api_name == "detect":
            eligible_targets = sorted(
                {
                    d.class_name
                    for f in self.bundle.fixtures.values()
                    for d in f.gt_detections
                }
            )
            target = self.rng.choice(eligible_targets)
            scenes = [
                r
                for r in self.refs
                if any(
                    d.class_name == target
                    for d in self.bundle.fixtures[r].gt_detections
                )
            ]
            ref = _pin_scene(template.template_id, target, scenes)
            fixture = self.bundle.fixtures[ref]
            dets = [d for d in fixture.gt_detections if d.class_name == target]
            reply = _detect_reply(target, dets)
            expectations = EvalCase(
                id=rec_id,
                query=template.query_pattern.format(target=target),
                image_ref=ref,
                expect_call="detect",
                reference_reply=reply,
                gt_boxes=tuple(d.bbox for d in dets),
            )
        elif template.api_name == "segment":
            eligible_targets = sorted(
                {
                    name
                    for f in self.bundle.fixtures.values()
                    for name in f.gt_masks
                }
            )
            target = self.rng.choice(eligible_targets)
            scenes = [r for r in self.refs if target in self.bundle.fixtures[r].gt_masks]
            ref = _pin_scene(template.template_id, target, scenes)
            mask = self.bundle.fixtures[ref].gt_masks[target]
            reply = _segment_reply(target, mask)
            expectations = EvalCase(
                id=rec_id,
                query=template.query_pattern.format(target=target),
                image_ref=ref,
                expect_call="segment",
                reference_reply=reply,
                gt_mask=mask,
            )
        elif template.api_name == "analyze_scene":
            target = None
            scenes = [r for r in self.refs if self.bundle.fixtures[r].gt_triplets]
            ref = _pin_scene(template.template_id, None, scenes)
            fixture = self.bundle.fixtures[ref]
            analysis = fixture_scene(fixture)
            reply = _scene_reply(analysis)
            expectations = EvalCase(
                id=rec_id,
                query=template.query_pattern,
                image_ref=ref,
                expect_call="analyze_scene",
                keywords=_keywords(fixture.gt_triplets),
                reference_reply=reply,
            )
        else:
            raise GenerationError(
                f"template {template.template_id!r} references unknown function "
                f"{template.api_name!r}"
            )
        query = template.query_pattern.format(target=target) if target else template.query_pattern
        thinking = (
            template.thinking_pattern.format(target=target)
            if target
            else template.thinking_pattern
        )
        params = {"target": target} if target else {}
        gold = StructuredReply(
            thinking=thinking,
            calling=FunctionCall(template.api_name, params),
            replying=reply,
        )
        return DatasetRecord(
            id=rec_id, split=split, kind="positive",
            image_ref=expectations.image_ref, query=query, gold=gold,
            expectations=expectations,
        )

    def negative(self, template: ConversationTemplate, rec_id: str) -> DatasetRecord:
        vocabulary = set(self.bundle.vocabulary.all_objects())
        for _ in range(64):
            ref = self.rng.choice(self.refs)
            absent = sorted(vocabulary - self.bundle.fixtures[ref].present_objects)
            if absent:
                break
        else:
            raise GenerationError("no scene with absent objects available")
        target = self.rng.choice(absent)
        reply = _negative_reply(target)
        query = template.query_pattern.format(target=target)
        gold = StructuredReply(
            thinking=template.thinking_pattern.format(target=target),
            calling=FunctionCall("detect", {"target": target}),
            replying=reply,
        )
        expectations = EvalCase(
            id=rec_id, query=query, image_ref=ref, expect_call="detect",
            is_negative=True, reference_reply=reply,
        )
        return DatasetRecord(
            id=rec_id, split="train", kind="negative", image_ref=ref,
            query=query, gold=gold, expectations=expectations,
        )

    def no_call(self, template: ConversationTemplate, rec_id: str) -> DatasetRecord:
        ref = self.rng.choice(self.refs)
        gold = StructuredReply(
            thinking="This is general guidance; no surgical function is required.",
            calling=None,
            replying=template.fixed_reply,
        )
        expectations = EvalCase(
            id=rec_id, query=template.query_pattern, image_ref=ref,
            expect_call=None, reference_reply=template.fixed_reply,
        )
        return DatasetRecord(
            id=rec_id, split="train", kind="no-call", image_ref=ref,
            query=template.query_pattern, gold=gold, expectations=expectations,
        )


def generate_fc_dataset(
    templates: tuple[ConversationTemplate, ...],
    bundle: FixtureBundle,
    counts: dict,
    seed: int,
    unseen_templates: tuple[ConversationTemplate, ...] = UNSEEN_TEMPLATES,
    known_functions: tuple[str, ...] = CORE_FUNCTIONS,
) -> list[DatasetRecord]:
    """Deterministic dataset: counts keys are positive, negative, no_call,
    and optionally unseen (positive-style records from the held-out pool)."""
    for template in tuple(templates) + tuple(unseen_templates):
        if template.api_name is not None and template.api_name not in known_functions:
            raise GenerationError(
                f"template {template.template_id!r} references unknown function "
                f"{template.api_name!r}"
            )
    n_pos = int(counts.get("positive", 0))
    n_neg = int(counts.get("negative", 0))
    n_nc = int(counts.get("no_call", counts.get("no-call", 0)))
    n_unseen = int(counts.get("unseen", 0))
    if min(n_pos, n_neg, n_nc, n_unseen) < 0:
        raise GenerationError("counts must be nonnegative")

    rng = random.Random(seed)
    builder = _Builder(bundle, rng)
    pos_templates = [t for t in templates if t.kind == "positive"]
    neg_templates = [t for t in templates if t.kind == "negative"]
    nc_templates = [t for t in templates if t.kind == "no-call"]
    unseen_pos = [t for t in unseen_templates if t.kind == "positive"]
    for needed, pool, label in (
        (n_pos, pos_templates, "positive"),
        (n_neg, neg_templates, "negative"),
        (n_nc, nc_templates, "no-call"),
        (n_unseen, unseen_pos, "unseen"),
    ):
        if needed > 0 and not pool:
            raise GenerationError(f"no templates available for kind {label!r}")

    records: list[DatasetRecord] = []
    for i in range(n_pos):
        records.append(
            builder.positive(rng.choice(pos_templates), f"train-positive-{i:05d}", "train")
        )
    for i in range(n_neg):
        records.append(builder.negative(rng.choice(neg_templates), f"train-negative-{i:05d}"))
    for i in range(n_nc):
        records.append(builder.no_call(rng.choice(nc_templates), f"train-no-call-{i:05d}"))
    for i in range(n_unseen):
        records.append(
            builder.positive(
                rng.choice(unseen_pos), f"unseen-positive-{i:05d}", "test-unseen"
            )
        )
    return records


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def validate_record(record: DatasetRecord, registry_specs) -> list[Violation]:
    """All invariant checks; returns violations instead of raising."""
    specs = {s.api_name: s for s in registry_specs}
    violations: list[Violation] = []
    if record.kind not in ("positive", "negative", "no-call"):
        violations.append(Violation("KindMismatch", f"unknown kind {record.kind!r}"))
    if record.split not in ("train", "test-unseen"):
        violations.append(Violation("KindMismatch", f"unknown split {record.split!r}"))
    if not record.gold.replying:
        violations.append(Violation("EmptyReply", "gold replying must be non-empty"))

    calling = record.gold.calling
    if record.kind == "no-call":
        if calling is not None:
            violations.append(
                Violation("KindMismatch", "no-call record has a gold calling")
            )
        if record.expectations.expect_call is not None:
            violations.append(
                Violation("ExpectationMismatch", "no-call record expects a call")
            )
    elif record.kind == "positive" and calling is None:
        violations.append(Violation("KindMismatch", "positive record lacks a calling"))

    if record.kind == "negative" and not record.expectations.is_negative:
        violations.append(
            Violation(
                "ExpectationMismatch",
                "negative record expectations must mark a non-existent-object query",
            )
        )
    if record.kind != "negative" and record.expectations.is_negative:
        violations.append(
            Violation("ExpectationMismatch", "non-negative record marked negative")
        )

    if calling is not None:
        spec = specs.get(calling.api_name)
        if spec is None:
            violations.append(
                Violation("UnknownFunction", f"gold calls {calling.api_name!r}")
            )
        else:
            required = {n for n, _ in spec.required_params}
            missing = required - set(calling.api_params)
            extra = set(calling.api_params) - required
            for name in sorted(missing):
                violations.append(
                    Violation("ParamSchema", f"missing required parameter {name!r}")
                )
            for name in sorted(extra):
                violations.append(
                    Violation("ParamSchema", f"unexpected parameter {name!r}")
                )
    return violations


def write_dataset_jsonl(path: str | Path, records: list[DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
            fh.write("\n")


def read_dataset_jsonl(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("schema_version") != DATASET_SCHEMA_VERSION:
                raise ValueError(
                    f"line {line_no}: unsupported schema_version "
                    f"{obj.get('schema_version')!r}"
                )
            records.append(DatasetRecord.from_dict(obj))
    return records


def scripted_fixtures_from_records(records) -> dict[tuple[str, bool], str]:
    """Backend replay table: the ideal pre-call and post-call texts per query."""
    from .wire import render_structured

    fixtures: dict[tuple[str, bool], str] = {}
    for record in records:
        gold = record.gold
        if gold.calling is None:
            fixtures[(record.query, False)] = render_structured(gold)
            continue
        first = StructuredReply(
            thinking=gold.thinking,
            calling=gold.calling,
            replying=f"Running the {gold.calling.api_name} function.",
        )
        second = StructuredReply(
            thinking="The function results are in; composing the final answer.",
            calling=None,
            replying=gold.replying,
        )
        fixtures[(record.query, False)] = render_structured(first)
        fixtures[(record.query, True)] = render_structured(second)
    return fixtures
