"""Desk-scale ground-truth scenes and the fixture-backed function set.

A fixture bundle is a directory of images plus one JSON annotation file per
image (present objects, detections, RLE masks, activity triplets) and a
vocabulary file; the manifest carries a schema version. Fixture functions
answer strictly from the annotations, so they never fabricate objects that
are absent from a scene.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .registry import FunctionFailedError, FunctionRegistry, FunctionSpec
from .rle import rect_mask
from .types import (
    Detection,
    SceneAnalysis,
    SegmentationMask,
    detections_result,
    mask_result,
    scene_result,
)

BUNDLE_SCHEMA_VERSION = 1


class ClassNotFoundError(Exception):
    """Requested class has no ground-truth mask in the fixture."""


@dataclass(frozen=True)
class Vocabulary:
    instruments: tuple[str, ...]
    verbs: tuple[str, ...]
    targets: tuple[str, ...]

    def check_triplet(self, triplet: tuple[str, str, str]) -> None:
        instrument, verb, target = triplet
        if instrument not in self.instruments:
            raise ValueError(f"unknown instrument in triplet: {instrument!r}")
        if verb not in self.verbs:
            raise ValueError(f"unknown verb in triplet: {verb!r}")
        if target not in self.targets:
            raise ValueError(f"unknown target in triplet: {target!r}")

    def all_objects(self) -> tuple[str, ...]:
        return self.instruments


DEFAULT_VOCABULARY = Vocabulary(
    instruments=(
        "navigation probe",
        "scissors",
        "bipolar forceps",
        "suction tube",
        "curette",
        "retractor",
        "drill",
        "endoscope",
    ),
    verbs=("cut", "grasp", "retract", "aspirate", "coagulate", "dissect"),
    targets=("tissue", "tumor", "dura", "mucosa", "septum", "bone"),
)


@dataclass(frozen=True)
class SceneFixture:
    image_ref: str
    present_objects: frozenset[str]
    gt_detections: tuple[Detection, ...]
    gt_masks: dict[str, SegmentationMask] = field(default_factory=dict)
    gt_triplets: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        for det in self.gt_detections:
            if det.class_name not in self.present_objects:
                raise ValueError(
                    f"detection class {det.class_name!r} not in present_objects"
                )


def fixture_detect(fixture: SceneFixture, target_class: str) -> list[Detection]:
    """Ground-truth detections for the class, case-insensitive; [] if absent."""
    wanted = target_class.strip().lower()
    return [d for d in fixture.gt_detections if d.class_name.lower() == wanted]


def fixture_segment(fixture: SceneFixture, target_class: str) -> SegmentationMask:
    wanted = target_class.strip().lower()
    for name, mask in fixture.gt_masks.items():
        if name.lower() == wanted:
            return mask
    raise ClassNotFoundError(f"no ground-truth mask for class {target_class!r}")


def fixture_scene(fixture: SceneFixture) -> SceneAnalysis:
    if not fixture.gt_triplets:
        return SceneAnalysis(triplets=(), description="no activity recognized")
    phrases = [
        f"the {inst} is used to {verb} the {target}"
        for inst, verb, target in fixture.gt_triplets
    ]
    return SceneAnalysis(
        triplets=fixture.gt_triplets,
        description="Recognized activity: " + "; ".join(phrases) + ".",
    )


class FixtureBundle:
    """Loaded fixture set: scenes by image_ref plus content-hash aliases."""

    def __init__(self, vocabulary: Vocabulary):
        self.vocabulary = vocabulary
        self.fixtures: dict[str, SceneFixture] = {}
        self.images: dict[str, bytes] = {}
        self._by_hash: dict[str, str] = {}

    def add(self, fixture: SceneFixture, image_bytes: bytes) -> None:
        for triplet in fixture.gt_triplets:
            self.vocabulary.check_triplet(triplet)
        self.fixtures[fixture.image_ref] = fixture
        self.images[fixture.image_ref] = image_bytes
        digest = hashlib.sha256(image_bytes).hexdigest()
        self._by_hash[f"sha256:{digest}"] = fixture.image_ref

    def resolve(self, image_ref: str | None) -> SceneFixture | None:
        if image_ref is None:
            return None
        if image_ref in self.fixtures:
            return self.fixtures[image_ref]
        alias = self._by_hash.get(image_ref)
        if alias is not None:
            return self.fixtures[alias]
        return None

    def image_bytes(self, image_ref: str) -> bytes | None:
        if image_ref in self.images:
            return self.images[image_ref]
        alias = self._by_hash.get(image_ref)
        return self.images.get(alias) if alias else None

    def refs(self) -> list[str]:
        return list(self.fixtures)


def _mask_to_json(mask: SegmentationMask) -> dict:
    return {"width": mask.width, "height": mask.height, "rle": list(mask.rle)}


def _mask_from_json(obj: dict) -> SegmentationMask:
    return SegmentationMask(
        width=obj["width"], height=obj["height"], rle=tuple(obj["rle"])
    )


def save_fixture_bundle(directory: str | Path, bundle: FixtureBundle) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "vocabulary.json").write_text(
        json.dumps(
            {
                "instruments": list(bundle.vocabulary.instruments),
                "verbs": list(bundle.vocabulary.verbs),
                "targets": list(bundle.vocabulary.targets),
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    for ref, fixture in bundle.fixtures.items():
        (directory / f"{ref}.png").write_bytes(bundle.images[ref])
        annotation = {
            "schema_version": BUNDLE_SCHEMA_VERSION,
            "image": f"{ref}.png",
            "image_ref": ref,
            "present_objects": sorted(fixture.present_objects),
            "detections": [
                {"class_name": d.class_name, "bbox": list(d.bbox), "score": d.score}
                for d in fixture.gt_detections
            ],
            "masks": {k: _mask_to_json(m) for k, m in fixture.gt_masks.items()},
            "triplets": [list(t) for t in fixture.gt_triplets],
        }
        (directory / f"{ref}.annotation.json").write_text(
            json.dumps(annotation, indent=2), encoding="utf-8"
        )
    manifest = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "vocabulary": "vocabulary.json",
        "images": sorted(bundle.fixtures),
    }
    (directory / "bundle.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_fixture_bundle(directory: str | Path) -> FixtureBundle:
    directory = Path(directory)
    manifest_path = directory / "bundle.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no bundle.json in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != BUNDLE_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported bundle schema version: {manifest.get('schema_version')!r}"
        )
    vocab_doc = json.loads(
        (directory / manifest["vocabulary"]).read_text(encoding="utf-8")
    )
    vocabulary = Vocabulary(
        instruments=tuple(vocab_doc["instruments"]),
        verbs=tuple(vocab_doc["verbs"]),
        targets=tuple(vocab_doc["targets"]),
    )
    bundle = FixtureBundle(vocabulary)
    for ref in manifest["images"]:
        ann = json.loads((directory / f"{ref}.annotation.json").read_text(encoding="utf-8"))
        if ann.get("schema_version") != BUNDLE_SCHEMA_VERSION:
            raise ValueError(f"unsupported annotation schema in {ref}")
        fixture = SceneFixture(
            image_ref=ann["image_ref"],
            present_objects=frozenset(ann["present_objects"]),
            gt_detections=tuple(
                Detection(d["class_name"], tuple(d["bbox"]), d.get("score", 1.0))
                for d in ann["detections"]
            ),
            gt_masks={k: _mask_from_json(m) for k, m in ann["masks"].items()},
            gt_triplets=tuple(tuple(t) for t in ann["triplets"]),
        )
        bundle.add(fixture, (directory / ann["image"]).read_bytes())
    return bundle


def _scene_image(size: int, boxes: list[tuple[tuple, tuple]]) -> bytes:
    """Flat gray canvas with one colored rectangle per annotated box."""
    from PIL import Image, ImageDraw

    img = Image.new("RGB", (size, size), (96, 96, 104))
    draw = ImageDraw.Draw(img)
    for bbox, color in boxes:
        x1, y1, x2, y2 = bbox
        draw.rectangle(
            [x1 * size, y1 * size, x2 * size - 1, y2 * size - 1], fill=color
        )
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# The box every end-to-end detection example replays.
PROBE_BBOX = (0.18, 0.41, 0.45, 0.99)


def build_demo_bundle(size: int = 64) -> FixtureBundle:
    """Deterministic six-scene bundle used by tests, demos, and the CLI."""
    bundle = FixtureBundle(DEFAULT_VOCABULARY)

    def scene(ref, objects, detections, masks=None, triplets=()):
        colors = [(200, 60, 60), (60, 160, 200), (90, 200, 90), (220, 180, 60)]
        image = _scene_image(
            size, [(d.bbox, colors[i % 4]) for i, d in enumerate(detections)]
        )
        bundle.add(
            SceneFixture(
                image_ref=ref,
                present_objects=frozenset(objects),
                gt_detections=tuple(detections),
                gt_masks=masks or {},
                gt_triplets=tuple(triplets),
            ),
            image,
        )

    scene(
        "probe_scene",
        {"navigation probe"},
        [Detection("navigation probe", PROBE_BBOX)],
        masks={"navigation probe": rect_mask(size, size, 12, 26, 29, size)},
        triplets=[("navigation probe", "dissect", "tissue")],
    )
    scene(
        "scissors_scene",
        {"scissors"},
        [Detection("scissors", (0.10, 0.20, 0.40, 0.60))],
        masks={"scissors": rect_mask(size, size, 6, 13, 26, 38)},
        triplets=[("scissors", "cut", "tissue")],
    )
    scene(
        "forceps_scene",
        {"bipolar forceps", "suction tube"},
        [
            Detection("bipolar forceps", (0.05, 0.10, 0.30, 0.45)),
            Detection("bipolar forceps", (0.55, 0.50, 0.85, 0.90)),
            Detection("suction tube", (0.35, 0.05, 0.50, 0.70)),
        ],
        masks={"suction tube": rect_mask(size, size, 22, 3, 32, 45)},
        triplets=[("bipolar forceps", "coagulate", "dura")],
    )
    scene(
        "retractor_scene",
        {"retractor", "curette"},
        [
            Detection("retractor", (0.02, 0.30, 0.25, 0.80)),
            Detection("curette", (0.60, 0.15, 0.95, 0.55)),
        ],
        masks={"retractor": rect_mask(size, size, 1, 19, 16, 51)},
        triplets=[("retractor", "retract", "septum"), ("curette", "dissect", "tumor")],
    )
    scene(
        "drill_scene",
        {"drill"},
        [Detection("drill", (0.30, 0.30, 0.70, 0.70))],
        masks={"drill": rect_mask(size, size, 19, 19, 45, 45)},
        triplets=[("drill", "dissect", "bone")],
    )
    scene("calm_scene", set(), [], masks={}, triplets=[])
    return bundle


# --- registry wiring ---------------------------------------------------------

DETECT_SPEC = FunctionSpec(
    api_name="detect",
    required_params=(("target", "object class to locate"),),
    output_kind="detections",
    description="Locate instances of an object class; returns normalized boxes.",
)
SEGMENT_SPEC = FunctionSpec(
    api_name="segment",
    required_params=(("target", "object class to segment"),),
    output_kind="mask",
    description="Pixel mask of an object class (run-length encoded).",
)
SCENE_SPEC = FunctionSpec(
    api_name="analyze_scene",
    required_params=(),
    output_kind="scene",
    description="Recognize surgical activity as instrument/verb/target triplets.",
)


def _require_fixture(bundle: FixtureBundle, image_ref: str | None) -> SceneFixture:
    fixture = bundle.resolve(image_ref)
    if fixture is None:
        raise FunctionFailedError(
            "input", f"no fixture scene for image reference {image_ref!r}"
        )
    return fixture


def fixture_implementations(bundle: FixtureBundle) -> dict[str, tuple]:
    """(spec, implementation) pairs for the three core functions."""

    def detect_impl(params, image_ref):
        fixture = _require_fixture(bundle, image_ref)
        return detections_result(fixture_detect(fixture, params["target"]))

    def segment_impl(params, image_ref):
        fixture = _require_fixture(bundle, image_ref)
        return mask_result(fixture_segment(fixture, params["target"]))

    def scene_impl(params, image_ref):
        fixture = _require_fixture(bundle, image_ref)
        return scene_result(fixture_scene(fixture))

    return {
        "detect": (DETECT_SPEC, detect_impl),
        "segment": (SEGMENT_SPEC, segment_impl),
        "analyze_scene": (SCENE_SPEC, scene_impl),
    }


DISTRACTOR_SPECS = (
    FunctionSpec(
        api_name="estimate_blood_loss",
        required_params=(),
        output_kind="scene",
        description="Estimate cumulative blood loss from the visible field.",
    ),
    FunctionSpec(
        api_name="identify_phase",
        required_params=(),
        output_kind="scene",
        description="Identify the current procedural phase.",
    ),
    FunctionSpec(
        api_name="count_instruments",
        required_params=(),
        output_kind="scene",
        description="Count instruments currently in the field of view.",
    ),
)


def _distractor_impl(params, image_ref):
    return scene_result(SceneAnalysis(triplets=(), description="no findings"))


def build_registry(bundle: FixtureBundle, function_count: int = 3) -> FunctionRegistry:
    """Registry with 2..6 functions: detect and segment first, then the
    scene analyzer, then no-op distractors (used by the scalability sweep)."""
    if not (2 <= function_count <= 3 + len(DISTRACTOR_SPECS)):
        raise ValueError(f"function_count must be in 2..6, got {function_count}")
    impls = fixture_implementations(bundle)
    registry = FunctionRegistry()
    order = ["detect", "segment", "analyze_scene"][:function_count]
    for name in order:
        registry.register(*impls[name])
    for spec in DISTRACTOR_SPECS[: max(0, function_count - 3)]:
        registry.register(spec, _distractor_impl)
    return registry
