"""Fused fine-grained semantic maps over a person image.

A garment-level parsing map and a clothing-agnostic body-part map are
intersected rule by rule into one ordered set of labeled masks, extra
semantics (wrist, chest, neckline, waist) are synthesized from recipes, and
free-text part names resolve to entries through a synonym table with an
optional language-model assist.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from modiste import resources
from modiste.errors import (
    DimensionError,
    ParameterError,
    RecipeError,
    UnknownLabelError,
)
from modiste.masks import (
    BinaryMask,
    LabelMap,
    area,
    bbox,
    default_dilation_radius,
    dilate_maxpool,
    intersect,
    labelmap_to_png,
    mask_from_labels,
    mask_to_png,
    union,
)

log = logging.getLogger(__name__)

PROVENANCE_PARSING = "parsing"
PROVENANCE_POSE = "pose"
PROVENANCE_FUSED = "fused"
PROVENANCE_DERIVED = "derived"

# A resolver maps (term, candidate labels) to a label name or "none".
TermResolver = Callable[[str, Sequence[str]], str]


@dataclass(frozen=True)
class CosegEntry:
    label: str
    mask: BinaryMask
    provenance: str


class CoSegmentation:
    """Ordered map from semantic label to its mask over one image.

    Non-derived entries are pairwise disjoint and non-empty; derived entries
    may be empty. Instances are immutable.
    """

    def __init__(self, entries: Sequence[CosegEntry], width: int, height: int):
        seen = set()
        for e in entries:
            if e.label in seen:
                raise ParameterError(f"duplicate entry {e.label!r}")
            seen.add(e.label)
            if e.mask.shape != (height, width):
                raise DimensionError(f"entry {e.label!r} mask does not match image size")
            if e.provenance != PROVENANCE_DERIVED and e.mask.is_empty():
                raise ParameterError(f"non-derived entry {e.label!r} is empty")
        self._entries = {e.label: e for e in entries}
        self.width = width
        self.height = height

    def labels(self) -> list[str]:
        return list(self._entries)

    def entries(self) -> list[CosegEntry]:
        return list(self._entries.values())

    def get(self, label: str) -> CosegEntry | None:
        return self._entries.get(label)

    def mask_of(self, label: str) -> BinaryMask:
        entry = self._entries.get(label)
        if entry is None:
            raise UnknownLabelError(f"no entry {label!r}")
        return entry.mask

    def __contains__(self, label: str) -> bool:
        return label in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def extended(self, extra: Sequence[CosegEntry]) -> "CoSegmentation":
        return CoSegmentation(self.entries() + list(extra), self.width, self.height)

    def __repr__(self) -> str:
        return f"CoSegmentation({self.width}x{self.height}, {len(self)} entries)"


@dataclass(frozen=True)
class FusionRule:
    parsing_label: str
    pose_label: str
    fused_label: str


@dataclass(frozen=True)
class FusionRuleTable:
    """How parsing and pose labels combine into fused entries.

    Each fused label is produced by exactly one rule; passthrough parsing
    labels are copied verbatim and must not collide with rule inputs, which
    guarantees the output entries stay pairwise disjoint.
    """

    rules: tuple[FusionRule, ...]
    passthrough: tuple[str, ...]

    def __post_init__(self):
        fused = [r.fused_label for r in self.rules]
        if len(set(fused)) != len(fused):
            raise ParameterError("each fused label must be produced by exactly one rule")
        overlap = {r.parsing_label for r in self.rules} & set(self.passthrough)
        if overlap:
            raise ParameterError(f"labels both fused and passthrough: {sorted(overlap)}")

    def validate_against(self, parsing_vocab: Sequence[str], pose_vocab: Sequence[str],
                         coseg_vocab: Sequence[str]) -> None:
        for r in self.rules:
            if r.parsing_label not in parsing_vocab:
                raise UnknownLabelError(f"rule parsing label {r.parsing_label!r} unknown")
            if r.pose_label not in pose_vocab:
                raise UnknownLabelError(f"rule pose label {r.pose_label!r} unknown")
            if r.fused_label not in coseg_vocab:
                raise UnknownLabelError(f"rule fused label {r.fused_label!r} unknown")
        for p in self.passthrough:
            if p not in parsing_vocab:
                raise UnknownLabelError(f"passthrough label {p!r} unknown in parsing vocabulary")
            if p not in coseg_vocab:
                raise UnknownLabelError(f"passthrough label {p!r} unknown in output vocabulary")

    @classmethod
    def default(cls) -> "FusionRuleTable":
        data = resources.fusion_rules_data()
        table = cls(
            rules=tuple(FusionRule(*triple) for triple in data["rules"]),
            passthrough=tuple(data["passthrough"]),
        )
        table.validate_against(
            resources.parsing_vocabulary(),
            resources.pose_vocabulary(),
            resources.coseg_vocabulary(),
        )
        return table


@dataclass(frozen=True)
class DerivedSemanticRule:
    """Recipe that synthesizes one extra semantic entry from existing ones.

    Steps run in order against an accumulator mask. Steps that take labels
    accept several alternatives and use whichever are present; when none of
    a step's labels exist the recipe fails with the missing names.
    """

    name: str
    steps: tuple[Mapping, ...]

    @classmethod
    def defaults(cls) -> list["DerivedSemanticRule"]:
        return [
            cls(name=d["name"], steps=tuple(d["steps"]))
            for d in resources.derived_semantics_data()
        ]


def build_cosegmentation(parsing: LabelMap, pose: LabelMap,
                         rules: FusionRuleTable | None = None) -> CoSegmentation:
    """Intersect parsing and pose planes into fused entries, copy passthrough ones.

    Empty fused results are dropped. Output order is deterministic: rules in
    table order, then passthrough labels in listed order.
    """
    if rules is None:
        rules = FusionRuleTable.default()
    if parsing.shape != pose.shape:
        raise DimensionError(
            f"parsing {parsing.shape} and pose {pose.shape} dimensions differ"
        )
    height, width = parsing.shape
    entries: list[CosegEntry] = []
    for rule in rules.rules:
        fused = intersect(
            mask_from_labels(parsing, {rule.parsing_label}),
            mask_from_labels(pose, {rule.pose_label}),
        )
        if not fused.is_empty():
            entries.append(CosegEntry(rule.fused_label, fused, PROVENANCE_FUSED))
    for label in rules.passthrough:
        mask = mask_from_labels(parsing, {label})
        if not mask.is_empty():
            entries.append(CosegEntry(label, mask, PROVENANCE_PARSING))
    return CoSegmentation(entries, width, height)


def _present_masks(coseg: CoSegmentation, labels: Sequence[str], rule_name: str) -> list[BinaryMask]:
    present = [coseg.mask_of(l) for l in labels if l in coseg]
    if not present:
        missing = tuple(l for l in labels if l not in coseg)
        raise RecipeError(
            f"recipe {rule_name!r} needs one of {list(labels)} "
            f"but none are present (missing: {list(missing)})",
            missing=missing,
        )
    return present


def _crop_to_band(mask: BinaryMask, axis: str, lo: float, hi: float) -> BinaryMask:
    """Keep the [lo, hi) fraction band of the mask's own bounding box."""
    if axis not in ("vertical", "horizontal"):
        raise ParameterError(f"crop axis must be vertical or horizontal, got {axis!r}")
    if not (0.0 <= lo < hi <= 1.0):
        raise ParameterError(f"crop range must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]")
    box = bbox(mask)
    if box is None:
        return mask
    if axis == "vertical":
        start, extent = box.top, box.height
    else:
        start, extent = box.left, box.width
    band_lo = start + math.floor(lo * extent)
    band_hi = start + math.ceil(hi * extent)
    keep = BinaryMask.zeros(mask.width, mask.height).bits.copy()
    if axis == "vertical":
        keep[band_lo:band_hi, :] = True
    else:
        keep[:, band_lo:band_hi] = True
    return intersect(mask, BinaryMask(keep))


def _band_radius(step: Mapping, coseg: CoSegmentation) -> int:
    radius = step.get("radius")
    if radius is None:
        return default_dilation_radius(coseg.width, coseg.height)
    return int(radius)


def _apply_step(coseg: CoSegmentation, rule_name: str, step: Mapping,
                acc: BinaryMask | None) -> BinaryMask:
    op = step.get("op")
    if op == "union":
        masks = _present_masks(coseg, step["labels"], rule_name)
        if acc is not None:
            masks = [acc] + masks
        return union(masks)
    if op == "crop":
        operand = acc
        if "label" in step:
            operand = _present_masks(coseg, [step["label"]], rule_name)[0]
        if operand is None:
            raise ParameterError(f"recipe {rule_name!r}: crop has no operand")
        return _crop_to_band(operand, step["axis"], float(step["lo"]), float(step["hi"]))
    if op == "dilate":
        operand = acc
        if "label" in step:
            operand = _present_masks(coseg, [step["label"]], rule_name)[0]
        if operand is None:
            raise ParameterError(f"recipe {rule_name!r}: dilate has no operand")
        return dilate_maxpool(operand, _band_radius(step, coseg))
    if op == "boundary_band":
        radius = _band_radius(step, coseg)
        side_a = union(_present_masks(coseg, step["a"], rule_name))
        side_b = acc if step.get("b") is None else union(_present_masks(coseg, step["b"], rule_name))
        if side_b is None:
            raise ParameterError(f"recipe {rule_name!r}: boundary_band has no second side")
        return intersect(dilate_maxpool(side_a, radius), dilate_maxpool(side_b, radius))
    raise ParameterError(f"recipe {rule_name!r}: unknown step op {op!r}")


def derive_semantics(coseg: CoSegmentation,
                     rules: Sequence[DerivedSemanticRule]) -> CoSegmentation:
    """Extend a map with one derived entry per rule; existing entries are untouched.

    Derived results may be empty and are kept that way. Rules may reference
    entries derived by earlier rules in the same call.
    """
    current = coseg
    for rule in rules:
        acc: BinaryMask | None = None
        for step in rule.steps:
            acc = _apply_step(current, rule.name, step, acc)
        if acc is None:
            raise ParameterError(f"recipe {rule.name!r} has no steps")
        current = current.extended([CosegEntry(rule.name, acc, PROVENANCE_DERIVED)])
    return current


def derive_applicable(coseg: CoSegmentation,
                      rules: Sequence[DerivedSemanticRule]) -> CoSegmentation:
    """Like derive_semantics but silently skips rules whose inputs are absent.

    Used on the automatic pipeline path, where a sleeved or legless crop of
    a person simply does not support every shipped recipe.
    """
    current = coseg
    for rule in rules:
        try:
            current = derive_semantics(current, [rule])
        except RecipeError as exc:
            log.debug("derived semantic %r skipped: %s", rule.name, exc)
    return current


_WS = re.compile(r"\s+")


def normalize_term(term: str, synonyms: Mapping[str, str] | None = None,
                   vocabulary: Sequence[str] | None = None,
                   resolver: TermResolver | None = None) -> str:
    """Map free text onto a canonical label where possible.

    Lowercase/trim first, then the synonym table; on a miss, an optional
    language-model resolver may pick the closest canonical label. Resolver
    answers outside the vocabulary (and resolver failures) leave the
    normalized term as-is.
    """
    if not term or not term.strip():
        raise ParameterError("term must be non-empty")
    if synonyms is None:
        synonyms = resources.synonym_table()
    if vocabulary is None:
        vocabulary = resources.coseg_vocabulary()
    normalized = _WS.sub(" ", term.strip().lower())
    hit = synonyms.get(normalized)
    if hit is not None:
        return hit
    if normalized in vocabulary:
        return normalized
    if resolver is not None:
        try:
            answer = _WS.sub(" ", resolver(normalized, list(vocabulary)).strip().lower())
        except Exception as exc:  # noqa: BLE001 - transport failures degrade to table-only
            log.warning("term resolver failed for %r: %s", normalized, exc)
            return normalized
        if answer in vocabulary and answer != "none":
            return answer
    return normalized


def lookup(coseg: CoSegmentation, term: str,
           synonyms: Mapping[str, str] | None = None,
           resolver: TermResolver | None = None) -> tuple[str, BinaryMask] | None:
    """Resolve a free-text part name to an entry, or None when absent.

    Absence is a value: the caller falls back to open-vocabulary
    segmentation.
    """
    label = normalize_term(term, synonyms=synonyms, resolver=resolver)
    entry = coseg.get(label)
    if entry is None:
        return None
    return (label, entry.mask)


def coseg_manifest(coseg: CoSegmentation) -> dict:
    """JSON-ready summary of every entry: label, provenance, area, bbox."""
    entries = []
    for e in coseg.entries():
        box = bbox(e.mask)
        entries.append(
            {
                "label": e.label,
                "provenance": e.provenance,
                "areaPixels": area(e.mask),
                "bbox": list(box.as_tuple()) if box else None,
            }
        )
    return {"width": coseg.width, "height": coseg.height, "entries": entries}


def coseg_index_map(coseg: CoSegmentation) -> LabelMap:
    """Index plane of the non-derived entries (derived ones may overlap).

    Entry i gets value i+1 in entry order; 0 stays background.
    """
    plane = np.zeros((coseg.height, coseg.width), dtype=np.uint8)
    vocab = ["background"]
    for e in coseg.entries():
        if e.provenance == PROVENANCE_DERIVED:
            continue
        vocab.append(e.label)
        plane[e.mask.bits] = len(vocab) - 1
    return LabelMap(plane, vocab)


def serialize_coseg(coseg: CoSegmentation) -> dict[str, bytes]:
    """Artifact files for a map: index PNG, vocabulary, manifest, derived PNGs.

    Derived entries can overlap the base ones, so they are excluded from the
    index plane and written as standalone 1-bit masks instead.
    """
    index_png, vocab_sidecar = labelmap_to_png(coseg_index_map(coseg))
    files = {
        "coseg.png": index_png,
        "coseg.vocab.json": vocab_sidecar.encode("utf-8"),
        "coseg.manifest.json": json.dumps(
            coseg_manifest(coseg), indent=2, sort_keys=True
        ).encode("utf-8"),
    }
    for e in coseg.entries():
        if e.provenance == PROVENANCE_DERIVED:
            files[f"derived/{e.label}.png"] = mask_to_png(e.mask, bit_depth=1)
    return files
