"""Task-specific editing-mask synthesis.

Each edit category gets its mask through a different composition of the
mask algebra:

- Removal: dilate the object's own mask so the generator can heal the
  boundary it leaves behind.
- Recoloring: intersect a binarized foreground matte with the object's
  mask — color must change inside the object only, never beyond it.
- Replacement: union the object's mask with every body/garment part the
  incoming object may occlude, then dilate.
- Addition: there is no object yet, so the mask is the dilated union of the
  parts the new object will sit on (wrist for a watch, neck and chest for a
  necklace, …).

Source masks come from the fused semantic map when the term resolves there;
otherwise an open-vocabulary segmentation backend is consulted — and that
branch order is observable, because a semantic-map hit must issue zero
segmentation calls.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

from modiste import resources
from modiste.coseg import CoSegmentation, lookup
from modiste.errors import (
    DegenerateMaskError,
    DimensionError,
    EmptyMaskError,
    ParameterError,
    PlacementNotFoundError,
    SourceNotFoundError,
    UnknownLabelError,
)
from modiste.masks import (
    AlphaMatte,
    BinaryMask,
    binarize,
    default_dilation_radius,
    dilate_maxpool,
    intersect,
    union,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from modiste.planner import EditTask

log = logging.getLogger(__name__)

CATEGORY_REPLACEMENT = "Replacement"
CATEGORY_RECOLORING = "Recoloring"
CATEGORY_ADDITION = "Addition"
CATEGORY_REMOVAL = "Removal"
CATEGORIES = (
    CATEGORY_REPLACEMENT,
    CATEGORY_RECOLORING,
    CATEGORY_ADDITION,
    CATEGORY_REMOVAL,
)

PROVENANCE_COSEG = "coseg-lookup"
PROVENANCE_OPEN_VOCAB = "open-vocab-fallback"
PROVENANCE_NOT_APPLICABLE = "not-applicable"

# A segmenter maps (imageRef, phrase) to a mask; a matting backend maps
# imageRef to an alpha matte; an occlusion reasoner maps (labels, targetDesc)
# to a comma-separated sublist of those labels.
Segmenter = Callable[[str, str], BinaryMask]
Matting = Callable[[str], AlphaMatte]
OcclusionReasoner = Callable[[Sequence[str], str], str]


@dataclass(frozen=True)
class MaskPlan:
    """The editing mask for one task plus everything needed to audit it."""

    mask: BinaryMask
    source_mask: BinaryMask | None
    occluded_parts: tuple[tuple[str, BinaryMask], ...]
    source_provenance: str
    dilation_radius: int
    category: str

    def __post_init__(self):
        if self.mask.is_empty():
            raise EmptyMaskError("a mask plan must carry a non-empty editing mask")
        if self.source_provenance not in (
            PROVENANCE_COSEG,
            PROVENANCE_OPEN_VOCAB,
            PROVENANCE_NOT_APPLICABLE,
        ):
            raise ParameterError(f"bad provenance {self.source_provenance!r}")
        if self.category == CATEGORY_ADDITION:
            if self.source_provenance != PROVENANCE_NOT_APPLICABLE:
                raise ParameterError("an addition has no source object to attribute")
        elif self.source_provenance == PROVENANCE_NOT_APPLICABLE:
            raise ParameterError(f"{self.category} requires a resolved source mask")
        for label, part in self.occluded_parts:
            if part.shape != self.mask.shape:
                raise DimensionError(f"occluded part {label!r} does not match the mask plane")

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "provenance": self.source_provenance,
            "dilationRadius": self.dilation_radius,
            "occludedLabels": [label for label, _ in self.occluded_parts],
        }


@dataclass(frozen=True)
class OcclusionRuleTable:
    """Deterministic fallback for which parts a new garment may cover.

    Each rule pairs free-text matchers with semantic labels. The matcher is
    a whole-word search; when several rules match, the one with the longest
    matching phrase wins (so "t-shirt" beats "shirt").
    """

    rules: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        vocabulary = set(resources.coseg_vocabulary(include_derived=True))
        for matchers, labels in self.rules:
            if not matchers or not labels:
                raise ParameterError("occlusion rules need matchers and labels")
            unknown = set(labels) - vocabulary
            if unknown:
                raise UnknownLabelError(f"occlusion rule lists unknown labels: {sorted(unknown)}")

    @classmethod
    def default(cls) -> "OcclusionRuleTable":
        data = resources.occlusion_rules_data()
        return cls(
            rules=tuple(
                (tuple(rule["match"]), tuple(rule["occludes"])) for rule in data
            )
        )

    def match(self, target_desc: str) -> tuple[str, ...]:
        """Labels the best-matching rule says `target_desc` may occlude."""
        text = " ".join(target_desc.lower().split())
        best: tuple[str, ...] = ()
        best_len = 0
        for matchers, labels in self.rules:
            for matcher in matchers:
                if len(matcher) > best_len and re.search(
                    rf"\b{re.escape(matcher)}\b", text
                ):
                    best = labels
                    best_len = len(matcher)
        return best


@dataclass(frozen=True)
class AutomaskConfig:
    dilation_radius: int | None = None  # None: 1% of the short side, min 3
    matte_threshold: float = 0.5
    use_occlusion_reasoner: bool = False


def resolve_source_mask(
    image_ref: str,
    coseg: CoSegmentation,
    source_desc: str,
    segmenter: Segmenter,
) -> tuple[BinaryMask, str]:
    """The mask of the object an edit acts on, semantic map first.

    A successful lookup never touches the segmentation backend; only a miss
    falls through to open-vocabulary segmentation on the raw phrase.
    """
    if not source_desc or not source_desc.strip():
        raise ParameterError("source description must be non-empty")
    hit = lookup(coseg, source_desc)
    if hit is not None:
        return hit[1], PROVENANCE_COSEG
    mask = segmenter(image_ref, source_desc.strip())
    if mask.is_empty():
        raise SourceNotFoundError(source_desc)
    return mask, PROVENANCE_OPEN_VOCAB


def mask_for_removal(source_mask: BinaryMask, radius: int) -> BinaryMask:
    if source_mask.is_empty():
        raise EmptyMaskError("cannot remove from an empty source mask")
    return dilate_maxpool(source_mask, radius)


def mask_for_recolor(
    image_ref: str,
    source_mask: BinaryMask,
    matting: Matting,
    threshold: float,
) -> BinaryMask:
    if source_mask.is_empty():
        raise EmptyMaskError("cannot recolor an empty source mask")
    matte = matting(image_ref)
    mask = intersect(binarize(matte, threshold), source_mask)
    if mask.is_empty():
        raise DegenerateMaskError(
            "the foreground matte and the source mask do not overlap; "
            "refusing to guess a recolor region"
        )
    return mask


def infer_occluded_parts(
    coseg: CoSegmentation,
    target_desc: str,
    reasoner: OcclusionReasoner | None,
    fallback: OcclusionRuleTable,
) -> list[tuple[str, BinaryMask]]:
    """Which existing parts the incoming object may cover.

    A configured reasoner is asked to pick from the map's own label list;
    answers outside that list are discarded. Without a reasoner — or when it
    fails — the rule table decides. An empty result is valid (a ring covers
    nothing we segment).
    """
    if not target_desc or not target_desc.strip():
        raise ParameterError("target description must be non-empty")
    labels: Sequence[str] = ()
    if reasoner is not None:
        try:
            answer = reasoner(coseg.labels(), target_desc)
        except Exception as exc:  # noqa: BLE001 - degrade to the table on any failure
            log.warning("occlusion reasoner failed (%s); using rule table", exc)
        else:
            present = set(coseg.labels())
            labels = tuple(
                part for part in (p.strip().lower() for p in answer.split(","))
                if part in present
            )
    if not labels:
        labels = fallback.match(target_desc)
    out = []
    seen = set()
    for label in labels:
        if label in seen:
            continue
        seen.add(label)
        entry = coseg.get(label)
        if entry is not None and not entry.mask.is_empty():
            out.append((label, entry.mask))
    return out


def mask_for_replacement(
    source_mask: BinaryMask,
    occluded: Sequence[BinaryMask],
    radius: int,
) -> BinaryMask:
    if source_mask.is_empty():
        raise EmptyMaskError("cannot replace an empty source mask")
    return dilate_maxpool(union([source_mask, *occluded]), radius)


def mask_for_addition(occluded: Sequence[BinaryMask], radius: int) -> BinaryMask:
    placements = [m for m in occluded if not m.is_empty()]
    if not placements:
        raise PlacementNotFoundError(
            "no placement region found for the object to add"
        )
    return dilate_maxpool(union(placements), radius)


def generate_mask(
    image_ref: str,
    task: "EditTask",
    coseg: CoSegmentation,
    backends,
    config: AutomaskConfig | None = None,
    occlusion_table: OcclusionRuleTable | None = None,
) -> MaskPlan:
    """Route one task to its category's mask path and package the result."""
    config = config or AutomaskConfig()
    occlusion_table = occlusion_table or OcclusionRuleTable.default()
    radius = (
        config.dilation_radius
        if config.dilation_radius is not None
        else default_dilation_radius(coseg.width, coseg.height)
    )
    reasoner = None
    if config.use_occlusion_reasoner:
        reasoner = _chat_occlusion_reasoner(backends)

    if task.category == CATEGORY_REMOVAL:
        source, provenance = resolve_source_mask(
            image_ref, coseg, task.source_desc, backends.call_open_vocab_seg
        )
        mask = mask_for_removal(source, radius)
        occluded: tuple[tuple[str, BinaryMask], ...] = ()
    elif task.category == CATEGORY_RECOLORING:
        source, provenance = resolve_source_mask(
            image_ref, coseg, task.source_desc, backends.call_open_vocab_seg
        )
        mask = mask_for_recolor(image_ref, source, backends.call_matting, config.matte_threshold)
        occluded = ()
    elif task.category == CATEGORY_REPLACEMENT:
        source, provenance = resolve_source_mask(
            image_ref, coseg, task.source_desc, backends.call_open_vocab_seg
        )
        occluded = tuple(
            infer_occluded_parts(coseg, task.target_desc, reasoner, occlusion_table)
        )
        mask = mask_for_replacement(source, [m for _, m in occluded], radius)
    elif task.category == CATEGORY_ADDITION:
        occluded = tuple(
            infer_occluded_parts(coseg, task.target_desc, reasoner, occlusion_table)
        )
        mask = mask_for_addition([m for _, m in occluded], radius)
        source = None
        provenance = PROVENANCE_NOT_APPLICABLE
    else:
        raise ParameterError(f"unknown task category {task.category!r}")

    return MaskPlan(
        mask=mask,
        source_mask=source,
        occluded_parts=occluded,
        source_provenance=provenance,
        dilation_radius=radius,
        category=task.category,
    )


def _chat_occlusion_reasoner(backends) -> OcclusionReasoner:
    def reason(labels: Sequence[str], target_desc: str) -> str:
        prompt = (
            "A person photo has these labeled parts: "
            + ", ".join(labels)
            + f". Someone will put on: {target_desc}. "
            "Answer with only the comma-separated labels from that list that the "
            "new item could cover. Answer 'none' if it covers nothing listed."
        )
        return backends.call_chat(
            [
                {"role": "system", "content": "Answer with a comma-separated list only."},
                {"role": "user", "content": prompt},
            ]
        )

    return reason
