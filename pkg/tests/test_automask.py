"""Editing-mask synthesis per task category."""

from types import SimpleNamespace

import numpy as np
import pytest

from modiste.automask import (
    AutomaskConfig,
    MaskPlan,
    OcclusionRuleTable,
    generate_mask,
    infer_occluded_parts,
    mask_for_addition,
    mask_for_recolor,
    mask_for_removal,
    mask_for_replacement,
    resolve_source_mask,
)
from modiste.coseg import DerivedSemanticRule, build_cosegmentation, derive_applicable
from modiste.errors import (
    DegenerateMaskError,
    EmptyMaskError,
    ParameterError,
    PlacementNotFoundError,
    SourceNotFoundError,
    UnknownLabelError,
)
from modiste.masks import AlphaMatte, BinaryMask, dilate_maxpool, intersect, union
from modiste.mocks import person_parsing, person_pose

from conftest import random_mask
from oracles import dilate_window_scan, intersect_loop


WIDTH, HEIGHT = 64, 96


@pytest.fixture(scope="module")
def coseg():
    base = build_cosegmentation(person_parsing(WIDTH, HEIGHT), person_pose(WIDTH, HEIGHT))
    return derive_applicable(base, DerivedSemanticRule.defaults())


def rect_mask(top, bottom, left, right, width=WIDTH, height=HEIGHT):
    bits = np.zeros((height, width), dtype=bool)
    bits[top:bottom, left:right] = True
    return BinaryMask(bits)


class CountingSegmenter:
    def __init__(self, result: BinaryMask | None):
        self.result = result
        self.calls = 0

    def __call__(self, image_ref, phrase):
        self.calls += 1
        if self.result is None:
            return BinaryMask.zeros(WIDTH, HEIGHT)
        return self.result


def task(category, source=None, target=None):
    return SimpleNamespace(category=category, source_desc=source, target_desc=target)


def fake_backends(segmenter=None, matte=None):
    return SimpleNamespace(
        call_open_vocab_seg=segmenter or CountingSegmenter(None),
        call_matting=lambda ref: matte
        if matte is not None
        else AlphaMatte(np.ones((HEIGHT, WIDTH))),
        call_chat=lambda messages: (_ for _ in ()).throw(AssertionError("chat unused")),
    )


class TestResolveSourceMask:
    def test_semantic_hit_never_calls_the_segmenter(self, coseg):
        segmenter = CountingSegmenter(rect_mask(0, 4, 0, 4))
        mask, provenance = resolve_source_mask("img", coseg, "pants", segmenter)
        assert provenance == "coseg-lookup"
        assert mask == coseg.mask_of("pants")
        assert segmenter.calls == 0

    def test_synonyms_count_as_semantic_hits(self, coseg):
        segmenter = CountingSegmenter(rect_mask(0, 4, 0, 4))
        mask, provenance = resolve_source_mask("img", coseg, "Trousers", segmenter)
        assert provenance == "coseg-lookup"
        assert mask == coseg.mask_of("pants")
        assert segmenter.calls == 0

    def test_miss_falls_back_to_open_vocabulary(self, coseg):
        fixture = rect_mask(10, 20, 30, 40)
        segmenter = CountingSegmenter(fixture)
        mask, provenance = resolve_source_mask("img", coseg, "brooch", segmenter)
        assert provenance == "open-vocab-fallback"
        assert mask == fixture
        assert segmenter.calls == 1

    def test_empty_fallback_is_source_not_found(self, coseg):
        segmenter = CountingSegmenter(None)
        with pytest.raises(SourceNotFoundError) as excinfo:
            resolve_source_mask("img", coseg, "brooch", segmenter)
        assert "brooch" in str(excinfo.value)

    def test_blank_source_desc_rejected(self, coseg):
        with pytest.raises(ParameterError):
            resolve_source_mask("img", coseg, "  ", CountingSegmenter(None))


class TestMaskForRemoval:
    def test_radius_zero_is_identity(self):
        m = rect_mask(4, 8, 4, 8)
        assert mask_for_removal(m, 0) == m

    def test_single_pixel_radius_two_gives_five_square(self):
        bits = np.zeros((11, 11), dtype=bool)
        bits[5, 5] = True
        out = mask_for_removal(BinaryMask(bits), 2)
        expected = np.zeros((11, 11), dtype=bool)
        expected[3:8, 3:8] = True
        assert np.array_equal(out.bits, expected)

    def test_grows_the_source_on_random_masks(self, rng):
        for _ in range(100):
            m = random_mask(rng, 32, 24, density=0.1)
            if m.is_empty():
                continue
            out = mask_for_removal(m, int(rng.integers(0, 4)))
            assert out.contains(m)

    def test_empty_source_rejected(self):
        with pytest.raises(EmptyMaskError):
            mask_for_removal(BinaryMask.zeros(8, 8), 2)


class TestMaskForRecolor:
    def test_identity_matte_returns_the_source(self):
        m = rect_mask(4, 8, 4, 8)
        out = mask_for_recolor("img", m, lambda ref: AlphaMatte(np.ones((HEIGHT, WIDTH))), 0.5)
        assert out == m

    def test_zero_matte_is_degenerate(self):
        m = rect_mask(4, 8, 4, 8)
        with pytest.raises(DegenerateMaskError):
            mask_for_recolor("img", m, lambda ref: AlphaMatte(np.zeros((HEIGHT, WIDTH))), 0.5)

    def test_half_matte_keeps_exactly_that_half(self):
        m = rect_mask(10, 20, 10, 30)
        alpha = np.zeros((HEIGHT, WIDTH))
        alpha[:, :20] = 1.0
        out = mask_for_recolor("img", m, lambda ref: AlphaMatte(alpha), 0.5)
        expected = intersect_loop(alpha >= 0.5, m.bits)
        assert np.array_equal(out.bits, expected)
        assert out == rect_mask(10, 20, 10, 20)

    def test_result_always_inside_the_source(self, rng):
        for _ in range(50):
            m = random_mask(rng, 24, 24, density=0.3)
            if m.is_empty():
                continue
            alpha = rng.random((24, 24))
            try:
                out = mask_for_recolor("img", m, lambda ref: AlphaMatte(alpha), 0.5)
            except DegenerateMaskError:
                continue
            assert m.contains(out)

    def test_empty_source_rejected(self):
        with pytest.raises(EmptyMaskError):
            mask_for_recolor(
                "img", BinaryMask.zeros(8, 8), lambda ref: AlphaMatte(np.ones((8, 8))), 0.5
            )


class TestOcclusionRules:
    def test_tshirt_covers_torso_arms_and_top(self, coseg):
        table = OcclusionRuleTable.default()
        parts = infer_occluded_parts(coseg, "a white t-shirt", None, table)
        labels = [label for label, _ in parts]
        assert set(labels) == {"left-upper-arm", "right-upper-arm", "top"}
        for label, mask in parts:
            assert mask == coseg.mask_of(label)

    def test_unmatched_target_is_empty(self, coseg):
        parts = infer_occluded_parts(coseg, "a ring", None, OcclusionRuleTable.default())
        assert parts == []

    def test_longest_matching_phrase_wins(self, coseg):
        table = OcclusionRuleTable.default()
        sweater = table.match("a sweater dress")
        assert "left-upper-arm" in sweater and "left-upper-leg" not in sweater

    def test_word_boundaries_respected(self):
        table = OcclusionRuleTable.default()
        assert table.match("a topaz ring") == ()
        assert table.match("a crop top") != ()

    def test_watch_targets_the_wrist(self, coseg):
        parts = infer_occluded_parts(coseg, "a gold watch", None, OcclusionRuleTable.default())
        assert [label for label, _ in parts] == ["wrist"]

    def test_unknown_labels_in_table_rejected(self):
        with pytest.raises(UnknownLabelError):
            OcclusionRuleTable(rules=((("cape",), ("dragon-wing",)),))

    def test_reasoner_answers_filtered_to_known_labels(self, coseg):
        parts = infer_occluded_parts(
            coseg,
            "a t-shirt",
            lambda labels, target: "top, dragon-wing",
            OcclusionRuleTable.default(),
        )
        assert [label for label, _ in parts] == ["top"]

    def test_reasoner_failure_degrades_to_table(self, coseg):
        def broken(labels, target):
            raise ConnectionError("reasoner offline")

        parts = infer_occluded_parts(coseg, "a watch", broken, OcclusionRuleTable.default())
        assert [label for label, _ in parts] == ["wrist"]

    def test_reasoner_gets_the_coseg_label_list(self, coseg):
        seen = {}

        def reasoner(labels, target):
            seen["labels"] = list(labels)
            return "none"

        infer_occluded_parts(coseg, "a hat", reasoner, OcclusionRuleTable.default())
        assert seen["labels"] == coseg.labels()


class TestMaskForReplacement:
    def test_no_occlusion_reduces_to_removal(self, rng):
        for _ in range(20):
            m = random_mask(rng, 24, 24, density=0.2)
            if m.is_empty():
                continue
            radius = int(rng.integers(0, 4))
            assert mask_for_replacement(m, [], radius) == mask_for_removal(m, radius)

    def test_matches_brute_force_dilated_union(self):
        m_o = rect_mask(10, 20, 10, 20, 32, 32)
        arm = rect_mask(5, 25, 22, 26, 32, 32)
        out = mask_for_replacement(m_o, [arm], 1)
        expected = dilate_window_scan(m_o.bits | arm.bits, 1)
        assert np.array_equal(out.bits, expected)

    def test_superset_of_removal_on_random_cases(self, rng):
        for _ in range(100):
            m = random_mask(rng, 24, 24, density=0.15)
            if m.is_empty():
                continue
            occluded = [random_mask(rng, 24, 24, density=0.1) for _ in range(2)]
            radius = int(rng.integers(0, 3))
            replacement = mask_for_replacement(m, occluded, radius)
            assert replacement.contains(mask_for_removal(m, radius))


class TestMaskForAddition:
    def test_single_mask_radius_zero_is_identity(self):
        wrist = rect_mask(40, 44, 8, 16)
        assert mask_for_addition([wrist], 0) == wrist

    def test_wrist_band_dilated_matches_oracle(self, coseg):
        wrist = coseg.mask_of("wrist")
        out = mask_for_addition([wrist], 2)
        assert np.array_equal(out.bits, dilate_window_scan(wrist.bits, 2))

    def test_empty_list_fails_fast(self):
        with pytest.raises(PlacementNotFoundError):
            mask_for_addition([], 2)

    def test_all_empty_masks_fail_fast(self):
        with pytest.raises(PlacementNotFoundError):
            mask_for_addition([BinaryMask.zeros(8, 8), BinaryMask.zeros(8, 8)], 2)


class TestGenerateMask:
    def test_removal_with_semantic_hit_issues_zero_seg_calls(self, coseg):
        segmenter = CountingSegmenter(rect_mask(0, 4, 0, 4))
        backends = fake_backends(segmenter=segmenter)
        plan = generate_mask("img", task("Removal", source="pants"), coseg, backends)
        assert plan.source_provenance == "coseg-lookup"
        assert segmenter.calls == 0
        assert plan.mask.contains(coseg.mask_of("pants"))

    def test_removal_with_miss_uses_fallback_provenance(self, coseg):
        segmenter = CountingSegmenter(rect_mask(12, 18, 24, 40))
        backends = fake_backends(segmenter=segmenter)
        plan = generate_mask("img", task("Removal", source="necklace"), coseg, backends)
        assert plan.source_provenance == "open-vocab-fallback"
        assert segmenter.calls == 1

    def test_recolor_mask_stays_inside_source(self, coseg):
        backends = fake_backends()
        plan = generate_mask("img", task("Recoloring", source="pants", target="red pants"),
                             coseg, backends)
        assert plan.source_mask is not None
        assert plan.source_mask.contains(plan.mask)

    def test_replacement_collects_occluded_parts(self, coseg):
        backends = fake_backends()
        plan = generate_mask(
            "img", task("Replacement", source="vest", target="white t-shirt"), coseg, backends
        )
        assert plan.source_provenance == "coseg-lookup"
        labels = [label for label, _ in plan.occluded_parts]
        assert "top" in labels
        assert plan.mask.contains(coseg.mask_of("top"))

    def test_addition_has_no_source(self, coseg):
        backends = fake_backends()
        plan = generate_mask("img", task("Addition", target="a watch"), coseg, backends)
        assert plan.source_provenance == "not-applicable"
        assert plan.source_mask is None
        assert plan.mask.contains(coseg.mask_of("wrist"))

    def test_unknown_category_rejected(self, coseg):
        with pytest.raises(ParameterError):
            generate_mask("img", task("Embroidery", source="top"), coseg, fake_backends())

    def test_explicit_radius_honored(self, coseg):
        backends = fake_backends()
        plan = generate_mask(
            "img",
            task("Removal", source="pants"),
            coseg,
            backends,
            config=AutomaskConfig(dilation_radius=0),
        )
        assert plan.dilation_radius == 0
        assert plan.mask == coseg.mask_of("pants")

    def test_plan_serialization_lists_occluded_labels(self, coseg):
        plan = generate_mask(
            "img", task("Addition", target="a necklace"), coseg, fake_backends()
        )
        data = plan.to_json()
        assert data["category"] == "Addition"
        assert data["provenance"] == "not-applicable"
        assert set(data["occludedLabels"]) <= {"neck", "chest"}
        assert data["dilationRadius"] == plan.dilation_radius


class TestMaskPlanInvariants:
    def test_empty_mask_rejected(self):
        with pytest.raises(EmptyMaskError):
            MaskPlan(
                mask=BinaryMask.zeros(8, 8),
                source_mask=None,
                occluded_parts=(),
                source_provenance="not-applicable",
                dilation_radius=3,
                category="Addition",
            )

    def test_addition_must_be_not_applicable(self):
        with pytest.raises(ParameterError):
            MaskPlan(
                mask=BinaryMask.ones(8, 8),
                source_mask=BinaryMask.ones(8, 8),
                occluded_parts=(),
                source_provenance="coseg-lookup",
                dilation_radius=3,
                category="Addition",
            )

    def test_non_addition_needs_a_real_provenance(self):
        with pytest.raises(ParameterError):
            MaskPlan(
                mask=BinaryMask.ones(8, 8),
                source_mask=None,
                occluded_parts=(),
                source_provenance="not-applicable",
                dilation_radius=3,
                category="Removal",
            )
