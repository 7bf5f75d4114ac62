"""Release acceptance gate.

Each test covers exactly one release criterion and prints a single
``[PASS]``/``[FAIL]`` line so the verdicts read straight off a captured run.
Everything runs against the mock backends; nothing here needs a network.
"""

import functools
import io
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from modiste.automask import (
    CATEGORY_ADDITION,
    CATEGORY_RECOLORING,
    CATEGORY_REMOVAL,
    CATEGORY_REPLACEMENT,
    PROVENANCE_COSEG,
    PROVENANCE_OPEN_VOCAB,
    generate_mask,
    mask_for_addition,
    mask_for_recolor,
    mask_for_removal,
    mask_for_replacement,
)
from modiste.cli import main
from modiste.errors import PlacementNotFoundError
from modiste.evalharness import weighted_average
from modiste.gateway import Gateway, mock_descriptors
from modiste.masks import (
    AlphaMatte,
    BinaryMask,
    dilate_maxpool,
    intersect,
    mask_from_png,
    union,
)
from modiste.mocks import MockSuite, synthetic_person_png
from modiste.planner import (
    CONDITION_INPAINT_EDGE,
    EditTask,
    GenerationPrompt,
    PlannerConfig,
    default_coseg_builder,
    plan_generation,
)
from modiste.session import STATE_REVIEW, Engine
from modiste.store import BlobStore

from conftest import random_mask
from oracles import dilate_window_scan, intersect_loop, union_loop


def criterion(name):
    """Emit exactly one verdict line for the wrapped acceptance check."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}")
                raise
            print(f"[PASS] {name}")

        return run

    return wrap


NECKLACE_BOX = [0.42, 0.17, 0.58, 0.24]

SCENARIO = {
    "version": 1,
    "open-vocab-seg": {"phrases": {"necklace": NECKLACE_BOX}},
}

TWO_TASK_REQUEST = "replace the vest with a t-shirt and remove the necklace"


@pytest.fixture()
def backends(tmp_path):
    """A mock gateway, its blob store, and a stored person photo."""
    store = BlobStore(tmp_path / "blobs")
    gateway = Gateway(
        mock_descriptors(max_retries=0), store, mock_suite=MockSuite(store, SCENARIO)
    )
    ref = store.put(synthetic_person_png(128, 192), "image/png")
    return gateway, store, ref


def make_engine(tmp_path):
    return Engine(
        tmp_path / "data",
        planner_config=PlannerConfig(use_llm=False, seed=11),
        scenario=SCENARIO,
    )


def rgb_pixels(store, ref):
    with Image.open(io.BytesIO(store.get(ref))) as img:
        return np.asarray(img.convert("RGB"))


@criterion(
    "dilation, union, and intersection match brute-force references on 1,000 random masks in under 10 s"
)
def test_mask_algebra_matches_brute_force_references():
    rng = np.random.default_rng(20260814)
    started = time.monotonic()
    checked = 0
    while checked < 1000:
        height = int(rng.integers(8, 65))
        width = int(rng.integers(8, 65))
        density = float(rng.uniform(0.02, 0.5))
        first = rng.random((height, width)) < density
        second = rng.random((height, width)) < density
        for bits in (first, second):
            radius = int(rng.integers(0, 7))
            fast = dilate_maxpool(BinaryMask(bits), radius).bits
            assert np.array_equal(fast, dilate_window_scan(bits, radius))
            checked += 1
        assert np.array_equal(
            union([BinaryMask(first), BinaryMask(second)]).bits,
            union_loop([first, second]),
        )
        assert np.array_equal(
            intersect(BinaryMask(first), BinaryMask(second)).bits,
            intersect_loop(first, second),
        )
    elapsed = time.monotonic() - started
    assert checked == 1000
    assert elapsed < 10.0, f"oracle sweep took {elapsed:.2f}s"


@criterion(
    "semantic-lookup hits never call the open-vocabulary segmenter; misses call it exactly once with fallback provenance"
)
def test_source_resolution_branches_are_observable(backends):
    gateway, _store, ref = backends
    coseg = default_coseg_builder(gateway)(ref)

    hit = generate_mask(
        ref,
        EditTask(CATEGORY_RECOLORING, "pants", "red pants", "dye the pants red"),
        coseg,
        gateway,
    )
    assert gateway.call_count("open-vocab-seg") == 0
    assert hit.source_provenance == PROVENANCE_COSEG

    miss = generate_mask(
        ref,
        EditTask(CATEGORY_REMOVAL, "necklace", None, "remove the necklace"),
        coseg,
        gateway,
    )
    assert gateway.call_count("open-vocab-seg") == 1
    assert miss.source_provenance == PROVENANCE_OPEN_VOCAB


@criterion(
    "recolor masks stay inside their source mask; an all-ones matte reproduces the source bit-exactly"
)
def test_recolor_masks_are_contained_in_the_source(backends, rng):
    gateway, _store, ref = backends
    coseg = default_coseg_builder(gateway)(ref)

    fixtures = [
        ("pants", "red pants"),
        ("top", "blue top"),
        ("hair", "blonde hair"),
    ]
    for source, target in fixtures:
        plan = generate_mask(
            ref,
            EditTask(CATEGORY_RECOLORING, source, target, f"recolor the {source}"),
            coseg,
            gateway,
        )
        escaped = plan.mask.bits & ~plan.source_mask.bits
        assert not escaped.any(), f"recolor mask for {source!r} left the source"

    for source, _target in fixtures:
        source_mask = coseg.mask_of(source)
        ones = AlphaMatte(np.ones(source_mask.shape))
        assert mask_for_recolor(ref, source_mask, lambda _ref: ones, 0.5) == source_mask

    for _ in range(50):
        source_mask = random_mask(rng, 48, 64, density=0.2)
        alpha = rng.random((64, 48))
        clipped = mask_for_recolor(
            ref, source_mask, lambda _ref: AlphaMatte(alpha), 0.5
        )
        assert not (clipped.bits & ~source_mask.bits).any()


@criterion(
    "replacement masks contain the removal mask; empty occlusion collapses replacement to removal; addition fails fast with no placements"
)
def test_mask_family_relations(backends, rng):
    gateway, _store, ref = backends
    coseg = default_coseg_builder(gateway)(ref)

    source_mask = coseg.mask_of("pants")
    occluded = [coseg.mask_of("top"), coseg.mask_of("left-lower-leg")]
    for radius in (0, 1, 2, 4):
        removal = mask_for_removal(source_mask, radius)
        replacement = mask_for_replacement(source_mask, occluded, radius)
        assert not (removal.bits & ~replacement.bits).any()
        assert mask_for_replacement(source_mask, [], radius) == removal

    for _ in range(25):
        mask = random_mask(rng, 48, 48, density=0.15)
        parts = [
            random_mask(rng, 48, 48, density=0.1)
            for _ in range(int(rng.integers(0, 3)))
        ]
        radius = int(rng.integers(0, 4))
        removal = mask_for_removal(mask, radius)
        replacement = mask_for_replacement(mask, parts, radius)
        assert not (removal.bits & ~replacement.bits).any()
        assert mask_for_replacement(mask, [], radius) == removal

    with pytest.raises(PlacementNotFoundError):
        mask_for_addition([], 2)
    with pytest.raises(PlacementNotFoundError):
        generate_mask(
            ref,
            EditTask(CATEGORY_ADDITION, None, "a ring", "add a ring"),
            coseg,
            gateway,
        )


@criterion(
    "across 50 randomized jobs, edge conditioning appears for recoloring and only recoloring, with matching edge-backend call counts"
)
def test_edge_conditioning_tracks_recoloring(backends):
    gateway, _store, ref = backends
    coseg = default_coseg_builder(gateway)(ref)

    tasks = {
        CATEGORY_REMOVAL: EditTask(CATEGORY_REMOVAL, "pants", None, "remove the pants"),
        CATEGORY_RECOLORING: EditTask(
            CATEGORY_RECOLORING, "pants", "red pants", "dye the pants red"
        ),
        CATEGORY_REPLACEMENT: EditTask(
            CATEGORY_REPLACEMENT, "top", "a t-shirt", "replace the top with a t-shirt"
        ),
        CATEGORY_ADDITION: EditTask(CATEGORY_ADDITION, None, "a watch", "add a watch"),
    }
    plans = {
        category: generate_mask(ref, task, coseg, gateway)
        for category, task in tasks.items()
    }
    edge_calls_before = gateway.call_count("edge")

    rng = random.Random(20260814)
    recolor_jobs = 0
    for _ in range(50):
        category = rng.choice(sorted(tasks))
        prompt = GenerationPrompt(text="a photo of a person wearing an outfit")
        job = plan_generation(
            tasks[category], plans[category], ref, gateway.call_edge, prompt,
            PlannerConfig(seed=7),
        )
        is_recolor = category == CATEGORY_RECOLORING
        recolor_jobs += is_recolor
        assert (job.condition == CONDITION_INPAINT_EDGE) == is_recolor
        assert (job.edge_ref is not None) == is_recolor

    assert recolor_jobs >= 1
    assert gateway.call_count("edge") - edge_calls_before == recolor_jobs


REFERENCE_WEIGHTED_ROWS = (
    ((73.00, 87.14, 78.00), 78.64),
    ((10.00, 64.29, 10.00), 27.27),
    ((86.00, 94.29, 88.00), 89.09),
    ((70.00, 81.43, 78.00), 75.45),
    ((75.00, 65.71, 62.00), 69.09),
    ((87.00, 81.43, 86.00), 85.00),
)


@criterion(
    "group-weighted accuracy with weights (100, 70, 50) reproduces every reference average within 0.01"
)
def test_weighted_accuracy_matches_reference_rows():
    sizes = {"single": 100, "dual": 70, "multi": 50}
    for accuracies, expected in REFERENCE_WEIGHTED_ROWS:
        groups = dict(zip(("single", "dual", "multi"), accuracies))
        got = weighted_average(groups, sizes)
        assert abs(got - expected) <= 0.01, (accuracies, got, expected)


@criterion(
    "a two-task mock session finishes in under 5 s, keeps pixels outside each mask bit-identical, and hash-chains the tasks"
)
def test_two_task_session_end_to_end(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(synthetic_person_png(256, 384))

    started = time.monotonic()
    session.handle_message(TWO_TASK_REQUEST)
    elapsed = time.monotonic() - started

    assert elapsed < 5.0, f"two-task session took {elapsed:.2f}s"
    assert session.state == STATE_REVIEW
    records = [e["record"] for e in session.events() if e["type"] == "job-executed"]
    assert len(records) == 2
    for record in records:
        bits = mask_from_png(engine.store.get(record["maskRef"])).bits
        before = rgb_pixels(engine.store, record["inputImageRef"])
        after = rgb_pixels(engine.store, record["resultImageRef"])
        assert after.shape == before.shape
        assert (after[~bits] == before[~bits]).all()
    assert records[1]["inputImageRef"] == records[0]["resultImageRef"]


@criterion(
    "restarting the engine mid-review replays an identical transcript and artifact set from the event log"
)
def test_restart_replays_transcript_and_artifacts(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(synthetic_person_png(256, 384))
    session.handle_message(TWO_TASK_REQUEST)
    assert session.state == STATE_REVIEW

    snapshot = session.snapshot()
    events = session.events()
    artifact_refs = set()
    for event in events:
        if event["type"] == "image-attached":
            artifact_refs.add(event["ref"])
        elif event["type"] == "job-executed":
            record = event["record"]
            for key in ("inputImageRef", "resultImageRef", "maskRef", "edgeRef"):
                if record.get(key):
                    artifact_refs.add(record[key])
    assert len(artifact_refs) >= 5
    payloads = {ref: engine.store.get(ref) for ref in artifact_refs}
    engine.close()

    restarted = make_engine(tmp_path)
    replayed = restarted.get_session(session.id)
    assert replayed.snapshot() == snapshot
    assert replayed.events() == events
    for ref, payload in payloads.items():
        assert restarted.store.get(ref) == payload


@criterion(
    "three scripted evaluation runs over the shipped 220-case corpus emit byte-identical reports"
)
def test_eval_reports_are_deterministic():
    runner = CliRunner()
    for task in ("split", "classify"):
        outputs = []
        for _ in range(3):
            result = runner.invoke(main, ["eval", "--task", task, "--format", "json"])
            assert result.exit_code == 0, result.output
            outputs.append(result.output)
        assert outputs[0] == outputs[1] == outputs[2]
