"""Session state machine, persistence, replay, and conversational routing."""

import pytest

from modiste.errors import ImageRejectedError, ParameterError
from modiste.mocks import synthetic_person_png
from modiste.planner import PlannerConfig
from modiste.session import (
    FALLBACK_SMALL_TALK,
    STATE_AWAITING_IMAGE,
    STATE_READY,
    STATE_REVIEW,
    Engine,
    Session,
    looks_like_edit,
)

NECKLACE_BOX = [0.42, 0.17, 0.58, 0.24]

BASE_SCENARIO = {
    "version": 1,
    "open-vocab-seg": {"phrases": {"necklace": NECKLACE_BOX}},
}

PERSON = synthetic_person_png(256, 384)


def make_engine(tmp_path, scenario=None, planner=None):
    return Engine(
        tmp_path / "data",
        planner_config=planner or PlannerConfig(use_llm=False, seed=7),
        scenario=scenario if scenario is not None else BASE_SCENARIO,
    )


# ---------------------------------------------------------------------------
# Message routing


def test_messages_that_read_as_edits():
    assert looks_like_edit("remove the necklace")
    assert looks_like_edit("i want to dye the pants red")
    assert looks_like_edit("add a hat and make the top blue")
    assert not looks_like_edit("hello")
    assert not looks_like_edit("what do you think of this outfit?")
    assert not looks_like_edit("   ")


# ---------------------------------------------------------------------------
# State machine


def test_new_session_awaits_an_image(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    assert session.state == STATE_AWAITING_IMAGE


def test_edit_request_before_image_is_refused_politely(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    turns = session.handle_message("remove the necklace")
    assert session.state == STATE_AWAITING_IMAGE
    assert len(turns) == 1
    assert "photo" in turns[0]["text"].lower()


def test_small_talk_before_image_gets_canned_reply_when_chat_is_down(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    turns = session.handle_message("hello there!")
    assert turns[0]["text"] == FALLBACK_SMALL_TALK
    assert session.state == STATE_AWAITING_IMAGE


def test_small_talk_uses_scripted_chat_reply(tmp_path):
    scenario = dict(BASE_SCENARIO)
    scenario["chat"] = {
        "responses": [{"contains": "hello", "text": "Hi! Attach a photo to begin."}],
        "default": None,
    }
    engine = make_engine(tmp_path, scenario=scenario)
    session = engine.create_session()
    turns = session.handle_message("hello")
    assert turns[0]["text"] == "Hi! Attach a photo to begin."


def test_attach_image_moves_to_ready_and_dedupes(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    first = session.attach_image(PERSON)
    second = session.attach_image(PERSON)
    assert session.state == STATE_READY
    assert first["ref"] == second["ref"]
    assert first["width"] == 256 and first["height"] == 384


def test_attach_image_rejects_small_photos(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    with pytest.raises(ImageRejectedError):
        session.attach_image(synthetic_person_png(128, 192))
    assert session.state == STATE_AWAITING_IMAGE


def test_attach_image_rejects_undecodable_bytes(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    with pytest.raises(ImageRejectedError):
        session.attach_image(b"definitely not an image")


def test_edit_runs_to_review_with_result_image(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    base = session.attach_image(PERSON)["ref"]
    turns = session.handle_message("dye the pants red")
    assert session.state == STATE_REVIEW
    assert len(turns) == 1
    result_ref = turns[0]["imageRef"]
    assert result_ref and result_ref != base
    assert engine.store.has(result_ref)
    assert session.current_image_ref == result_ref


def test_review_feedback_starts_next_round_on_the_edited_image(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    first = session.handle_message("dye the pants red")[0]["imageRef"]
    session.handle_message("remove the necklace")
    jobs = [e for e in session.events() if e["type"] == "job-executed"]
    assert len(jobs) == 2
    assert jobs[1]["record"]["inputImageRef"] == first
    assert session.state == STATE_REVIEW


def test_small_talk_in_review_keeps_the_review_state(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    session.handle_message("dye the pants red")
    turns = session.handle_message("looks great, thanks!")
    assert session.state == STATE_REVIEW
    assert turns[0]["text"] == FALLBACK_SMALL_TALK


def test_failed_plan_reports_and_returns_to_ready(tmp_path):
    engine = make_engine(tmp_path, scenario={"version": 1})  # no phrases scripted
    session = engine.create_session()
    session.attach_image(PERSON)
    turns = session.handle_message("remove the dragon tattoo")
    assert session.state == STATE_READY
    assert "couldn't" in turns[0]["text"].lower() or "failed" in turns[0]["text"].lower()
    states = [e["state"] for e in session.events() if e["type"] == "state-changed"]
    assert "Failed" in states and states[-1] == STATE_READY


def test_partial_failure_keeps_completed_results(tmp_path):
    scenario = {
        "version": 1,
        "open-vocab-seg": {"phrases": {"necklace": NECKLACE_BOX}},
        "failures": {"guided-generation": {"skip": 1, "count": "always"}},
    }
    engine = make_engine(tmp_path, scenario=scenario)
    session = engine.create_session()
    base = session.attach_image(PERSON)["ref"]
    turns = session.handle_message("dye the pants red and remove the necklace")
    assert session.state == STATE_READY
    assert "1 of 2" in turns[0]["text"]
    assert session.current_image_ref != base  # first edit survived
    assert turns[0]["imageRef"] == session.current_image_ref


def test_empty_message_rejected(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    with pytest.raises(ParameterError):
        session.handle_message("   ")


# ---------------------------------------------------------------------------
# Semantic-map caching


def test_coseg_computed_once_per_image_ref(tmp_path):
    engine = make_engine(tmp_path)
    ref = engine.store.put(PERSON, "image/png")
    engine.coseg_for(ref)
    engine.coseg_for(ref)
    assert engine.gateway.call_count("human-parsing") == 1
    assert engine.gateway.call_count("pose-parts") == 1


def test_repeated_edits_on_same_image_reuse_the_semantic_map(tmp_path):
    engine = make_engine(tmp_path, scenario={"version": 1})
    session = engine.create_session()
    session.attach_image(PERSON)
    # Both attempts fail before generation (nothing to segment), so the
    # session stays on the same base image both times.
    session.handle_message("remove the dragon tattoo")
    session.handle_message("remove the phone")
    assert engine.gateway.call_count("human-parsing") == 1
    assert engine.gateway.call_count("pose-parts") == 1


# ---------------------------------------------------------------------------
# Persistence and replay


def test_replay_reconstructs_a_session_mid_review(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    session.handle_message("dye the pants red")
    session.handle_message("nice!")
    snapshot = session.snapshot()

    fresh = make_engine(tmp_path)  # same root, empty in-memory session table
    restored = fresh.get_session(session.id)
    assert restored.state == STATE_REVIEW
    assert restored.snapshot() == snapshot


def test_replay_normalizes_a_log_cut_mid_execution(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    session.handle_message("dye the pants red")
    log_path = engine.sessions.log_path(session.id)
    lines = log_path.read_text(encoding="utf-8").splitlines(keepends=True)
    import json

    cut = next(
        i
        for i, line in enumerate(lines)
        if json.loads(line).get("state") == "Executing"
    )
    log_path.write_text("".join(lines[: cut + 1]), encoding="utf-8")

    restored = Session.replay(session.id, make_engine(tmp_path))
    assert restored.state == STATE_READY
    assert restored.current_image_ref is not None


def test_replay_unknown_session_raises(tmp_path):
    engine = make_engine(tmp_path)
    from modiste.errors import NotFoundError

    with pytest.raises(NotFoundError):
        engine.get_session("nope")


def test_events_are_persisted_in_order(tmp_path):
    engine = make_engine(tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    session.handle_message("dye the pants red")
    events = session.events()
    seqs = [e["seq"] for e in events]
    assert seqs == list(range(len(events)))
    kinds = [e["type"] for e in events]
    assert kinds[0] == "session-created"
    assert "image-attached" in kinds
    assert "plan-created" in kinds
    assert "job-executed" in kinds


def test_engine_from_config_round_trip(tmp_path):
    import json

    scenario_file = tmp_path / "scenario.json"
    scenario_file.write_text(json.dumps(BASE_SCENARIO), encoding="utf-8")
    config = {
        "storeRoot": "engine-data",
        "scenario": "scenario.json",
        "planner": {"useLlm": False, "seed": 11},
    }
    engine = Engine.from_config(config, base_dir=tmp_path)
    session = engine.create_session()
    session.attach_image(PERSON)
    session.handle_message("remove the necklace")
    assert session.state == STATE_REVIEW
    assert (tmp_path / "engine-data" / "sessions").exists()
