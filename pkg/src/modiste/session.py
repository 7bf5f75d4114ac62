"""Conversational session orchestration.

A session walks a small state machine: it waits for a photo, accepts
editing requirements, plans and executes them task by task, and then holds
the result up for review so follow-up feedback starts the next round on the
edited image. Messages that do not read as edits get a short conversational
reply instead of a pipeline run.

Every turn, state change, and executed job is appended to the session's
event log as it happens, so a session can be reconstructed from its log
alone — including one interrupted mid-flight.
"""

from __future__ import annotations

import io
import json
import queue
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from PIL import Image

from modiste.coseg import CoSegmentation
from modiste.errors import (
    BackendError,
    EngineError,
    ImageRejectedError,
    NotFoundError,
    ParameterError,
    ProtocolError,
)
from modiste.gateway import Gateway, descriptors_from_config, mock_descriptors
from modiste.mocks import MockSuite
from modiste.planner import (
    EditRequest,
    PlannerConfig,
    classify_task_fallback,
    default_coseg_builder,
    execute_plan,
    split_requirements_fallback,
)
from modiste.store import SessionStore

MIN_IMAGE_DIM = 256

STATE_AWAITING_IMAGE = "AwaitingImage"
STATE_READY = "Ready"
STATE_PLANNING = "Planning"
STATE_EXECUTING = "Executing"
STATE_REVIEW = "Review"
STATE_FAILED = "Failed"

# States a session can rest in between messages. Transient states found at
# the tail of a replayed log (an interrupted run) normalize to a stable one.
STABLE_STATES = (STATE_AWAITING_IMAGE, STATE_READY, STATE_REVIEW)

SMALL_TALK_SYSTEM = (
    "You are a friendly assistant inside a fashion photo editing tool. "
    "Answer briefly, and remind the user you can edit their photo when it "
    "fits naturally. Reply with plain text only."
)

FALLBACK_SMALL_TALK = (
    "I'm best at editing fashion photos. Attach a photo and tell me what to "
    "change — for example: 'dye the pants red' or 'remove the necklace'."
)

_MEDIA_TYPES = {"PNG": "image/png", "JPEG": "image/jpeg", "WEBP": "image/webp"}


def looks_like_edit(text: str) -> bool:
    """Trial-parse a message with the deterministic classifier.

    A message counts as an editing requirement when at least one of its
    clauses maps to an edit category; anything else is conversation.
    """
    try:
        clauses = split_requirements_fallback(text)
    except ParameterError:
        return False
    for clause in clauses:
        try:
            classify_task_fallback(clause)
            return True
        except EngineError:
            continue
    return False


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    image_ref: str | None = None

    def to_json(self) -> dict:
        return {"role": self.role, "text": self.text, "imageRef": self.image_ref}


def replay_events(events: list[dict]) -> dict:
    """Fold an event stream back into session state.

    A log that ends inside a run (its last state is transient) folds to the
    nearest stable state, keeping whatever images the interrupted run
    already produced.
    """
    state = STATE_AWAITING_IMAGE
    task_index: int | None = None
    current_ref: str | None = None
    turns: list[Turn] = []
    for event in events:
        kind = event.get("type")
        if kind == "image-attached":
            current_ref = event["ref"]
        elif kind == "user-message":
            turns.append(Turn("user", event["text"], event.get("imageRef")))
        elif kind == "assistant-message":
            turns.append(Turn("assistant", event["text"], event.get("imageRef")))
        elif kind == "state-changed":
            state = event["state"]
            task_index = event.get("taskIndex")
        elif kind == "job-executed":
            current_ref = event["record"]["resultImageRef"]
    if state not in STABLE_STATES:
        state = STATE_READY if current_ref else STATE_AWAITING_IMAGE
        task_index = None
    return {
        "state": state,
        "taskIndex": task_index,
        "currentImageRef": current_ref,
        "turns": turns,
    }


class Session:
    """One conversation: an image slot, a transcript, and a state machine."""

    def __init__(self, session_id: str, engine: "Engine"):
        self.id = session_id
        self._engine = engine
        self._log = engine.sessions.log_for(session_id)
        self._lock = threading.RLock()
        self._subscribers: list[queue.Queue] = []
        self.state = STATE_AWAITING_IMAGE
        self.task_index: int | None = None
        self.current_image_ref: str | None = None
        self.turns: list[Turn] = []

    # -- events ---------------------------------------------------------------

    def _emit(self, event: dict) -> dict:
        stored = self._log.append(event)
        for sub in list(self._subscribers):
            sub.put(stored)
        return stored

    def subscribe(self) -> queue.Queue:
        sub: queue.Queue = queue.Queue()
        self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: queue.Queue):
        if sub in self._subscribers:
            self._subscribers.remove(sub)

    def events(self) -> list[dict]:
        return self._log.read_all()

    def _set_state(self, state: str, task_index: int | None = None):
        self.state = state
        self.task_index = task_index
        event = {"type": "state-changed", "state": state}
        if task_index is not None:
            event["taskIndex"] = task_index
        self._emit(event)

    def _add_turn(self, role: str, text: str, image_ref: str | None = None) -> Turn:
        turn = Turn(role, text, image_ref)
        self.turns.append(turn)
        self._emit({"type": f"{role}-message", "text": text, "imageRef": image_ref})
        return turn

    # -- public operations ------------------------------------------------------

    def attach_image(self, data: bytes) -> dict:
        with self._lock:
            try:
                with Image.open(io.BytesIO(data)) as img:
                    width, height = img.size
                    media_type = _MEDIA_TYPES.get(img.format or "", "image/png")
            except Exception as exc:
                raise ImageRejectedError(f"the image could not be decoded: {exc}") from exc
            if min(width, height) < MIN_IMAGE_DIM:
                raise ImageRejectedError(
                    f"the image is {width}x{height}; the shorter side must be "
                    f"at least {MIN_IMAGE_DIM} pixels"
                )
            ref = self._engine.store.put(data, media_type)
            self.current_image_ref = ref
            self._emit(
                {"type": "image-attached", "ref": ref, "width": width, "height": height}
            )
            self._set_state(STATE_READY)
            return {"ref": ref, "width": width, "height": height, "state": self.state}

    def handle_message(self, text: str) -> list[dict]:
        if not text or not text.strip():
            raise ParameterError("a message needs non-empty text")
        with self._lock:
            before = len(self.turns)
            self._add_turn("user", text.strip())
            if self.state == STATE_AWAITING_IMAGE:
                if looks_like_edit(text):
                    self._add_turn(
                        "assistant",
                        "Happy to make that edit — please attach a photo first.",
                    )
                else:
                    self._small_talk()
            elif looks_like_edit(text):
                self._run_plan(text.strip())
            else:
                self._small_talk()
            return [t.to_json() for t in self.turns[before + 1 :]]

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "sessionId": self.id,
                "state": self.state,
                "taskIndex": self.task_index,
                "currentImageRef": self.current_image_ref,
                "turns": [t.to_json() for t in self.turns],
            }

    # -- behaviors ---------------------------------------------------------------

    def _small_talk(self):
        messages = [{"role": "system", "content": SMALL_TALK_SYSTEM}]
        for turn in self.turns[-6:]:
            role = "user" if turn.role == "user" else "assistant"
            messages.append({"role": role, "content": turn.text})
        try:
            reply = self._engine.gateway.call_chat(messages).strip()
        except (BackendError, ProtocolError):
            reply = FALLBACK_SMALL_TALK
        self._add_turn("assistant", reply or FALLBACK_SMALL_TALK)

    def _run_plan(self, text: str):
        self._set_state(STATE_PLANNING)
        request = EditRequest(text, self.current_image_ref)

        def on_task_start(index, task):
            self._set_state(STATE_EXECUTING, task_index=index)

        def on_task_done(execution):
            self._emit({"type": "job-executed", "record": execution.record})
            self.current_image_ref = execution.result_image_ref

        try:
            report = execute_plan(
                request,
                self._engine.gateway,
                self._engine.planner_config,
                coseg_provider=self._engine.coseg_for,
                on_task_start=on_task_start,
                on_task_done=on_task_done,
            )
        except EngineError as exc:
            self._fail(f"I couldn't plan that edit: {exc}")
            return
        self._emit({"type": "plan-created", "tasks": [t.to_json() for t in report.tasks]})
        if not report.ok:
            done = len(report.results)
            failed = report.tasks[report.failed_index - 1]
            self._emit(
                {
                    "type": "plan-failed",
                    "failedIndex": report.failed_index,
                    "error": report.error,
                }
            )
            message = (
                f"I finished {done} of {len(report.tasks)} edits, but "
                f"'{failed.raw_text}' failed: {report.error}"
                if done
                else f"I couldn't apply '{failed.raw_text}': {report.error}"
            )
            self._fail(message, image_ref=self.current_image_ref if done else None)
            return
        summary = ", ".join(t.raw_text for t in report.tasks)
        self._set_state(STATE_REVIEW)
        self._add_turn(
            "assistant",
            f"Done — applied {len(report.results)} edit(s): {summary}. "
            "Take a look and tell me what to adjust next.",
            image_ref=self.current_image_ref,
        )

    def _fail(self, message: str, image_ref: str | None = None):
        self._set_state(STATE_FAILED)
        self._add_turn("assistant", message, image_ref=image_ref)
        self._set_state(STATE_READY)

    # -- replay -------------------------------------------------------------------

    @classmethod
    def replay(cls, session_id: str, engine: "Engine") -> "Session":
        """Rebuild a session purely from its event log."""
        path = engine.sessions.log_path(session_id)
        if not path.exists():
            raise NotFoundError(f"no session {session_id!r}")
        session = cls(session_id, engine)
        folded = replay_events(session._log.read_all())
        session.state = folded["state"]
        session.task_index = folded["taskIndex"]
        session.current_image_ref = folded["currentImageRef"]
        session.turns = folded["turns"]
        return session


class Engine:
    """Owns the stores, the backend gateway, and every live session."""

    def __init__(
        self,
        root: str | Path,
        gateway: Gateway | None = None,
        planner_config: PlannerConfig | None = None,
        scenario: dict | None = None,
    ):
        self.sessions = SessionStore(root)
        self.store = self.sessions.blobs
        if gateway is None:
            suite = MockSuite(self.store, scenario)
            gateway = Gateway(mock_descriptors(), self.store, mock_suite=suite)
        self.gateway = gateway
        self.planner_config = planner_config or PlannerConfig()
        self._live: dict[str, Session] = {}
        self._coseg_cache: dict[str, CoSegmentation] = {}
        self._coseg_lock = threading.Lock()
        self._coseg_build: Callable[[str], CoSegmentation] = default_coseg_builder(
            self.gateway
        )

    @classmethod
    def from_config(cls, config: dict, base_dir: str | Path = ".") -> "Engine":
        base = Path(base_dir)
        root = Path(config.get("storeRoot", "engine-data"))
        if not root.is_absolute():
            root = base / root
        planner = config.get("planner", {})
        planner_config = PlannerConfig(
            use_llm=bool(planner.get("useLlm", True)),
            seed=planner.get("seed"),
            strength=float(planner.get("strength", 0.75)),
            guidance_scale=float(planner.get("guidanceScale", 7.5)),
        )
        scenario = None
        scenario_setting = config.get("scenario")
        if scenario_setting:
            scenario_file = Path(scenario_setting)
            if not scenario_file.is_absolute():
                scenario_file = base / scenario_file
            scenario = json.loads(scenario_file.read_text(encoding="utf-8"))
        if not config.get("backends"):
            return cls(root, planner_config=planner_config, scenario=scenario)
        blobs = SessionStore(root).blobs
        descriptors = descriptors_from_config(config)
        suite = None
        if any(d.mode == "mock" for d in descriptors):
            suite = MockSuite(blobs, scenario)
        gateway = Gateway(descriptors, blobs, mock_suite=suite)
        return cls(root, gateway=gateway, planner_config=planner_config)

    # -- semantic map cache ------------------------------------------------------

    def coseg_for(self, image_ref: str) -> CoSegmentation:
        """Fused semantic map for an image ref, computed at most once."""
        with self._coseg_lock:
            cached = self._coseg_cache.get(image_ref)
        if cached is not None:
            return cached
        built = self._coseg_build(image_ref)
        with self._coseg_lock:
            return self._coseg_cache.setdefault(image_ref, built)

    # -- session management --------------------------------------------------------

    def create_session(self) -> Session:
        session_id = uuid.uuid4().hex[:16]
        session = Session(session_id, self)
        session._emit({"type": "session-created", "sessionId": session_id})
        session._emit({"type": "state-changed", "state": STATE_AWAITING_IMAGE})
        self._live[session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self._live.get(session_id)
        if session is not None:
            return session
        session = Session.replay(session_id, self)
        self._live[session_id] = session
        return session

    def session_ids(self) -> list[str]:
        return self.sessions.session_ids()

    def close(self):
        self.gateway.close()
