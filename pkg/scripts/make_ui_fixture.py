"""Regenerate the frontend's session fixture from a real engine run.

Drives a scripted mock session (small talk, image upload, a two-task edit)
and captures the exact event log and transcript snapshot the HTTP API would
serve. The web client's fold logic is tested against this file, so transcript
parity is checked against genuine server output rather than hand-written
shapes.

Usage:
    python3 scripts/make_ui_fixture.py
"""

import json
import tempfile
from pathlib import Path

from modiste.mocks import synthetic_person_png
from modiste.planner import PlannerConfig
from modiste.session import Engine

OUT = Path(__file__).resolve().parent.parent / "frontend" / "testdata" / "session-fixture.json"

SCENARIO = {
    "version": 1,
    "open-vocab-seg": {"phrases": {"necklace": [0.42, 0.17, 0.58, 0.24]}},
    "chat": {
        "responses": [
            {"contains": "hello", "text": "Hi! Attach a photo and tell me what to change."}
        ],
        "default": None,
    },
}


def main():
    with tempfile.TemporaryDirectory() as root:
        engine = Engine(
            Path(root) / "data",
            planner_config=PlannerConfig(use_llm=False, seed=23),
            scenario=SCENARIO,
        )
        session = engine.create_session()
        session.handle_message("hello")
        session.attach_image(synthetic_person_png(256, 384))
        message = session.handle_message(
            "replace the vest with a t-shirt and remove the necklace"
        )
        fixture = {
            "events": session.events(),
            "transcript": session.snapshot(),
            "messageResponse": {
                "turns": message,
                "state": session.state,
                "currentImageRef": session.current_image_ref,
            },
        }
        engine.close()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} ({len(fixture['events'])} events)")


if __name__ == "__main__":
    main()
