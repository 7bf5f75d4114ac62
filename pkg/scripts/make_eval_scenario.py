#!/usr/bin/env python3
"""Build the scripted chat scenario that drives `engine eval` offline.

For every corpus case this writes a digest-keyed chat response: the exact
splitting answer for the case text, and (for single-clause cases) the exact
classification answer for the clause. Responses are keyed by the gateway's
logical request digest, so the scripted backend only answers the precise
requests the evaluation issues — anything else fails loudly.

A small fixed miss set answers incorrectly on purpose, keeping the scripted
backend's scores below saturation and the report's failure list non-empty.
Both misses stay well-formed, so they score as wrong answers, not as
format retries.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from modiste.evalharness import load_corpus
from modiste.gateway import request_digest
from modiste.planner import classification_messages, splitting_messages

SPLIT_MISSES = {"dual-007", "dual-014", "multi-022"}
CLASSIFY_MISSES = {"single-050"}


def split_answer(case) -> str:
    clauses = list(case.clauses)
    if case.id in SPLIT_MISSES and len(clauses) >= 2:
        clauses = [f"{clauses[0]} and {clauses[1]}", *clauses[2:]]
    return " | ".join(clauses)


def classify_answer(case) -> str:
    category = case.categories[0]
    source = case.sources[0] or "-"
    target = case.targets[0] or "-"
    if case.id in CLASSIFY_MISSES:
        category, source, target = "Replacement", source if source != "-" else "item", "item"
    return f"{category} | {source} | {target}"


def chat_digest(messages) -> str:
    return request_digest("chat", {"messages": messages})


def build_scenario(corpus_path: Path) -> dict:
    responses = []
    for case in load_corpus(corpus_path):
        responses.append(
            {
                "digest": chat_digest(splitting_messages(case.text)),
                "text": split_answer(case),
                "note": f"split {case.id}",
            }
        )
        if case.group == "single":
            responses.append(
                {
                    "digest": chat_digest(classification_messages(case.clauses[0])),
                    "text": classify_answer(case),
                    "note": f"classify {case.id}",
                }
            )
    return {"version": 1, "chat": {"responses": responses, "default": None}}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    data_dir = Path(__file__).resolve().parents[1] / "src/modiste/data"
    parser.add_argument("--corpus", type=Path, default=data_dir / "requirements_corpus.jsonl")
    parser.add_argument("--out", type=Path, default=data_dir / "eval_scenario.json")
    args = parser.parse_args()
    scenario = build_scenario(args.corpus)
    args.out.write_text(
        json.dumps(scenario, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(scenario['chat']['responses'])} scripted responses to {args.out}")


if __name__ == "__main__":
    main()
