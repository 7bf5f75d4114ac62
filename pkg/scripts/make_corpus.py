#!/usr/bin/env python3
"""Author the requirement corpus used by `engine eval`.

The corpus is generated from template banks by deterministic round-robin
(no randomness), so re-running this script reproduces the shipped file byte
for byte. It holds 220 cases: 100 single-clause, 70 dual-clause, and 50
multi-clause requirements, each with gold clauses, per-clause categories,
and per-clause source/target descriptions.

A controlled share of cases is deliberately hard for the deterministic
splitter and keyword classifier (passive phrasing, elided verbs), so scored
backends separate honestly instead of saturating.
"""

from __future__ import annotations

import argparse
import json
from itertools import cycle
from pathlib import Path

REMOVABLES = [
    "necklace", "hat", "glasses", "scarf", "belt", "watch",
    "bag", "earrings", "bracelet", "tie", "vest", "coat",
]
GARMENTS = [
    "pants", "skirt", "dress", "coat", "jacket", "top",
    "t-shirt", "vest", "sweater", "blouse", "hat", "shoes",
]
WEARABLES = [
    "hat", "scarf", "necklace", "jacket", "belt", "watch",
    "beret", "cardigan", "tie", "bracelet",
]
COLORS = [
    "red", "blue", "green", "black", "white", "yellow",
    "pink", "purple", "navy", "beige", "brown", "gray",
]
REPLACEMENT_PAIRS = [
    ("vest", "t-shirt"), ("skirt", "jeans"), ("dress", "gown"),
    ("coat", "blazer"), ("t-shirt", "hoodie"), ("pants", "shorts"),
    ("sweater", "cardigan"), ("blouse", "shirt"), ("hat", "beret"),
    ("jacket", "windbreaker"), ("boots", "sandals"), ("top", "tunic"),
]

REMOVAL_TEMPLATES = [
    "remove the {g}",
    "take off the {g}",
    "get rid of the {g}",
    "delete the {g}",
    "please remove the {g}",
]
ADDITION_TEMPLATES = [
    "add a {c} {g}",
    "wear a {g}",
    "put on a {c} {g}",
    "give her a {g}",
    "add a {g}",
]
RECOLOR_TEMPLATES = [
    "dye the {g} {c}",
    "change the color of the {g} to {c}",
    "make the {g} {c}",
    "turn the {g} {c}",
    "recolor the {g} to {c}",
]
REPLACEMENT_TEMPLATES = [
    "replace the {a} with a {b}",
    "swap the {a} for a {b}",
    "change the {a} into a {c} {b}",
    "turn the {a} into a {b}",
    "switch the {a} to a {b}",
]

# Hard phrasings: split into one clause fine, but the keyword classifier
# cannot map them. A language-model backend can.
SINGLE_TRAPS = [
    ("the {g} should be removed", "Removal", "{g}", None),
    ("the {g} has to go", "Removal", "{g}", None),
    ("a {g} would look nice on her", "Addition", None, "{g}"),
    ("she needs a {c} {g} with this outfit", "Addition", None, "{c} {g}"),
    ("the {g} would look better in {c}", "Recoloring", "{g}", "{c} {g}"),
    ("i think the {g} should be {c} instead", "Recoloring", "{g}", "{c} {g}"),
    ("a {b} would work better than the {a}", "Replacement", "{a}", "{b}"),
    ("the {a} should really be a {b}", "Replacement", "{a}", "{b}"),
]


def removal_case(index: int) -> dict:
    template = REMOVAL_TEMPLATES[index % len(REMOVAL_TEMPLATES)]
    item = REMOVABLES[index % len(REMOVABLES)]
    clause = template.replace("please ", "").format(g=item)
    return {
        "text": template.format(g=item),
        "clause": clause,
        "category": "Removal",
        "source": item,
        "target": None,
    }


def addition_case(index: int) -> dict:
    template = ADDITION_TEMPLATES[index % len(ADDITION_TEMPLATES)]
    item = WEARABLES[index % len(WEARABLES)]
    color = COLORS[index % len(COLORS)]
    text = template.format(g=item, c=color)
    target = f"{color} {item}" if "{c}" in template else item
    return {
        "text": text,
        "clause": text,
        "category": "Addition",
        "source": None,
        "target": target,
    }


def recolor_case(index: int) -> dict:
    template = RECOLOR_TEMPLATES[index % len(RECOLOR_TEMPLATES)]
    item = GARMENTS[index % len(GARMENTS)]
    color = COLORS[(index * 5 + 2) % len(COLORS)]
    text = template.format(g=item, c=color)
    return {
        "text": text,
        "clause": text,
        "category": "Recoloring",
        "source": item,
        "target": f"{color} {item}",
    }


def replacement_case(index: int) -> dict:
    template = REPLACEMENT_TEMPLATES[index % len(REPLACEMENT_TEMPLATES)]
    old, new = REPLACEMENT_PAIRS[index % len(REPLACEMENT_PAIRS)]
    color = COLORS[(index * 7 + 1) % len(COLORS)]
    text = template.format(a=old, b=new, c=color)
    target = f"{color} {new}" if "{c}" in template else new
    return {
        "text": text,
        "clause": text,
        "category": "Replacement",
        "source": old,
        "target": target,
    }


def trap_single(index: int) -> dict:
    template, category, source, target = SINGLE_TRAPS[index % len(SINGLE_TRAPS)]
    item = REMOVABLES[(index * 3 + 1) % len(REMOVABLES)]
    color = COLORS[(index * 3 + 2) % len(COLORS)]
    old, new = REPLACEMENT_PAIRS[(index * 3) % len(REPLACEMENT_PAIRS)]
    fields = {"g": item, "c": color, "a": old, "b": new}
    fill = lambda value: value.format(**fields) if value else None  # noqa: E731
    return {
        "text": template.format(**fields),
        "clause": template.format(**fields),
        "category": category,
        "source": fill(source),
        "target": fill(target),
    }


def build_singles() -> list[dict]:
    builders = [removal_case, addition_case, recolor_case, replacement_case]
    cases = []
    for maker in builders:
        for i in range(23):
            cases.append(maker(i))
    for i in range(8):
        cases.append(trap_single(i))
    assert len(cases) == 100
    return cases


def ellipsis_recolor(index: int) -> dict:
    """Two recolors sharing one elided verb — splittable only semantically."""
    g1 = GARMENTS[index % len(GARMENTS)]
    g2 = GARMENTS[(index + 5) % len(GARMENTS)]
    c1 = COLORS[(index * 2) % len(COLORS)]
    c2 = COLORS[(index * 2 + 7) % len(COLORS)]
    return {
        "text": f"change the color of the {g1} to {c1} and the {g2} to {c2}",
        "clauses": [
            f"change the color of the {g1} to {c1}",
            f"change the color of the {g2} to {c2}",
        ],
        "categories": ["Recoloring", "Recoloring"],
        "sources": [g1, g2],
        "targets": [f"{c1} {g1}", f"{c2} {g2}"],
    }


def compose(parts: list[dict], text: str) -> dict:
    return {
        "text": text,
        "clauses": [p["clause"] for p in parts],
        "categories": [p["category"] for p in parts],
        "sources": [p["source"] for p in parts],
        "targets": [p["target"] for p in parts],
    }


def build_duals(singles_pool: list[dict]) -> list[dict]:
    n = len(singles_pool)
    picks = cycle(range(n))
    cases = []
    for i in range(60):
        a = singles_pool[next(picks)]
        b = singles_pool[(i * 13 + 7) % n]
        if b["clause"] == a["clause"]:
            b = singles_pool[(i * 13 + 8) % n]
        if i % 4 == 0:
            text = f"{a['text']}, then {b['text']}"
        elif i % 4 == 1:
            text = f"please {a['text']} and {b['text']}"
        else:
            text = f"{a['text']} and {b['text']}"
        cases.append(compose([a, b], text))
    for i in range(10):
        cases.append(ellipsis_recolor(i))
    assert len(cases) == 70
    return cases


def build_multis(singles_pool: list[dict]) -> list[dict]:
    n = len(singles_pool)
    cases = []
    for i in range(25):
        parts = [singles_pool[(i * 3 + k * 17 + 5) % n] for k in range(3)]
        text = f"{parts[0]['text']}, {parts[1]['text']} and {parts[2]['text']}"
        cases.append(compose(parts, text))
    for i in range(15):
        parts = [singles_pool[(i * 5 + k * 23 + 11) % n] for k in range(4)]
        text = (
            f"{parts[0]['text']}, {parts[1]['text']}, "
            f"{parts[2]['text']} and {parts[3]['text']}"
        )
        cases.append(compose(parts, text))
    for i in range(10):
        lead = singles_pool[(i * 11 + 3) % n]
        tail = ellipsis_recolor(i + 10)
        cases.append(
            {
                "text": f"{lead['text']}, {tail['text']}",
                "clauses": [lead["clause"], *tail["clauses"]],
                "categories": [lead["category"], *tail["categories"]],
                "sources": [lead["source"], *tail["sources"]],
                "targets": [lead["target"], *tail["targets"]],
            }
        )
    assert len(cases) == 50
    return cases


def build_corpus() -> list[dict]:
    singles = build_singles()
    easy_pool = singles[:92]  # composition draws verb-initial phrasings only
    cases = []
    for i, single in enumerate(singles):
        cases.append(
            {
                "id": f"single-{i + 1:03d}",
                "group": "single",
                "text": single["text"],
                "clauses": [single["clause"]],
                "categories": [single["category"]],
                "sources": [single["source"]],
                "targets": [single["target"]],
            }
        )
    for i, dual in enumerate(build_duals(easy_pool)):
        cases.append({"id": f"dual-{i + 1:03d}", "group": "dual", **dual})
    for i, multi in enumerate(build_multis(easy_pool)):
        cases.append({"id": f"multi-{i + 1:03d}", "group": "multi", **multi})
    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=Path(__file__).resolve().parents[1]
        / "src/modiste/data/requirements_corpus.jsonl",
        type=Path,
    )
    args = parser.parse_args()
    cases = build_corpus()
    lines = [json.dumps(case, sort_keys=True, ensure_ascii=True) for case in cases]
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    groups = {}
    for case in cases:
        groups[case["group"]] = groups.get(case["group"], 0) + 1
    print(f"wrote {len(cases)} cases to {args.out} ({groups})")


if __name__ == "__main__":
    main()
