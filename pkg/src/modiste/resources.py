"""Loaders for the data files shipped with the package.

Vocabularies, fusion rules, synonyms, derived-semantic recipes, and
occlusion rules are all data, not code, so alternative upstream models can
be mapped in by swapping files.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


def _load(name: str):
    return json.loads(resources.files("modiste").joinpath("data", name).read_text())


@lru_cache(maxsize=None)
def vocabularies() -> dict:
    return _load("vocabularies.json")


def parsing_vocabulary() -> tuple[str, ...]:
    return tuple(vocabularies()["parsing"])


def pose_vocabulary() -> tuple[str, ...]:
    return tuple(vocabularies()["pose"])


def coseg_vocabulary(include_derived: bool = True) -> tuple[str, ...]:
    v = vocabularies()
    base = tuple(v["coseg"])
    return base + tuple(v["coseg_derived"]) if include_derived else base


@lru_cache(maxsize=None)
def synonym_table() -> dict[str, str]:
    return dict(_load("synonyms.json")["terms"])


@lru_cache(maxsize=None)
def fusion_rules_data() -> dict:
    return _load("fusion_rules.json")


@lru_cache(maxsize=None)
def derived_semantics_data() -> list[dict]:
    return _load("derived_semantics.json")


@lru_cache(maxsize=None)
def occlusion_rules_data() -> list[dict]:
    return _load("occlusion_rules.json")


def corpus_path():
    return resources.files("modiste").joinpath("data", "requirements_corpus.jsonl")


def eval_scenario_path():
    return resources.files("modiste").joinpath("data", "eval_scenario.json")


def demo_scenario_path():
    return resources.files("modiste").joinpath("data", "demo_scenario.json")
