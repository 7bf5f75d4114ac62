"""Accuracy evaluation for requirement splitting and clause classification.

The corpus is JSON lines: each case carries the requirement text, its gold
clause decomposition, and per-clause categories, grouped by clause count
(single / dual / multi). Splitting is scored by ordered clause equality
under token-set normalization; classification is scored on the
single-clause cases by category match. A backend failure on a case counts
as that case failing — never as a skipped case.
"""

from __future__ import annotations

import json
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from modiste.automask import CATEGORIES, CATEGORY_ADDITION, CATEGORY_REMOVAL
from modiste.errors import CorpusError, EngineError
from modiste.gateway import Gateway, mock_descriptors
from modiste.mocks import MockSuite
from modiste.planner import (
    classify_task_fallback,
    classify_task_llm,
    split_requirements_fallback,
    split_requirements_llm,
)
from modiste.store import BlobStore
from modiste import resources

GROUPS = ("single", "dual", "multi")

_GROUP_CLAUSES = {"single": (1, 1), "dual": (2, 2), "multi": (3, 12)}


@dataclass(frozen=True)
class RequirementCase:
    id: str
    group: str
    text: str
    clauses: tuple[str, ...]
    categories: tuple[str, ...]
    sources: tuple[str | None, ...] = ()
    targets: tuple[str | None, ...] = ()


def _require(condition: bool, message: str, line: int):
    if not condition:
        raise CorpusError(message, line=line)


def load_corpus(path: str | Path) -> list[RequirementCase]:
    """Parse a corpus file, pinning every schema violation to its line."""
    cases: list[RequirementCase] = []
    seen_ids: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", line=line_no) from None
        _require(isinstance(obj, dict), "case must be a JSON object", line_no)
        case_id = obj.get("id")
        _require(isinstance(case_id, str) and bool(case_id), "case needs an id", line_no)
        _require(case_id not in seen_ids, f"duplicate id {case_id!r}", line_no)
        seen_ids.add(case_id)
        group = obj.get("group")
        _require(group in GROUPS, f"group must be one of {GROUPS}", line_no)
        case_text = obj.get("text")
        _require(
            isinstance(case_text, str) and bool(case_text.strip()),
            "case needs requirement text",
            line_no,
        )
        clauses = obj.get("clauses")
        _require(
            isinstance(clauses, list)
            and clauses
            and all(isinstance(c, str) and c.strip() for c in clauses),
            "clauses must be a non-empty list of non-empty strings",
            line_no,
        )
        low, high = _GROUP_CLAUSES[group]
        _require(
            low <= len(clauses) <= high,
            f"a {group} case needs between {low} and {high} clauses, got {len(clauses)}",
            line_no,
        )
        categories = obj.get("categories")
        _require(
            isinstance(categories, list) and len(categories) == len(clauses),
            "categories must align one-to-one with clauses",
            line_no,
        )
        _require(
            all(c in CATEGORIES for c in categories),
            f"categories must be drawn from {sorted(CATEGORIES)}",
            line_no,
        )
        sources = obj.get("sources", [None] * len(clauses))
        targets = obj.get("targets", [None] * len(clauses))
        for name, values in (("sources", sources), ("targets", targets)):
            _require(
                isinstance(values, list)
                and len(values) == len(clauses)
                and all(v is None or (isinstance(v, str) and v.strip()) for v in values),
                f"{name} must align with clauses and hold strings or nulls",
                line_no,
            )
        for category, source, target in zip(categories, sources, targets):
            if source is not None:
                _require(
                    category != CATEGORY_ADDITION,
                    "an addition clause cannot carry a source",
                    line_no,
                )
            if target is not None:
                _require(
                    category != CATEGORY_REMOVAL,
                    "a removal clause cannot carry a target",
                    line_no,
                )
        cases.append(
            RequirementCase(
                id=case_id,
                group=group,
                text=case_text.strip(),
                clauses=tuple(c.strip() for c in clauses),
                categories=tuple(categories),
                sources=tuple(sources),
                targets=tuple(targets),
            )
        )
    if not cases:
        raise CorpusError("the corpus holds no cases")
    return cases


# ---------------------------------------------------------------------------
# Scoring


def clause_tokens(clause: str) -> frozenset[str]:
    return frozenset(t for t in re.findall(r"[\w'-]+", clause.lower()))


def clauses_match(predicted: Sequence[str], gold: Sequence[str]) -> bool:
    """Ordered clause equality under token-set normalization."""
    if len(predicted) != len(gold):
        return False
    return all(clause_tokens(p) == clause_tokens(g) for p, g in zip(predicted, gold))


@dataclass(frozen=True)
class GroupScore:
    cases: int
    correct: int

    @property
    def accuracy(self) -> float:
        return round(100.0 * self.correct / self.cases, 2) if self.cases else 0.0


@dataclass(frozen=True)
class EvalReport:
    task: str
    backend: str
    groups: dict[str, GroupScore]
    failed_cases: tuple[str, ...]

    @property
    def total_cases(self) -> int:
        return sum(score.cases for score in self.groups.values())

    @property
    def total_correct(self) -> int:
        return sum(score.correct for score in self.groups.values())

    @property
    def weighted_accuracy(self) -> float:
        if not self.total_cases:
            return 0.0
        return round(100.0 * self.total_correct / self.total_cases, 2)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "backend": self.backend,
            "groups": {
                name: {
                    "cases": score.cases,
                    "correct": score.correct,
                    "accuracy": score.accuracy,
                }
                for name, score in self.groups.items()
            },
            "weightedAccuracy": self.weighted_accuracy,
            "failedCases": list(self.failed_cases),
        }


def weighted_average(accuracies: Mapping[str, float], sizes: Mapping[str, int]) -> float:
    """Size-weighted mean of per-group accuracies, to two decimals."""
    total = sum(sizes[g] for g in accuracies)
    if not total:
        return 0.0
    return round(sum(accuracies[g] * sizes[g] for g in accuracies) / total, 2)


def _score(
    cases: Sequence[RequirementCase],
    task: str,
    backend_label: str,
    case_passes: Callable[[RequirementCase], bool],
) -> EvalReport:
    tallies = {g: [0, 0] for g in GROUPS if any(c.group == g for c in cases)}
    failed: list[str] = []
    for case in cases:
        tallies[case.group][0] += 1
        try:
            ok = case_passes(case)
        except EngineError:
            ok = False
        if ok:
            tallies[case.group][1] += 1
        else:
            failed.append(case.id)
    return EvalReport(
        task=task,
        backend=backend_label,
        groups={g: GroupScore(cases=n, correct=k) for g, (n, k) in tallies.items()},
        failed_cases=tuple(failed),
    )


def score_splitting(
    cases: Sequence[RequirementCase],
    split_fn: Callable[[str], list[str]],
    backend_label: str = "custom",
) -> EvalReport:
    return _score(
        cases,
        "split",
        backend_label,
        lambda case: clauses_match(split_fn(case.text), case.clauses),
    )


def score_classification(
    cases: Sequence[RequirementCase],
    classify_fn: Callable[[str], object],
    backend_label: str = "custom",
) -> EvalReport:
    singles = [c for c in cases if c.group == "single"]
    return _score(
        singles,
        "classify",
        backend_label,
        lambda case: classify_fn(case.clauses[0]).category == case.categories[0],
    )


# ---------------------------------------------------------------------------
# Report rendering


def emit_report(report: EvalReport, fmt: str = "table") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True)
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    rows = [("group", "cases", "correct", "accuracy")]
    for group in GROUPS:
        score = report.groups.get(group)
        if score is None:
            continue
        rows.append((group, str(score.cases), str(score.correct), f"{score.accuracy:.2f}"))
    rows.append(
        (
            "weighted",
            str(report.total_cases),
            str(report.total_correct),
            f"{report.weighted_accuracy:.2f}",
        )
    )
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = [f"task: {report.task}    backend: {report.backend}"]
    for index, row in enumerate(rows):
        lines.append(
            "  ".join(
                cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
                for i, cell in enumerate(row)
            )
        )
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Backend selection


class EvalBackend:
    """The splitter/classifier pair a run is scored against."""

    def __init__(self, label: str, split_fn, classify_fn, closer=None):
        self.label = label
        self.split = split_fn
        self.classify = classify_fn
        self._closer = closer

    def close(self):
        if self._closer is not None:
            self._closer()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def eval_backend(choice: str, base_dir: str | Path = ".") -> EvalBackend:
    """Resolve an eval backend name.

    `fallback` scores the deterministic splitter and keyword classifier;
    `mock` scores the unscripted language-model path (every call fails, so
    it measures the harness, not the models); a path names a scenario file
    whose scripted answers drive the language-model path.
    """
    if choice == "fallback":
        return EvalBackend("fallback", split_requirements_fallback, classify_task_fallback)
    if choice == "mock":
        scenario = None
        label = "mock"
    else:
        scenario_file = Path(choice)
        if not scenario_file.is_absolute():
            scenario_file = Path(base_dir) / scenario_file
        scenario = json.loads(scenario_file.read_text(encoding="utf-8"))
        label = f"scripted:{scenario_file.name}"
    tmp = tempfile.TemporaryDirectory(prefix="modiste-eval-")
    gateway = Gateway(
        mock_descriptors(max_retries=0),
        BlobStore(tmp.name),
        mock_suite=MockSuite(BlobStore(tmp.name), scenario),
    )
    return EvalBackend(
        label,
        lambda text: split_requirements_llm(text, gateway.call_chat),
        lambda clause: classify_task_llm(clause, gateway.call_chat),
        closer=lambda: (gateway.close(), tmp.cleanup()),
    )


def default_corpus_path() -> Path:
    return Path(str(resources.corpus_path()))


def default_scenario_path() -> Path:
    return Path(str(resources.eval_scenario_path()))
