"""Corpus loading, scoring rules, report rendering, and backend selection."""

import json

import pytest

from modiste.errors import BackendError, CorpusError
from modiste.evalharness import (
    EvalReport,
    GroupScore,
    clause_tokens,
    clauses_match,
    default_corpus_path,
    default_scenario_path,
    emit_report,
    eval_backend,
    load_corpus,
    score_classification,
    score_splitting,
    weighted_average,
)


def write_corpus(tmp_path, lines):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


GOOD_CASE = {
    "id": "single-001",
    "group": "single",
    "text": "remove the hat",
    "clauses": ["remove the hat"],
    "categories": ["Removal"],
    "sources": ["hat"],
    "targets": [None],
}


def case_line(**overrides):
    case = dict(GOOD_CASE)
    case.update(overrides)
    return json.dumps(case)


# ---------------------------------------------------------------------------
# Corpus loading


def test_shipped_corpus_loads_with_the_published_group_sizes():
    cases = load_corpus(default_corpus_path())
    groups = {}
    for case in cases:
        groups[case.group] = groups.get(case.group, 0) + 1
    assert groups == {"single": 100, "dual": 70, "multi": 50}
    assert len({c.id for c in cases}) == 220


def test_invalid_json_reports_its_line(tmp_path):
    path = write_corpus(tmp_path, [case_line(), "{not json"])
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    assert err.value.line == 2


def test_duplicate_id_rejected(tmp_path):
    path = write_corpus(tmp_path, [case_line(), case_line()])
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    assert err.value.line == 2
    assert "duplicate" in str(err.value)


def test_unknown_group_rejected(tmp_path):
    path = write_corpus(tmp_path, [case_line(group="quintuple")])
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_clause_count_must_match_group(tmp_path):
    path = write_corpus(
        tmp_path,
        [case_line(group="dual", clauses=["remove the hat"], categories=["Removal"])],
    )
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    assert "dual" in str(err.value)


def test_categories_must_align_with_clauses(tmp_path):
    path = write_corpus(tmp_path, [case_line(categories=["Removal", "Addition"])])
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_unknown_category_rejected(tmp_path):
    path = write_corpus(tmp_path, [case_line(categories=["Adjustment"])])
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_removal_clause_cannot_carry_target(tmp_path):
    path = write_corpus(tmp_path, [case_line(targets=["hat"])])
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_addition_clause_cannot_carry_source(tmp_path):
    path = write_corpus(
        tmp_path,
        [
            case_line(
                text="add a hat",
                clauses=["add a hat"],
                categories=["Addition"],
                sources=["hat"],
                targets=["hat"],
            )
        ],
    )
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_empty_corpus_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        load_corpus(path)


# ---------------------------------------------------------------------------
# Matching rules


def test_clause_matching_ignores_case_and_punctuation():
    assert clause_tokens("Remove the hat!") == clause_tokens("remove the hat")
    assert clauses_match(["Remove the Hat."], ["remove the hat"])


def test_clause_matching_is_order_sensitive():
    gold = ["remove the hat", "dye the pants red"]
    assert clauses_match(["remove the hat", "dye the pants red"], gold)
    assert not clauses_match(["dye the pants red", "remove the hat"], gold)


def test_clause_matching_requires_equal_length():
    assert not clauses_match(["remove the hat"], ["remove the hat", "add a scarf"])


# ---------------------------------------------------------------------------
# Aggregation


@pytest.mark.parametrize(
    "accuracies, expected",
    [
        ((73.00, 87.14, 78.00), 78.64),
        ((10.00, 64.29, 10.00), 27.27),
        ((86.00, 94.29, 88.00), 89.09),
        ((70.00, 81.43, 78.00), 75.45),
        ((75.00, 65.71, 62.00), 69.09),
        ((87.00, 81.43, 86.00), 85.00),
    ],
)
def test_weighted_average_matches_published_row_averages(accuracies, expected):
    groups = dict(zip(("single", "dual", "multi"), accuracies))
    sizes = {"single": 100, "dual": 70, "multi": 50}
    assert weighted_average(groups, sizes) == pytest.approx(expected, abs=0.01)


def test_report_weighted_accuracy_uses_case_counts():
    report = EvalReport(
        task="split",
        backend="x",
        groups={
            "single": GroupScore(100, 73),
            "dual": GroupScore(70, 61),
            "multi": GroupScore(50, 39),
        },
        failed_cases=(),
    )
    assert report.weighted_accuracy == pytest.approx(78.64, abs=0.01)


# ---------------------------------------------------------------------------
# Scoring semantics


def test_perfect_splitter_scores_hundred():
    cases = load_corpus(default_corpus_path())
    by_text = {c.text: list(c.clauses) for c in cases}
    report = score_splitting(cases, lambda text: by_text[text], "oracle")
    assert report.weighted_accuracy == 100.0
    assert report.failed_cases == ()


def test_backend_failure_counts_as_case_failure():
    cases = load_corpus(default_corpus_path())[:10]

    def flaky(text):
        if "remove" in text:
            raise BackendError("chat", "offline")
        return [text]

    report = score_splitting(cases, flaky, "flaky")
    assert len(report.failed_cases) >= 1
    assert report.total_cases == 10


def test_fallback_backend_scores_are_pinned():
    cases = load_corpus(default_corpus_path())
    with eval_backend("fallback") as backend:
        split = score_splitting(cases, backend.split, backend.label)
        classify = score_classification(cases, backend.classify, backend.label)
    assert split.groups["single"].accuracy == 100.00
    assert split.groups["dual"].accuracy == 85.71
    assert split.groups["multi"].accuracy == 80.00
    assert split.weighted_accuracy == 90.91
    assert classify.weighted_accuracy == 92.00


def test_scripted_backend_scores_and_misses_are_pinned():
    cases = load_corpus(default_corpus_path())
    with eval_backend(str(default_scenario_path())) as backend:
        split = score_splitting(cases, backend.split, backend.label)
        classify = score_classification(cases, backend.classify, backend.label)
    assert split.weighted_accuracy == 98.64
    assert set(split.failed_cases) == {"dual-007", "dual-014", "multi-022"}
    assert classify.weighted_accuracy == 99.00
    assert classify.failed_cases == ("single-050",)


def test_scripted_evaluation_is_deterministic_across_runs():
    cases = load_corpus(default_corpus_path())
    reports = []
    for _ in range(3):
        with eval_backend(str(default_scenario_path())) as backend:
            reports.append(score_splitting(cases, backend.split, backend.label).to_json())
    assert reports[0] == reports[1] == reports[2]


def test_unscripted_mock_backend_fails_every_case():
    cases = load_corpus(default_corpus_path())[:5]
    with eval_backend("mock") as backend:
        report = score_splitting(cases, backend.split, backend.label)
    assert report.total_correct == 0


# ---------------------------------------------------------------------------
# Rendering


def test_json_report_round_trips():
    report = EvalReport(
        task="split",
        backend="fallback",
        groups={"single": GroupScore(10, 9)},
        failed_cases=("single-003",),
    )
    parsed = json.loads(emit_report(report, "json"))
    assert parsed["groups"]["single"]["accuracy"] == 90.0
    assert parsed["weightedAccuracy"] == 90.0
    assert parsed["failedCases"] == ["single-003"]


def test_table_report_has_weighted_row():
    report = EvalReport(
        task="classify",
        backend="fallback",
        groups={"single": GroupScore(100, 92)},
        failed_cases=(),
    )
    table = emit_report(report, "table")
    assert "weighted" in table
    assert "92.00" in table


def test_unknown_format_rejected():
    report = EvalReport("split", "x", {"single": GroupScore(1, 1)}, ())
    with pytest.raises(ValueError):
        emit_report(report, "yaml")
