"""Rubric validation, quality-report arithmetic, distribution
comparison, and gap detection against the published-results fixture."""

import pytest

from newsimpact import evaluation
from newsimpact.evaluation import (
    AnnotationRecord,
    adjudicate,
    aggregate_report,
    compare_distributions,
    render_reports,
    validate_annotation,
)
from newsimpact.generation import GeneratedImpact
from newsimpact.taxonomy import CategoryAssignment

def within(value: float, printed: float, tol: float = 0.01) -> bool:
    return abs(value - printed) <= tol + 1e-9


FULL_SCORES = {
    "validation": 1,
    "coherence_complete_sentence": 1,
    "coherence_multiple_impacts": 0,
    "granularity": 2,
    "relevance_stakeholders": 3,
    "relevance_core_functionality": 3,
    "plausibility": 3,
}


class TestValidateAnnotation:
    def test_full_record_accepted(self):
        record = AnnotationRecord("g1", "ann1", dict(FULL_SCORES))
        assert validate_annotation(record) == []

    def test_gating_rule_blocks_extra_scores(self):
        record = AnnotationRecord("g1", "ann1", {"validation": 0, "plausibility": 3})
        violations = validate_annotation(record)
        assert any("validation=0" in v for v in violations)

    def test_not_an_impact_with_only_validation_accepted(self):
        record = AnnotationRecord("g1", "ann1", {"validation": 0})
        assert validate_annotation(record) == []

    def test_out_of_scale_value(self):
        scores = dict(FULL_SCORES, granularity=4)
        violations = validate_annotation(AnnotationRecord("g1", "a", scores))
        assert any("granularity=4" in v for v in violations)

    def test_validated_record_missing_score(self):
        scores = dict(FULL_SCORES)
        del scores["plausibility"]
        violations = validate_annotation(AnnotationRecord("g1", "a", scores))
        assert any("plausibility" in v for v in violations)

    def test_unknown_criterion(self):
        scores = dict(FULL_SCORES, novelty=3)
        violations = validate_annotation(AnnotationRecord("g1", "a", scores))
        assert any("novelty" in v for v in violations)


# Raw rating counts per model from the published evaluation:
# (total generations, validated count, per-criterion rating counts).
TABLE_COUNTS = {
    "GPT-4": {
        "total": 514,
        "validation": {0: 0, 1: 514},
        "coherence_complete_sentence": {0: 0, 1: 514},
        "coherence_multiple_impacts": {0: 497, 1: 17},
        "granularity": {1: 0, 2: 407, 3: 107},
        "relevance_stakeholders": {1: 2, 2: 29, 3: 483},
        "relevance_core_functionality": {1: 13, 2: 114, 3: 387},
        "plausibility": {1: 0, 2: 3, 3: 511},
    },
    "Mistral-7B-Instruct": {
        "total": 514,
        "validation": {0: 0, 1: 514},
        "coherence_complete_sentence": {0: 36, 1: 478},
        "coherence_multiple_impacts": {0: 462, 1: 52},
        "granularity": {1: 1, 2: 320, 3: 193},
        "relevance_stakeholders": {1: 24, 2: 74, 3: 416},
        "relevance_core_functionality": {1: 22, 2: 83, 3: 409},
        "plausibility": {1: 0, 2: 10, 3: 504},
    },
    "GPT-3": {
        "total": 514,
        "validation": {0: 75, 1: 439},
        "coherence_complete_sentence": {0: 27, 1: 412},
        "coherence_multiple_impacts": {0: 395, 1: 44},
        "granularity": {1: 4, 2: 378, 3: 57},
        "relevance_stakeholders": {1: 4, 2: 59, 3: 376},
        "relevance_core_functionality": {1: 12, 2: 53, 3: 374},
        "plausibility": {1: 0, 2: 38, 3: 401},
    },
    "Mistral-7B": {
        "total": 514,
        "validation": {0: 47, 1: 467},
        "coherence_complete_sentence": {0: 21, 1: 446},
        "coherence_multiple_impacts": {0: 436, 1: 31},
        "granularity": {1: 7, 2: 381, 3: 79},
        "relevance_stakeholders": {1: 11, 2: 20, 3: 436},
        "relevance_core_functionality": {1: 19, 2: 37, 3: 411},
        "plausibility": {1: 0, 2: 20, 3: 447},
    },
}


def expand(counts: dict[int, int]) -> list[int]:
    values = []
    for value in sorted(counts):
        values.extend([value] * counts[value])
    return values


def build_table_fixture():
    """Generations plus one annotation each whose marginal rating counts
    equal the published table."""
    generations, annotations = [], []
    for model, spec in TABLE_COUNTS.items():
        mode = "zero_shot_chat" if "Instruct" in model or model == "GPT-4" else "finetuned_completion"
        invalid = spec["validation"][0]
        gated_values = {
            criterion: expand(spec[criterion])
            for criterion in spec
            if criterion not in ("total", "validation")
        }
        for i in range(spec["total"]):
            generation = GeneratedImpact(
                id=f"{model}::p{i:03d}",
                source_pair_id=f"p{i:03d}",
                description_used="a described technology",
                model_name=model,
                mode=mode,
                text=f"impact {i}",
                fingerprint="f",
            )
            generations.append(generation)
            if i < invalid:
                scores = {"validation": 0}
            else:
                j = i - invalid
                scores = {"validation": 1}
                for criterion, values in gated_values.items():
                    scores[criterion] = values[j]
            annotations.append(AnnotationRecord(generation.id, "ann1", scores))
    return generations, annotations


@pytest.fixture(scope="module")
def report():
    generations, annotations = build_table_fixture()
    return aggregate_report(annotations, generations)


class TestAggregateReport:

    def test_validated_denominators(self, report):
        assert report.validated == {
            "GPT-4": 514,
            "Mistral-7B-Instruct": 514,
            "GPT-3": 439,
            "Mistral-7B": 467,
        }
        assert all(total == 514 for total in report.totals.values())

    def test_validation_row_uses_generation_total(self, report):
        count, pct = report.cells["GPT-3"]["validation"][1]
        assert count == 439
        assert pct == 85.41  # 439/514 half-up; published prints 85.40
        assert within(pct, 85.40)

    def test_gated_rows_use_validated_denominator(self, report):
        count, pct = report.cells["GPT-3"]["coherence_complete_sentence"][1]
        assert count == 412
        assert pct == 93.85
        assert within(pct, 93.84)

    def test_finetuned_plausibility(self, report):
        count, pct = report.cells["Mistral-7B"]["plausibility"][3]
        assert count == 447
        assert pct == 95.72
        assert within(pct, 95.71)

    def test_rating_counts_sum_to_denominators(self, report):
        for model in report.models:
            validation_sum = sum(c for c, _ in report.cells[model]["validation"].values())
            assert validation_sum == report.totals[model]
            for criterion in evaluation.GATED_IDS:
                gated_sum = sum(c for c, _ in report.cells[model][criterion].values())
                assert gated_sum == report.validated[model]

    def test_granularity_consistency_example(self, report):
        counts = [c for c, _ in report.cells["GPT-3"]["granularity"].values()]
        assert sum(counts) == 439
        assert counts == [4, 378, 57]

    def test_percentages_recompute_from_counts(self, report):
        from decimal import ROUND_HALF_UP, Decimal

        for model in report.models:
            for criterion in evaluation.CRITERIA_BY_ID:
                denominator = (
                    report.totals[model]
                    if criterion == "validation"
                    else report.validated[model]
                )
                for count, pct in report.cells[model][criterion].values():
                    expected = float(
                        (Decimal(count) * 100 / Decimal(denominator)).quantize(
                            Decimal("0.01"), rounding=ROUND_HALF_UP
                        )
                    )
                    assert within(pct, expected)

    def test_dangling_reference_rejected(self):
        generations, annotations = build_table_fixture()
        annotations.append(AnnotationRecord("ghost::p1", "a", {"validation": 0}))
        with pytest.raises(ValueError, match="unknown generation"):
            aggregate_report(annotations, generations)

    def test_duplicate_annotation_rejected(self):
        generations, annotations = build_table_fixture()
        annotations.append(annotations[0])
        with pytest.raises(ValueError, match="duplicate"):
            aggregate_report(annotations, generations)

    def test_unannotated_generation_rejected(self):
        generations, annotations = build_table_fixture()
        with pytest.raises(ValueError, match="lack"):
            aggregate_report(annotations[:-1], generations)


class TestAdjudicate:
    def test_first_complete_wins(self):
        records = [
            AnnotationRecord("g1", "a1", {"validation": 0, "plausibility": 1}),  # invalid
            AnnotationRecord("g1", "a2", dict(FULL_SCORES)),
            AnnotationRecord("g1", "a3", {"validation": 0}),
        ]
        out = adjudicate(records)
        assert len(out) == 1
        assert out[0].annotator_id == "a2"

    def test_majority_vote(self):
        low = dict(FULL_SCORES, plausibility=2)
        records = [
            AnnotationRecord("g1", "a1", dict(FULL_SCORES)),
            AnnotationRecord("g1", "a2", dict(FULL_SCORES)),
            AnnotationRecord("g1", "a3", low),
        ]
        out = adjudicate(records, "majority")
        assert out[0].scores["plausibility"] == 3

    def test_majority_validation_gate(self):
        records = [
            AnnotationRecord("g1", "a1", {"validation": 0}),
            AnnotationRecord("g1", "a2", {"validation": 0}),
            AnnotationRecord("g1", "a3", dict(FULL_SCORES)),
        ]
        out = adjudicate(records, "majority")
        assert out[0].scores == {"validation": 0}


# Category counts per source consistent with the published distribution
# table (model denominators are each model's validated counts).
DISTRIBUTION_COUNTS = {
    "test_dataset": {
        "Societal Impacts": 216, "Privacy": 85, "Economic Impacts": 51,
        "Accuracy and Reliability": 37, "AI Governance": 37,
        "Miscellaneous Impacts": 33, "Physical and Digital Harms": 27,
        "Security": 12, "AI-generated Content": 10, "Autonomous System Safety": 6,
    },
    "GPT-4": {
        "Societal Impacts": 137, "Privacy": 122, "Economic Impacts": 126,
        "Accuracy and Reliability": 48, "AI Governance": 4,
        "Miscellaneous Impacts": 19, "Physical and Digital Harms": 40,
        "Security": 18, "AI-generated Content": 0, "Autonomous System Safety": 0,
    },
    "Mistral-7B-Instruct": {
        "Societal Impacts": 130, "Privacy": 87, "Economic Impacts": 172,
        "Accuracy and Reliability": 36, "AI Governance": 0,
        "Miscellaneous Impacts": 43, "Physical and Digital Harms": 24,
        "Security": 18, "AI-generated Content": 0, "Autonomous System Safety": 4,
    },
    "GPT-3": {
        "Societal Impacts": 158, "Privacy": 57, "Economic Impacts": 39,
        "Accuracy and Reliability": 49, "AI Governance": 40,
        "Miscellaneous Impacts": 42, "Physical and Digital Harms": 18,
        "Security": 21, "AI-generated Content": 5, "Autonomous System Safety": 10,
    },
    "Mistral-7B": {
        "Societal Impacts": 195, "Privacy": 46, "Economic Impacts": 65,
        "Accuracy and Reliability": 41, "AI Governance": 30,
        "Miscellaneous Impacts": 36, "Physical and Digital Harms": 33,
        "Security": 3, "AI-generated Content": 4, "Autonomous System Safety": 14,
    },
}

EXPECTED_GAPS = {
    ("GPT-4", "AI-generated Content"),
    ("GPT-4", "Autonomous System Safety"),
    ("Mistral-7B-Instruct", "AI Governance"),
    ("Mistral-7B-Instruct", "AI-generated Content"),
}


def distribution_fixture():
    return {
        source: [
            CategoryAssignment(f"{source}-{label}-{i}", label, 0.9)
            for label, count in counts.items()
            for i in range(count)
        ]
        for source, counts in DISTRIBUTION_COUNTS.items()
    }


@pytest.fixture(scope="module")
def comparison():
    return compare_distributions(distribution_fixture())


class TestCompareDistributions:

    def test_gap_cells_exactly_the_four_published(self, comparison):
        assert set(comparison.gap_cells) == EXPECTED_GAPS

    def test_category_order_descending_test_prevalence(self, comparison):
        assert comparison.category_order == [
            "Societal Impacts",
            "Privacy",
            "Economic Impacts",
            "Accuracy and Reliability",
            "AI Governance",
            "Miscellaneous Impacts",
            "Physical and Digital Harms",
            "Security",
            "AI-generated Content",
            "Autonomous System Safety",
        ]

    def test_columns_sum_to_100(self, comparison):
        for source in comparison.column_order:
            total = sum(pct for _, pct in comparison.columns[source].values())
            assert abs(total - 100.0) <= 0.1

    def test_full_coverage_model_has_no_gaps(self, comparison):
        assert not any(model == "GPT-3" for model, _ in comparison.gap_cells)
        assert not any(model == "Mistral-7B" for model, _ in comparison.gap_cells)

    def test_absent_in_test_set_is_not_a_gap(self):
        fixture = {
            "test_dataset": [CategoryAssignment("t0", "Privacy", 0.9)],
            "model-x": [CategoryAssignment("m0", "Security", 0.9)],
        }
        comparison = compare_distributions(fixture)
        gaps = set(comparison.gap_cells)
        assert ("model-x", "Privacy") in gaps
        # Categories missing from both sides are not gaps.
        assert ("model-x", "AI Governance") not in gaps

    def test_missing_test_source_rejected(self):
        with pytest.raises(ValueError, match="test_dataset"):
            compare_distributions({"model-x": [CategoryAssignment("m", "Privacy", 0.9)]})

    def test_empty_source_rejected(self):
        with pytest.raises(ValueError, match="no assignments"):
            compare_distributions(
                {"test_dataset": [CategoryAssignment("t", "Privacy", 0.9)], "m": []}
            )

    def test_gaps_invariant_under_assignment_permutation(self, comparison):
        import random as rnd

        fixture = distribution_fixture()
        shuffled = {}
        for source, assignments in fixture.items():
            permuted = list(assignments)
            rnd.Random(7).shuffle(permuted)
            shuffled[source] = permuted
        assert set(compare_distributions(shuffled).gap_cells) == set(comparison.gap_cells)


class TestRenderReports:
    def test_files_emitted_with_marked_gaps(self, tmp_path):
        generations, annotations = build_table_fixture()
        report = aggregate_report(annotations, generations)
        comparison = compare_distributions(distribution_fixture())
        paths = render_reports(report, comparison, tmp_path)
        names = {p.name for p in paths}
        assert names == {"report_s2.json", "report_s2.txt", "report_s3.json", "report_s3.txt"}
        s3_text = (tmp_path / "report_s3.txt").read_text()
        assert s3_text.count(" *") >= 4
        assert "Societal Impacts" in s3_text
        s2_text = (tmp_path / "report_s2.txt").read_text()
        for model in TABLE_COUNTS:
            assert model in s2_text
        # 7 criteria blocks, one separator after each plus the header rule.
        assert s2_text.count("----") >= 8

    def test_json_percentages_recompute(self, tmp_path):
        import json as jsonlib

        generations, annotations = build_table_fixture()
        report = aggregate_report(annotations, generations)
        comparison = compare_distributions(distribution_fixture())
        render_reports(report, comparison, tmp_path)
        doc = jsonlib.loads((tmp_path / "report_s3.json").read_text())
        for source, cells in doc["columns"].items():
            total = sum(cell["count"] for cell in cells.values())
            for cell in cells.values():
                recomputed = round(cell["count"] * 100 / total, 2)
                assert within(recomputed, cell["percent"])


class TestAnnotationStoreIO:
    def test_round_trip(self, tmp_path):
        records = [
            AnnotationRecord("g1", "a1", dict(FULL_SCORES), "2024-01-01T00:00:00Z"),
            AnnotationRecord("g2", "a1", {"validation": 0}, "2024-01-01T00:01:00Z", "note"),
        ]
        path = tmp_path / "annotations.jsonl"
        evaluation.write_annotations(path, records)
        assert evaluation.read_annotations(path) == records
