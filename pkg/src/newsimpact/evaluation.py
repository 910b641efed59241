"""Human-evaluation rubric for generated impacts, report aggregation,
and the category-distribution comparison with coverage-gap detection.

Two report families are produced:

  * quality report (``report_s2``): per model, per criterion, per
    rating: count and percentage. The validation row is a share of all
    generations of that model; every other criterion is a share of the
    model's validated (actual-impact) generations only.
  * distribution report (``report_s3``): per source (the held-out test
    dataset plus each model), the category distribution, with gap cells
    where a model produced zero impacts in a category the test dataset
    covers.

Annotation store: append-only line-delimited AnnotationRecord JSON.
"""

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .generation import GeneratedImpact
from .jsonl import read_records, write_records
from .taxonomy import CATEGORY_LABELS, CategoryAssignment, distribution


@dataclass(frozen=True)
class Criterion:
    id: str
    question: str
    scale: tuple[int, ...]
    labels: dict[int, str]
    gated: bool  # scored only when the generation is a validated impact


RUBRIC: tuple[Criterion, ...] = (
    Criterion(
        id="validation",
        question="Does the generated text state a negative impact of the technology?",
        scale=(0, 1),
        labels={0: "No", 1: "Yes"},
        gated=False,
    ),
    Criterion(
        id="coherence_complete_sentence",
        question="Is the generated impact a complete sentence?",
        scale=(0, 1),
        labels={0: "No", 1: "Yes"},
        gated=True,
    ),
    Criterion(
        id="coherence_multiple_impacts",
        question="Does the generated impact mention more than one impact?",
        scale=(0, 1),
        labels={0: "No", 1: "Yes"},
        gated=True,
    ),
    Criterion(
        id="granularity",
        question="How elaborative is the generated impact?",
        scale=(1, 2, 3),
        labels={1: "Too concise", 2: "Could explain more", 3: "Sufficient"},
        gated=True,
    ),
    Criterion(
        id="relevance_stakeholders",
        question="How relevant is the impact to the stakeholders in the description?",
        scale=(1, 2, 3),
        labels={1: "Irrelevant", 2: "Somewhat Relevant", 3: "Very Relevant"},
        gated=True,
    ),
    Criterion(
        id="relevance_core_functionality",
        question="How relevant is the impact to the technology's core functionality?",
        scale=(1, 2, 3),
        labels={1: "Irrelevant", 2: "Somewhat Relevant", 3: "Very Relevant"},
        gated=True,
    ),
    Criterion(
        id="plausibility",
        question="How reasonable is it that the generated impact could happen?",
        scale=(1, 2, 3),
        labels={1: "Not Plausible", 2: "Somewhat Plausible", 3: "Very Plausible"},
        gated=True,
    ),
)

CRITERIA_BY_ID: dict[str, Criterion] = {c.id: c for c in RUBRIC}
GATED_IDS: tuple[str, ...] = tuple(c.id for c in RUBRIC if c.gated)


@dataclass
class AnnotationRecord:
    generated_impact_id: str
    annotator_id: str
    scores: dict[str, int]
    timestamp: str = ""
    notes: str | None = None

    def to_record(self) -> dict:
        return {
            "generated_impact_id": self.generated_impact_id,
            "annotator_id": self.annotator_id,
            "scores": dict(sorted(self.scores.items())),
            "timestamp": self.timestamp,
            "notes": self.notes,
        }

    @classmethod
    def from_record(cls, record: dict) -> "AnnotationRecord":
        return cls(
            generated_impact_id=record["generated_impact_id"],
            annotator_id=record["annotator_id"],
            scores={k: int(v) for k, v in record["scores"].items()},
            timestamp=record.get("timestamp", ""),
            notes=record.get("notes"),
        )


def validate_annotation(record: AnnotationRecord) -> list[str]:
    """Scale membership plus the validation-gating rule: a generation
    judged not-an-impact (validation=0) carries no further scores; a
    validated one carries all six. Violations are returned, not raised."""
    violations: list[str] = []
    for criterion_id, value in record.scores.items():
        criterion = CRITERIA_BY_ID.get(criterion_id)
        if criterion is None:
            violations.append(f"unknown criterion {criterion_id!r}")
        elif value not in criterion.scale:
            violations.append(
                f"{criterion_id}={value} outside scale {list(criterion.scale)}"
            )
    if "validation" not in record.scores:
        violations.append("missing validation score")
        return violations
    gated_present = [c for c in GATED_IDS if c in record.scores]
    if record.scores["validation"] == 0:
        if gated_present:
            violations.append(
                "validation=0 forbids further scores, got "
                + ", ".join(sorted(gated_present))
            )
    elif record.scores["validation"] == 1:
        missing = [c for c in GATED_IDS if c not in record.scores]
        if missing:
            violations.append("validated record missing scores: " + ", ".join(missing))
    return violations


def adjudicate(
    records: Sequence[AnnotationRecord], strategy: str = "first_complete"
) -> list[AnnotationRecord]:
    """Reduce a multi-annotator store to one record per generation.

    first_complete: the earliest record that passes validation wins.
    majority: per-criterion modal score over valid records (ties to the
    lower score); gated criteria are voted only among records whose
    validation vote matches the majority.
    """
    if strategy not in ("first_complete", "majority"):
        raise ValueError(f"unknown adjudication strategy {strategy!r}")
    by_generation: dict[str, list[AnnotationRecord]] = {}
    order: list[str] = []
    for record in records:
        if record.generated_impact_id not in by_generation:
            by_generation[record.generated_impact_id] = []
            order.append(record.generated_impact_id)
        by_generation[record.generated_impact_id].append(record)

    adjudicated: list[AnnotationRecord] = []
    for generation_id in order:
        valid = [r for r in by_generation[generation_id] if not validate_annotation(r)]
        if not valid:
            continue
        if strategy == "first_complete":
            adjudicated.append(valid[0])
            continue
        votes = sorted(r.scores["validation"] for r in valid)
        majority_validation = _modal(votes)
        pool = [r for r in valid if r.scores["validation"] == majority_validation]
        scores = {"validation": majority_validation}
        if majority_validation == 1:
            for criterion_id in GATED_IDS:
                scores[criterion_id] = _modal(sorted(r.scores[criterion_id] for r in pool))
        adjudicated.append(
            AnnotationRecord(
                generated_impact_id=generation_id,
                annotator_id="majority",
                scores=scores,
                timestamp=max(r.timestamp for r in pool),
            )
        )
    return adjudicated


def _modal(sorted_values: list[int]) -> int:
    best_value = sorted_values[0]
    best_count = 0
    for value in dict.fromkeys(sorted_values):
        count = sorted_values.count(value)
        if count > best_count:
            best_value, best_count = value, count
    return best_value


def _percent(count: int, total: int) -> float:
    if total == 0:
        return 0.0
    pct = Decimal(count) * 100 / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class EvaluationReport:
    models: list[str]
    totals: dict[str, int]
    validated: dict[str, int]
    # model -> criterion id -> rating value -> (count, percent)
    cells: dict[str, dict[str, dict[int, tuple[int, float]]]]

    def to_json(self) -> dict:
        criteria = []
        for criterion in RUBRIC:
            rows = []
            for rating in criterion.scale:
                per_model = {}
                for model in self.models:
                    count, pct = self.cells[model][criterion.id][rating]
                    per_model[model] = {"count": count, "percent": pct}
                rows.append(
                    {"rating": rating, "label": criterion.labels[rating], "models": per_model}
                )
            criteria.append(
                {"criterion": criterion.id, "question": criterion.question, "rows": rows}
            )
        return {
            "models": list(self.models),
            "totals": dict(self.totals),
            "validated": dict(self.validated),
            "criteria": criteria,
        }


def aggregate_report(
    annotations: Sequence[AnnotationRecord], generations: Sequence[GeneratedImpact]
) -> EvaluationReport:
    """Tally adjudicated annotations into the quality report.

    Exactly one annotation per generation is expected (adjudicate
    upstream); the validation criterion is counted over each model's
    generation total, every other criterion over its validated count.
    """
    by_id = {g.id: g for g in generations}
    if len(by_id) != len(generations):
        raise ValueError("duplicate generation ids")
    models: list[str] = []
    for generation in generations:
        if generation.model_name not in models:
            models.append(generation.model_name)

    seen: set[str] = set()
    for record in annotations:
        if record.generated_impact_id not in by_id:
            raise ValueError(
                f"annotation references unknown generation {record.generated_impact_id!r}"
            )
        if record.generated_impact_id in seen:
            raise ValueError(
                f"duplicate annotation for generation {record.generated_impact_id!r}"
            )
        violations = validate_annotation(record)
        if violations:
            raise ValueError(
                f"invalid annotation for {record.generated_impact_id!r}: {violations}"
            )
        seen.add(record.generated_impact_id)
    missing = set(by_id) - seen
    if missing:
        raise ValueError(f"{len(missing)} generations lack an annotation")

    totals = {m: sum(1 for g in generations if g.model_name == m) for m in models}
    counts: dict[str, dict[str, dict[int, int]]] = {
        m: {c.id: {r: 0 for r in c.scale} for c in RUBRIC} for m in models
    }
    for record in annotations:
        model = by_id[record.generated_impact_id].model_name
        for criterion_id, value in record.scores.items():
            counts[model][criterion_id][value] += 1

    validated = {m: counts[m]["validation"][1] for m in models}
    cells: dict[str, dict[str, dict[int, tuple[int, float]]]] = {}
    for model in models:
        cells[model] = {}
        for criterion in RUBRIC:
            denominator = totals[model] if criterion.id == "validation" else validated[model]
            cells[model][criterion.id] = {
                rating: (count, _percent(count, denominator))
                for rating, count in counts[model][criterion.id].items()
            }
    return EvaluationReport(models, totals, validated, cells)


@dataclass
class DistributionComparison:
    column_order: list[str]  # "test_dataset" first, then models
    category_order: list[str]  # descending test-dataset prevalence
    # source -> category -> (count, percent)
    columns: dict[str, dict[str, tuple[int, float]]]
    gap_cells: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "column_order": list(self.column_order),
            "category_order": list(self.category_order),
            "columns": {
                source: {
                    category: {"count": count, "percent": pct}
                    for category, (count, pct) in cells.items()
                }
                for source, cells in self.columns.items()
            },
            "gap_cells": [[model, category] for model, category in self.gap_cells],
        }


TEST_SOURCE = "test_dataset"


def compare_distributions(
    per_source_assignments: dict[str, Sequence[CategoryAssignment]],
) -> DistributionComparison:
    """Category distributions per source plus coverage gaps.

    A gap cell is a (model, category) where the model produced zero
    impacts in a category the test dataset does cover. Categories are
    ordered by descending test-dataset prevalence (ties alphabetical,
    case-insensitive).
    """
    if TEST_SOURCE not in per_source_assignments:
        raise ValueError(f"sources must include {TEST_SOURCE!r}")
    if len(per_source_assignments) < 2:
        raise ValueError("need at least one model source beside the test dataset")
    columns = {}
    for source, assignments in per_source_assignments.items():
        if not assignments:
            raise ValueError(f"source {source!r} has no assignments")
        columns[source] = distribution(assignments)

    test_column = columns[TEST_SOURCE]
    category_order = sorted(
        CATEGORY_LABELS, key=lambda c: (-test_column[c][0], c.casefold())
    )
    column_order = [TEST_SOURCE] + [s for s in per_source_assignments if s != TEST_SOURCE]
    gap_cells = [
        (source, category)
        for source in column_order[1:]
        for category in category_order
        if columns[source][category][0] == 0 and test_column[category][0] > 0
    ]
    return DistributionComparison(column_order, category_order, columns, gap_cells)


# -- rendering ----------------------------------------------------------------


def _format_cell(count: int, pct: float) -> str:
    return f"{count} ({pct:.2f}%)"


def render_quality_table(report: EvaluationReport) -> str:
    label_width = max(
        len(f"{c.question} [{c.labels[r]}]") for c in RUBRIC for r in c.scale
    )
    widths = {
        m: max(
            len(m),
            max(
                len(_format_cell(*report.cells[m][c.id][r]))
                for c in RUBRIC
                for r in c.scale
            ),
        )
        for m in report.models
    }
    lines = []
    header = " " * label_width + " | " + " | ".join(m.ljust(widths[m]) for m in report.models)
    lines.append(header)
    lines.append("-" * len(header))
    for criterion in RUBRIC:
        for rating in criterion.scale:
            label = f"{criterion.question} [{criterion.labels[rating]}]"
            cells = [
                _format_cell(*report.cells[m][criterion.id][rating]).ljust(widths[m])
                for m in report.models
            ]
            lines.append(label.ljust(label_width) + " | " + " | ".join(cells))
        lines.append("-" * len(header))
    lines.append(
        "totals: "
        + ", ".join(f"{m}={report.totals[m]}" for m in report.models)
        + " | validated: "
        + ", ".join(f"{m}={report.validated[m]}" for m in report.models)
    )
    return "\n".join(lines) + "\n"


def render_distribution_table(comparison: DistributionComparison) -> str:
    gaps = set(comparison.gap_cells)
    label_width = max(len(c) for c in comparison.category_order)
    cell_texts: dict[str, dict[str, str]] = {}
    for source in comparison.column_order:
        cell_texts[source] = {}
        for category in comparison.category_order:
            count, pct = comparison.columns[source][category]
            text = _format_cell(count, pct)
            if (source, category) in gaps:
                text += " *"
            cell_texts[source][category] = text
    widths = {
        s: max(len(s), max(len(cell_texts[s][c]) for c in comparison.category_order))
        for s in comparison.column_order
    }
    lines = []
    header = " " * label_width + " | " + " | ".join(
        s.ljust(widths[s]) for s in comparison.column_order
    )
    lines.append(header)
    lines.append("-" * len(header))
    for category in comparison.category_order:
        row = [cell_texts[s][category].ljust(widths[s]) for s in comparison.column_order]
        lines.append(category.ljust(label_width) + " | " + " | ".join(row))
    lines.append("-" * len(header))
    lines.append("* coverage gap: category present in the test dataset, absent for the model")
    return "\n".join(lines) + "\n"


def render_reports(
    report: EvaluationReport, comparison: DistributionComparison, out_dir: str | Path
) -> list[Path]:
    """Write machine-readable JSON plus aligned text tables."""
    import json

    if not report.models:
        raise ValueError("quality report has no models")
    if not comparison.column_order:
        raise ValueError("distribution comparison is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, payload in (
        ("report_s2.json", report.to_json()),
        ("report_s3.json", comparison.to_json()),
    ):
        path = out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, ensure_ascii=False, indent=1)
            fh.write("\n")
        paths.append(path)
    for name, text in (
        ("report_s2.txt", render_quality_table(report)),
        ("report_s3.txt", render_distribution_table(comparison)),
    ):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths


# -- annotation store ----------------------------------------------------------


def read_annotations(path: str | Path) -> list[AnnotationRecord]:
    return [AnnotationRecord.from_record(r) for r in read_records(path)]


def write_annotations(path: str | Path, records: Iterable[AnnotationRecord]) -> int:
    return write_records(path, (r.to_record() for r in records))
