"""Curated (description, impact) pair dataset: three-way seeded split
and training-file emission for completion-model fine-tuning.

Dataset store format: line-delimited JSON records
``{pair_id, description, impact, article_id}``.

Training file formats (line-delimited JSON):

  completion   {"pair_id", "prompt": description + "\\n\\n###\\n\\n",
                "completion": " " + impact + " END"}
  instruct     {"pair_id", "text": "<s>[INST] ...description... [/INST]"
                + impact + "</s>"}

The completion format uses the prompt/completion record convention with
a fixed separator and stop token; the instruct format reuses the
zero-shot instruct wrapper so fine-tuned and zero-shot prompts stay
consistent. Generation's fine-tuned prompt construction shares
PROMPT_SEPARATOR and COMPLETION_STOP with this module.
"""

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import prompts
from .jsonl import write_records

PROMPT_SEPARATOR = "\n\n###\n\n"
COMPLETION_STOP = " END"

TRAINING_FORMATS = ("completion", "instruct")


@dataclass(frozen=True)
class Pair:
    pair_id: str
    description: str
    impact: str
    article_id: str

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "description": self.description,
            "impact": self.impact,
            "article_id": self.article_id,
        }


@dataclass
class CuratedDataset:
    pairs: list[Pair]
    source_corpus_hash: str = ""
    created_at: datetime.datetime = field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc)
    )


def curate(pairs: Sequence[Pair], source_corpus_hash: str = "") -> CuratedDataset:
    """Validate pair ids are unique and no field is empty."""
    seen: set[str] = set()
    for pair in pairs:
        if not pair.pair_id or not pair.description or not pair.impact or not pair.article_id:
            raise ValueError(f"pair {pair.pair_id!r} has an empty field")
        if pair.pair_id in seen:
            raise ValueError(f"duplicate pair_id {pair.pair_id!r}")
        seen.add(pair.pair_id)
    return CuratedDataset(list(pairs), source_corpus_hash)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 32035 / 37689
    validation_fraction: float = 5140 / 37689
    test_fraction: float = 514 / 37689
    seed: int = 0
    # Keep all pairs of one article in one part. Sizes then only
    # approximate the fractions (whole articles are indivisible), so
    # this trades exact counts for leak-free splits.
    group_by_article: bool = False

    def __post_init__(self) -> None:
        fractions = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f < 0 for f in fractions):
            raise ValueError("fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(fractions)}, expected 1")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.validation_fraction, self.test_fraction)


def largest_remainder_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Apportion ``n`` into integer counts that sum exactly to ``n``.

    Each part gets the floor of its quota; leftover units go to the
    largest fractional remainders (ties to the earlier part).
    """
    quotas = [f * n for f in fractions]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def _shuffle_key(seed: int, pair_id: str) -> str:
    return hashlib.sha256(f"{seed}:{pair_id}".encode("utf-8")).hexdigest()


def split_dataset(
    dataset: CuratedDataset, spec: SplitSpec
) -> tuple[list[Pair], list[Pair], list[Pair]]:
    """Disjoint, exhaustive (train, validation, test) partition.

    The permutation is a pure function of (seed, pair_ids): pairs are
    sorted on pair_id, then ordered by a keyed hash, so membership is
    independent of input order, machine, and run. Sizes follow
    largest-remainder rounding of fraction * N.
    """
    if len(dataset.pairs) < 3:
        raise ValueError("dataset must hold at least 3 pairs to split")
    if spec.group_by_article:
        return _split_grouped(dataset, spec)
    ordered = sorted(dataset.pairs, key=lambda p: p.pair_id)
    ordered.sort(key=lambda p: (_shuffle_key(spec.seed, p.pair_id), p.pair_id))
    n_train, n_val, n_test = largest_remainder_counts(len(ordered), spec.fractions)
    train = ordered[:n_train]
    validation = ordered[n_train : n_train + n_val]
    test = ordered[n_train + n_val :]
    assert len(test) == n_test
    return train, validation, test


def _split_grouped(
    dataset: CuratedDataset, spec: SplitSpec
) -> tuple[list[Pair], list[Pair], list[Pair]]:
    """Article-grouped variant: articles are shuffled by keyed hash and
    their pair blocks fill train, then validation, then test, moving on
    once a part reaches its quota."""
    by_article: dict[str, list[Pair]] = {}
    for pair in sorted(dataset.pairs, key=lambda p: p.pair_id):
        by_article.setdefault(pair.article_id, []).append(pair)
    article_order = sorted(by_article, key=lambda a: (_shuffle_key(spec.seed, a), a))
    quotas = largest_remainder_counts(len(dataset.pairs), spec.fractions)
    parts: tuple[list[Pair], list[Pair], list[Pair]] = ([], [], [])
    index = 0
    for article_id in article_order:
        while index < 2 and len(parts[index]) >= quotas[index]:
            index += 1
        parts[index].extend(by_article[article_id])
    return parts


def completion_example(pair: Pair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "prompt": pair.description + PROMPT_SEPARATOR,
        "completion": " " + pair.impact + COMPLETION_STOP,
    }


def instruct_example(pair: Pair) -> dict:
    rendered = prompts.render_prompt(prompts.P4, pair.description)
    assert rendered.endswith(prompts.INSTRUCT_CLOSE)
    head = rendered[: -len("</s>")]
    return {"pair_id": pair.pair_id, "text": head + pair.impact + "</s>"}


def emit_training_file(
    train: Sequence[Pair], file_format: str, path: str | Path
) -> Path:
    """Write training records for ``train`` in the given format."""
    if file_format not in TRAINING_FORMATS:
        raise ValueError(f"unknown training format {file_format!r}")
    if not train:
        raise ValueError("cannot emit a training file from zero pairs")
    build = completion_example if file_format == "completion" else instruct_example
    path = Path(path)
    write_records(path, (build(pair) for pair in train))
    return path


@dataclass
class ValidationReport:
    path: str
    file_format: str
    total_records: int = 0
    violations: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_record(self) -> dict:
        return {
            "path": self.path,
            "format": self.file_format,
            "total_records": self.total_records,
            "violations": [{"line": l, "message": m} for l, m in self.violations],
            "warnings": [{"line": l, "message": m} for l, m in self.warnings],
        }


def _check_completion_record(record: dict) -> list[str]:
    problems = []
    prompt = record.get("prompt")
    completion = record.get("completion")
    if not isinstance(prompt, str) or not prompt:
        problems.append("missing or empty prompt")
    else:
        if prompt.count(PROMPT_SEPARATOR) != 1:
            problems.append("prompt must contain the separator exactly once")
        elif not prompt.endswith(PROMPT_SEPARATOR):
            problems.append("prompt must end with the separator")
        if prompt == PROMPT_SEPARATOR:
            problems.append("prompt has no content before the separator")
    if not isinstance(completion, str) or not completion.strip():
        problems.append("missing or empty completion")
    elif not completion.endswith(COMPLETION_STOP):
        problems.append("completion must end with the stop marker")
    return problems


def _check_instruct_record(record: dict) -> list[str]:
    problems = []
    text = record.get("text")
    if not isinstance(text, str) or not text:
        return ["missing or empty text"]
    if not text.startswith(prompts.INSTRUCT_OPEN + " "):
        problems.append("text must start with the instruct opener")
    if not text.endswith("</s>"):
        problems.append("text must end with </s>")
    if text.count("[INST]") != 1 or text.count("[/INST]") != 1:
        problems.append("text must contain exactly one [INST] ... [/INST] block")
    elif not text.partition("[/INST]")[2].rstrip("</s>").strip():
        problems.append("no completion text after [/INST]")
    return problems


def validate_dataset(path: str | Path, file_format: str) -> ValidationReport:
    """Check a training file: JSON per line, UTF-8, schema fields
    present and non-empty, separator/wrapper uniqueness. Violations are
    reported with their record number, never raised; duplicate pair_id
    provenance is a warning only.
    """
    if file_format not in TRAINING_FORMATS:
        raise ValueError(f"unknown training format {file_format!r}")
    path = Path(path)
    report = ValidationReport(str(path), file_format)
    check = _check_completion_record if file_format == "completion" else _check_instruct_record
    seen_pairs: dict[str, int] = {}
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            report.total_records += 1
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                report.violations.append((lineno, "line is not valid UTF-8"))
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                report.violations.append((lineno, f"bad JSON: {exc.msg}"))
                continue
            if not isinstance(record, dict):
                report.violations.append((lineno, "record is not an object"))
                continue
            for problem in check(record):
                report.violations.append((lineno, problem))
            pair_id = record.get("pair_id")
            if isinstance(pair_id, str) and pair_id:
                if pair_id in seen_pairs:
                    report.warnings.append(
                        (lineno, f"duplicate pair_id {pair_id!r} (first at line {seen_pairs[pair_id]})")
                    )
                else:
                    seen_pairs[pair_id] = lineno
    return report


def write_pairs(path: str | Path, pairs: Sequence[Pair]) -> int:
    return write_records(path, (p.to_record() for p in pairs))


def read_pairs(path: str | Path) -> list[Pair]:
    from .jsonl import read_records

    return [
        Pair(r["pair_id"], r["description"], r["impact"], r["article_id"])
        for r in read_records(path)
    ]


def corpus_hash(article_ids: Sequence[str]) -> str:
    blob = "\n".join(sorted(article_ids))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
