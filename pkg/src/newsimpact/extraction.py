"""Per-article impact extraction: render the summary and description
prompts, call the gateway, parse replies (including the no-impacts
marker), and fan records out into (description, impact) pairs.

Record store format: line-delimited JSON
``{article_id, description, impacts[], raw_p1, raw_p2, flags[]}``.
The store doubles as the resume checkpoint: a rerun skips article ids
already present.
"""

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import prompts
from .corpus import Article
from .dataset import Pair
from .errors import GatewayError
from .gateway import BackendConfig, Gateway
from .jsonl import read_records, write_records

# Head-of-body character budget for long articles; roughly a 16k-token
# context at common tokenization densities.
DEFAULT_CHAR_BUDGET = 48_000

FLAG_TRUNCATED = "truncated_input"
FLAG_EMPTY_DESCRIPTION = "empty_description"

_SENTINEL_RE = re.compile(r"##\s*no\s+impacts\s*##", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*(?:[-*•‣▪]|\d+[.)])\s*")
_SENTENCE_BOUNDARY_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass
class ExtractionRecord:
    article_id: str
    description: str
    impacts: list[str]
    raw_p1: str
    raw_p2: str
    flags: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "article_id": self.article_id,
            "description": self.description,
            "impacts": self.impacts,
            "raw_p1": self.raw_p1,
            "raw_p2": self.raw_p2,
            "flags": self.flags,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ExtractionRecord":
        return cls(
            article_id=record["article_id"],
            description=record["description"],
            impacts=list(record["impacts"]),
            raw_p1=record["raw_p1"],
            raw_p2=record["raw_p2"],
            flags=list(record.get("flags", [])),
        )


def truncate_body(body: str, char_budget: int = DEFAULT_CHAR_BUDGET) -> tuple[str, bool]:
    """Keep the head of an over-budget article body."""
    if len(body) > char_budget:
        return body[:char_budget], True
    return body, False


def extract_impacts(
    article: Article,
    gateway: Gateway,
    config: BackendConfig,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> str:
    """Raw impact-summary reply for one article. Detection of the
    no-impacts marker is deferred to parse_impacts."""
    if not article.body:
        raise ValueError(f"article {article.id} has an empty body")
    body, _ = truncate_body(article.body, char_budget)
    rendered = prompts.render_prompt(prompts.P1, body)
    return _send(article, gateway, config, rendered)


def extract_description(
    article: Article,
    gateway: Gateway,
    config: BackendConfig,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> str:
    """Raw capability-description reply for one article."""
    if not article.body:
        raise ValueError(f"article {article.id} has an empty body")
    body, _ = truncate_body(article.body, char_budget)
    rendered = prompts.render_prompt(prompts.P2, body)
    return _send(article, gateway, config, rendered)


def _send(article: Article, gateway: Gateway, config: BackendConfig, rendered: str) -> str:
    try:
        if config.mode == "chat":
            response = gateway.chat_complete(config, [{"role": "user", "content": rendered}])
        else:
            response = gateway.text_complete(config, rendered)
    except GatewayError as exc:
        raise GatewayError(f"article {article.id}: {exc}") from exc
    return response.text


def parse_impacts(raw_p1: str) -> list[str]:
    """Split a raw impact summary into individual impact statements.

    The no-impacts marker is matched tolerantly (any case, surrounding
    whitespace) because instruction-following models deviate in
    formatting. Bullet or numbered lines each become one statement; a
    single-paragraph reply is split on sentence boundaries. Statements
    come back trimmed and non-empty.
    """
    if _SENTINEL_RE.search(raw_p1):
        return []
    lines = [_BULLET_RE.sub("", line).strip() for line in raw_p1.splitlines()]
    lines = [line for line in lines if line]
    if len(lines) > 1:
        return lines
    if not lines:
        return []
    return [s.strip() for s in _SENTENCE_BOUNDARY_RE.split(lines[0]) if s.strip()]


def extract_record(
    article: Article,
    gateway: Gateway,
    config: BackendConfig,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> ExtractionRecord:
    """Run both prompts for one article and assemble the full record."""
    flags = []
    _, truncated = truncate_body(article.body, char_budget)
    if truncated:
        flags.append(FLAG_TRUNCATED)
    raw_p1 = extract_impacts(article, gateway, config, char_budget)
    raw_p2 = extract_description(article, gateway, config, char_budget)
    description = raw_p2.strip()
    if not description:
        flags.append(FLAG_EMPTY_DESCRIPTION)
    return ExtractionRecord(
        article_id=article.id,
        description=description,
        impacts=parse_impacts(raw_p1),
        raw_p1=raw_p1,
        raw_p2=raw_p2,
        flags=flags,
    )


def extract_corpus(
    articles: Sequence[Article],
    gateway: Gateway,
    config: BackendConfig,
    store_path: str | Path,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> list[ExtractionRecord]:
    """Extract every article, resuming from the store when present.

    Per-article tasks run under the gateway's bounded concurrency; the
    store is rewritten sorted on article_id so the file is deterministic
    regardless of completion order.
    """
    store_path = Path(store_path)
    done: dict[str, ExtractionRecord] = {}
    if store_path.exists():
        for record in read_records(store_path):
            done[record["article_id"]] = ExtractionRecord.from_record(record)
    pending = [a for a in articles if a.id not in done]
    if pending:
        with ThreadPoolExecutor(max_workers=gateway.max_in_flight) as pool:
            records = list(
                pool.map(lambda a: extract_record(a, gateway, config, char_budget), pending)
            )
        for record in records:
            done[record.article_id] = record
    ordered = [done[a.id] for a in sorted(articles, key=lambda a: a.id) if a.id in done]
    write_records(store_path, (r.to_record() for r in ordered))
    return ordered


def build_pairs(records: Sequence[ExtractionRecord]) -> list[Pair]:
    """One pair per (record, impact statement). Records with no impacts
    contribute nothing; a pair needs both halves, so records whose
    description came back empty are excluded as well."""
    pairs: list[Pair] = []
    for record in records:
        if not record.description or FLAG_EMPTY_DESCRIPTION in record.flags:
            continue
        for index, impact in enumerate(record.impacts):
            pairs.append(
                Pair(
                    pair_id=f"{record.article_id}:{index}",
                    description=record.description,
                    impact=impact,
                    article_id=record.article_id,
                )
            )
    return pairs
