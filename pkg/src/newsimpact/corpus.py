"""News-article corpus: loading, keyword filtering, dedup, statistics.

Ingestion starts from already-scraped article records (line-delimited
JSON, schema below); scraping and HTML cleaning are out of scope.

Article record schema (one JSON object per line, UTF-8):
    {"id", "url", "domain", "country", "published_at" (YYYY-MM-DD),
     "title", "body"}
"""

import datetime
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConsistencyError, EmptyCorpusError

# Default keyword set used to probe a general news corpus for AI
# coverage: 40 phrases, matched case-insensitively on word boundaries.
DEFAULT_KEYWORDS: tuple[str, ...] = (
    "A.I.",
    "Artificial Intelligence",
    "Automated Decision Making",
    "Automated System",
    "Autonomous Driving System",
    "Autonomous Vehicles",
    "Autonomous Weapon",
    "Chat Bot",
    "Chatbot",
    "ChatGPT",
    "Computer Vision",
    "Deep Learning",
    "Deepfake",
    "Driverless Car",
    "Facial Recognition",
    "General Artificial Intelligence",
    "Generative AI",
    "GPT",
    "Image Generator",
    "Intelligence Software",
    "Intelligent Machine",
    "Intelligent System",
    "Language Model",
    "Large Language Model",
    "LLMs",
    "Machine Intelligence",
    "Machine Learning",
    "Machine Translation",
    "Natural Language API",
    "Natural Language Processing",
    "Neural Net",
    "Neural Network",
    "Predictive Policing",
    "Reinforcement Learning",
    "Self-Driving Car",
    "Speech Recognition",
    "Stable Diffusion",
    "Synthetic Media",
    "Virtual Reality",
    "Weapons System",
)

# Window the source corpus was collected over; applied only when date
# filtering is enabled in the pipeline config (default off).
DEFAULT_WINDOW_START = datetime.date(2020, 1, 1)
DEFAULT_WINDOW_END = datetime.date(2023, 6, 1)


@dataclass(frozen=True)
class Article:
    id: str
    url: str
    domain: str
    country: str
    published_at: datetime.date
    title: str
    body: str

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "url": self.url,
            "domain": self.domain,
            "country": self.country,
            "published_at": self.published_at.isoformat(),
            "title": self.title,
            "body": self.body,
        }


@dataclass(frozen=True)
class KeywordSet:
    """Ordered list of match phrases, case-insensitive, word-boundary
    delimited. A phrase matches only where both its ends sit on a
    transition between alphanumeric and non-alphanumeric text, so "GPT"
    never fires inside "EGPT" and "A.I." never fires inside a longer
    token.
    """

    keywords: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError("keyword set is empty")
        folded = [k.casefold() for k in self.keywords]
        if len(set(folded)) != len(folded):
            raise ValueError("keyword set contains duplicate phrases after case folding")


@dataclass
class RejectedLine:
    source: str
    line: int
    reason: str

    def to_record(self) -> dict:
        return {"source": self.source, "line": self.line, "reason": self.reason}


@dataclass
class LoadResult:
    articles: list[Article]
    rejects: list[RejectedLine] = field(default_factory=list)


@dataclass
class CorpusStats:
    total_articles: int
    articles_per_country: dict[str, int]
    articles_with_impacts: int

    @property
    def impact_coverage_rate(self) -> float:
        if self.total_articles == 0:
            return 0.0
        return self.articles_with_impacts / self.total_articles

    def coverage_percent(self) -> float:
        """Coverage as a percentage at 0.1% precision (half-up)."""
        if self.total_articles == 0:
            return 0.0
        pct = Decimal(self.articles_with_impacts) * 100 / Decimal(self.total_articles)
        return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))

    def to_record(self) -> dict:
        return {
            "total_articles": self.total_articles,
            "articles_per_country": dict(sorted(self.articles_per_country.items())),
            "articles_with_impacts": self.articles_with_impacts,
            "impact_coverage_rate": self.impact_coverage_rate,
            "impact_coverage_percent": self.coverage_percent(),
        }


def default_keyword_set() -> KeywordSet:
    return KeywordSet(DEFAULT_KEYWORDS)


def load_keyword_set(path: str | Path) -> KeywordSet:
    """Load a keyword file: plain text, one phrase per line, blank lines
    ignored."""
    phrases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            phrase = line.strip()
            if phrase:
                phrases.append(phrase)
    return KeywordSet(tuple(phrases))


def _parse_article(record: dict) -> Article:
    required = ("id", "url", "domain", "country", "published_at", "title", "body")
    for key in required:
        if key not in record:
            raise ValueError(f"missing field {key!r}")
        if not isinstance(record[key], str):
            raise ValueError(f"field {key!r} is not a string")
    if not record["body"]:
        raise ValueError("empty body")
    if not record["id"]:
        raise ValueError("empty id")
    if not record["url"]:
        raise ValueError("empty url")
    country = record["country"]
    if len(country) != 2 or not country.isalpha():
        raise ValueError(f"country {country!r} is not a 2-letter code")
    try:
        published = datetime.date.fromisoformat(record["published_at"])
    except ValueError as exc:
        raise ValueError(f"bad published_at: {exc}") from None
    return Article(
        id=record["id"],
        url=record["url"],
        domain=record["domain"],
        country=country.upper(),
        published_at=published,
        title=record["title"],
        body=record["body"],
    )


def load_articles(source: str | Path) -> LoadResult:
    """Load article records from a JSONL file or a directory of them.

    Malformed lines (bad JSON, missing/invalid fields, duplicate ids)
    are collected into the rejects report, never silently dropped.
    Output is sorted on article id so directory loads are
    order-deterministic. Raises EmptyCorpusError when no line parses,
    and propagates I/O errors on an unreadable source.
    """
    source = Path(source)
    if source.is_dir():
        files = sorted(p for p in source.iterdir() if p.is_file())
    else:
        files = [source]

    articles: list[Article] = []
    rejects: list[RejectedLine] = []
    seen_ids: set[str] = set()
    for path in files:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    if not isinstance(record, dict):
                        raise ValueError("record is not an object")
                    article = _parse_article(record)
                    if article.id in seen_ids:
                        raise ValueError(f"duplicate id {article.id!r}")
                except ValueError as exc:
                    rejects.append(RejectedLine(str(path), lineno, str(exc)))
                    continue
                seen_ids.add(article.id)
                articles.append(article)
    if not articles:
        raise EmptyCorpusError(f"no well-formed article records in {source}")
    articles.sort(key=lambda a: a.id)
    return LoadResult(articles, rejects)


def _is_wordish(ch: str) -> bool:
    return ch.isalnum()


def phrase_in_text(phrase: str, text: str) -> bool:
    """Case-insensitive phrase match with word-boundary ends.

    A boundary is the string edge or a non-alphanumeric character
    adjacent to the matched span.
    """
    needle = phrase.casefold()
    hay = text.casefold()
    start = 0
    while True:
        idx = hay.find(needle, start)
        if idx < 0:
            return False
        before_ok = idx == 0 or not _is_wordish(hay[idx - 1])
        end = idx + len(needle)
        after_ok = end >= len(hay) or not _is_wordish(hay[end])
        if before_ok and after_ok:
            return True
        start = idx + 1


def article_matches(article: Article, keywords: KeywordSet) -> bool:
    return any(
        phrase_in_text(kw, article.title) or phrase_in_text(kw, article.body)
        for kw in keywords.keywords
    )


def filter_by_keywords(articles: Sequence[Article], keywords: KeywordSet) -> list[Article]:
    """Retain articles whose title or body contains at least one keyword
    phrase; input order preserved. Idempotent."""
    return [a for a in articles if article_matches(a, keywords)]


def filter_by_date_window(
    articles: Sequence[Article],
    start: datetime.date = DEFAULT_WINDOW_START,
    end: datetime.date = DEFAULT_WINDOW_END,
) -> list[Article]:
    """Retain articles published within [start, end], inclusive."""
    return [a for a in articles if start <= a.published_at <= end]


def dedup(articles: Sequence[Article]) -> list[Article]:
    """One article per url; syndication reuses titles, so the url is the
    dedup key. Among duplicates the earliest published_at wins (ties
    broken by id), and output keeps the position of each url's first
    appearance."""
    best: dict[str, Article] = {}
    order: list[str] = []
    for article in articles:
        if article.url not in best:
            best[article.url] = article
            order.append(article.url)
        else:
            kept = best[article.url]
            if (article.published_at, article.id) < (kept.published_at, kept.id):
                best[article.url] = article
    return [best[url] for url in order]


def corpus_stats(articles: Sequence[Article], extraction_results: Iterable) -> CorpusStats:
    """Per-country counts plus the share of articles whose extraction
    found at least one impact. ``extraction_results`` is anything with
    ``article_id`` and ``impacts`` attributes.

    Raises ConsistencyError when a result references an unknown article.
    """
    ids = {a.id for a in articles}
    with_impacts: set[str] = set()
    for result in extraction_results:
        if result.article_id not in ids:
            raise ConsistencyError(
                f"extraction record references unknown article {result.article_id!r}"
            )
        if result.impacts:
            with_impacts.add(result.article_id)
    per_country: dict[str, int] = {}
    for article in articles:
        per_country[article.country] = per_country.get(article.country, 0) + 1
    return CorpusStats(
        total_articles=len(articles),
        articles_per_country=per_country,
        articles_with_impacts=len(with_impacts),
    )
