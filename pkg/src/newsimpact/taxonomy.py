"""Impact taxonomy: cluster impact statements over embeddings, extract
cluster keywords, accept a manual cluster-to-category mapping, and
classify statements into the fixed 10-category label set.

The clustering is spherical k-means over unit-normalized embeddings
(seeded, deterministic) with class-based TF-IDF keywords, a
backend-agnostic equivalent of heavier topic-modeling stacks. The
scientific content is the labeled category map, not the clustering
algorithm, so the algorithm favors reproducibility.
"""

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import accumulate_clusters, assign_nearest
from .gateway import BackendConfig, Gateway

CATEGORY_LABELS: tuple[str, ...] = (
    "Societal Impacts",
    "Economic Impacts",
    "Privacy",
    "Autonomous System Safety",
    "Physical and Digital Harms",
    "AI Governance",
    "Accuracy and Reliability",
    "AI-generated Content",
    "Security",
    "Miscellaneous Impacts",
)

MISCELLANEOUS_LABEL = "Miscellaneous Impacts"

CATEGORY_DESCRIPTIONS: dict[str, str] = {
    "Societal Impacts": (
        "Effects on public discourse and social trust: disinformation, "
        "manipulated media used for fraud or defamation, and bias against "
        "demographic groups."
    ),
    "Economic Impacts": (
        "Labor-market and industry effects of deploying AI, chiefly job "
        "displacement and economic uncertainty."
    ),
    "Privacy": (
        "Violations arising from monitoring and surveillance uses such as "
        "facial recognition, threatening privacy, free speech, and civil rights."
    ),
    "Autonomous System Safety": (
        "Safety hazards from self-operating systems: vehicle crashes, drone "
        "incidents, and related physical risk."
    ),
    "Physical and Digital Harms": (
        "Direct harm to people online or offline, from abusive system "
        "behavior and wrongful outcomes to existential and warfare risks."
    ),
    "AI Governance": (
        "Regulatory and accountability gaps: opaque models, unexplainable "
        "decisions, and the need for oversight of development and deployment."
    ),
    "Accuracy and Reliability": (
        "Unreliable outputs: hallucinated or false statements, unverifiable "
        "sources, and overtrust leading to automation bias."
    ),
    "AI-generated Content": (
        "Challenges of detecting synthetic text, images, and voices, and the "
        "downstream misuse of undetectable generated content."
    ),
    "Security": (
        "Exploitation of AI for attacks: malware, phishing, fraud, and "
        "prompt-injection style vulnerabilities."
    ),
    "Miscellaneous Impacts": (
        "Catch-all for remaining concerns, such as training cost, "
        "environmental footprint, and cognitive or emotional effects."
    ),
}


@dataclass(frozen=True)
class ImpactCategory:
    label: str
    description: str

    def __post_init__(self) -> None:
        if self.label not in CATEGORY_LABELS:
            raise ValueError(f"unknown category label {self.label!r}")


CATEGORIES: tuple[ImpactCategory, ...] = tuple(
    ImpactCategory(label, CATEGORY_DESCRIPTIONS[label]) for label in CATEGORY_LABELS
)


@dataclass
class Cluster:
    cluster_id: int
    centroid: np.ndarray
    keywords: list[tuple[str, float]]
    representative_examples: list[str]


@dataclass
class TopicModel:
    clusters: list[Cluster]
    label_map: dict[int, str] = field(default_factory=dict)
    embedding_backend_fingerprint: str = ""
    seed: int = 0
    tau: float = 0.2

    @property
    def is_labeled(self) -> bool:
        return all(c.cluster_id in self.label_map for c in self.clusters)

    def centroid_matrix(self) -> np.ndarray:
        ordered = sorted(self.clusters, key=lambda c: c.cluster_id)
        return np.stack([c.centroid for c in ordered])


@dataclass(frozen=True)
class CategoryAssignment:
    statement_id: str
    category: str
    score: float

    def to_record(self) -> dict:
        return {"statement_id": self.statement_id, "category": self.category, "score": self.score}


# Function words excluded from cluster keywords.
_STOPWORDS = frozenset(
    """a about after all also an and any are as at be because been before but by can
    could do does for from had has have how if in into is it its may more most not
    of on or other our over s should so some such t than that the their them then
    there these they this to under up was we were what when which while who will
    with would""".split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")

KEYWORDS_PER_CLUSTER = 10
REPRESENTATIVES_PER_CLUSTER = 3
MAX_KMEANS_ITERATIONS = 100
EMBED_BATCH_SIZE = 64


def backend_fingerprint(config: BackendConfig) -> str:
    blob = f"{config.model_name}:{config.mode}"
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def embed_statements(
    statements: Sequence[str], gateway: Gateway, config: BackendConfig
) -> np.ndarray:
    """Embed in order-aligned batches and unit-normalize rows."""
    vectors: list[list[float]] = []
    for start in range(0, len(statements), EMBED_BATCH_SIZE):
        vectors.extend(gateway.embed(config, statements[start : start + EMBED_BATCH_SIZE]))
    matrix = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def _spherical_kmeans(
    embeddings: np.ndarray, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded spherical k-means. Returns (centroids, labels, sims) with
    labels equal to the nearest-centroid assignment against the final
    centroids (the fixed point checked by the brute-force oracle)."""
    n = embeddings.shape[0]
    rng = np.random.RandomState(seed)
    centroids = embeddings[rng.choice(n, size=k, replace=False)].copy()
    labels, best = assign_nearest(embeddings, centroids)
    for _ in range(MAX_KMEANS_ITERATIONS):
        sums, counts = accumulate_clusters(embeddings, labels, k)
        # Reseed empty clusters to the points farthest from their
        # assigned centroid, lowest index first, one point per cluster.
        empty = [j for j in range(k) if counts[j] == 0]
        if empty:
            order = np.argsort(best, kind="stable")
            taken = 0
            for j in empty:
                i = int(order[taken])
                taken += 1
                sums[j] = embeddings[i]
                counts[j] = 1
        centroids = _normalize_rows(sums / counts[:, None])
        new_labels, best = assign_nearest(embeddings, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, best = assign_nearest(embeddings, centroids)
    return centroids, labels, best


def _cluster_keywords(
    statements: Sequence[str], labels: np.ndarray, k: int
) -> list[list[tuple[str, float]]]:
    """Class-based TF-IDF: term frequency within the cluster scaled by
    inverse cluster frequency. Weights are non-negative; ties break
    alphabetically."""
    counts: list[dict[str, int]] = [{} for _ in range(k)]
    for statement, label in zip(statements, labels):
        bucket = counts[int(label)]
        for token in _TOKEN_RE.findall(statement.lower()):
            if len(token) >= 2 and token not in _STOPWORDS:
                bucket[token] = bucket.get(token, 0) + 1
    df: dict[str, int] = {}
    for bucket in counts:
        for token in bucket:
            df[token] = df.get(token, 0) + 1
    keywords = []
    for bucket in counts:
        total = sum(bucket.values())
        if total == 0:
            keywords.append([])
            continue
        weighted = [
            (token, (freq / total) * math.log(1 + k / df[token]))
            for token, freq in bucket.items()
        ]
        weighted.sort(key=lambda tw: (-tw[1], tw[0]))
        keywords.append([(t, round(w, 6)) for t, w in weighted[:KEYWORDS_PER_CLUSTER]])
    return keywords


def cluster_impacts(
    statements: Sequence[str],
    gateway: Gateway,
    config: BackendConfig,
    k: int = 10,
    seed: int = 0,
    ids: Sequence[str] | None = None,
    tau: float = 0.2,
) -> TopicModel:
    """Build an unlabeled topic model from impact statements.

    Each cluster carries its unit centroid, top keywords, and the ids of
    its 3 statements nearest the centroid (the material a human uses to
    label the cluster). Rerunning with the same seed and inputs gives
    identical membership.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(statements) < k:
        raise ValueError(f"need at least k={k} statements, got {len(statements)}")
    if ids is None:
        ids = [str(i) for i in range(len(statements))]
    elif len(ids) != len(statements):
        raise ValueError("ids must align with statements")
    embeddings = embed_statements(statements, gateway, config)
    centroids, labels, sims = _spherical_kmeans(embeddings, k, seed)
    keyword_lists = _cluster_keywords(statements, labels, k)
    clusters = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        ranked = sorted(members, key=lambda i: (-sims[i], i))
        representatives = [ids[i] for i in ranked[:REPRESENTATIVES_PER_CLUSTER]]
        clusters.append(
            Cluster(
                cluster_id=j,
                centroid=centroids[j],
                keywords=keyword_lists[j],
                representative_examples=representatives,
            )
        )
    return TopicModel(
        clusters=clusters,
        label_map={},
        embedding_backend_fingerprint=backend_fingerprint(config),
        seed=seed,
        tau=tau,
    )


def parse_label_mapping(path: str | Path) -> dict[int, str]:
    """Mapping file: one ``cluster_id<TAB>label`` line per cluster."""
    mapping: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected cluster_id<TAB>label")
            try:
                cluster_id = int(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad cluster id {parts[0]!r}") from None
            label = parts[1].strip()
            if label not in CATEGORY_LABELS:
                raise ValueError(f"line {lineno}: unknown label {label!r}")
            mapping[cluster_id] = label
    return mapping


def assign_labels(model: TopicModel, mapping_file: str | Path) -> TopicModel:
    """Install a manual cluster-to-category mapping. Every cluster must
    be mapped (several clusters may share one category)."""
    mapping = parse_label_mapping(mapping_file)
    known = {c.cluster_id for c in model.clusters}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ValueError(f"mapping names unknown cluster ids {unknown}")
    missing = sorted(known - set(mapping))
    if missing:
        raise ValueError(f"mapping omits cluster ids {missing}")
    return replace(model, label_map=mapping)


def _require_labeled(model: TopicModel) -> None:
    if not model.is_labeled:
        missing = sorted(
            c.cluster_id for c in model.clusters if c.cluster_id not in model.label_map
        )
        raise ValueError(f"model is unlabeled (clusters {missing} unmapped)")


def classify_embedded(
    model: TopicModel, embeddings: np.ndarray, ids: Sequence[str]
) -> list[CategoryAssignment]:
    """Nearest-centroid classification of pre-embedded, unit-normalized
    statements. Below-threshold similarities route to the catch-all
    category; equal similarity goes to the lowest cluster id."""
    _require_labeled(model)
    centroids = model.centroid_matrix()
    order = sorted(c.cluster_id for c in model.clusters)
    labels, sims = assign_nearest(embeddings, centroids)
    assignments = []
    for statement_id, label_idx, sim in zip(ids, labels, sims):
        score = float(sim)
        if score < model.tau:
            category = MISCELLANEOUS_LABEL
        else:
            category = model.label_map[order[int(label_idx)]]
        assignments.append(CategoryAssignment(statement_id, category, score))
    return assignments


def classify_impacts(
    model: TopicModel,
    statements: Sequence[str],
    gateway: Gateway,
    config: BackendConfig,
    ids: Sequence[str] | None = None,
) -> list[CategoryAssignment]:
    _require_labeled(model)
    if ids is None:
        ids = [str(i) for i in range(len(statements))]
    embeddings = embed_statements(statements, gateway, config)
    return classify_embedded(model, embeddings, ids)


def classify_impact(
    model: TopicModel,
    statement: str,
    gateway: Gateway,
    config: BackendConfig,
    statement_id: str = "0",
) -> CategoryAssignment:
    """Classify one statement into exactly one category."""
    return classify_impacts(model, [statement], gateway, config, [statement_id])[0]


def _percent(count: int, total: int) -> float:
    pct = Decimal(count) * 100 / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def distribution(assignments: Sequence[CategoryAssignment]) -> dict[str, tuple[int, float]]:
    """Per-category (count, percentage) over all 10 categories,
    zero-count categories included. Percentages are half-up to two
    decimals and recompute from the counts."""
    if not assignments:
        raise ValueError("no assignments to summarize")
    counts = {label: 0 for label in CATEGORY_LABELS}
    for assignment in assignments:
        if assignment.category not in counts:
            raise ValueError(f"unknown category {assignment.category!r}")
        counts[assignment.category] += 1
    total = len(assignments)
    return {label: (count, _percent(count, total)) for label, count in counts.items()}


# -- serialization ------------------------------------------------------------


def model_to_json(model: TopicModel) -> dict:
    return {
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "centroid": [float(x) for x in c.centroid],
                "keywords": [[t, w] for t, w in c.keywords],
                "representative_examples": list(c.representative_examples),
            }
            for c in sorted(model.clusters, key=lambda c: c.cluster_id)
        ],
        "label_map": {str(k): v for k, v in sorted(model.label_map.items())},
        "fingerprint": model.embedding_backend_fingerprint,
        "seed": model.seed,
        "tau": model.tau,
    }


def model_from_json(doc: dict) -> TopicModel:
    clusters = [
        Cluster(
            cluster_id=c["cluster_id"],
            centroid=np.asarray(c["centroid"], dtype=np.float64),
            keywords=[(t, w) for t, w in c["keywords"]],
            representative_examples=list(c["representative_examples"]),
        )
        for c in doc["clusters"]
    ]
    return TopicModel(
        clusters=clusters,
        label_map={int(k): v for k, v in doc.get("label_map", {}).items()},
        embedding_backend_fingerprint=doc.get("fingerprint", ""),
        seed=doc.get("seed", 0),
        tau=doc.get("tau", 0.2),
    )


def save_model(model: TopicModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, sort_keys=True, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> TopicModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
