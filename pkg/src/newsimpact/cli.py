"""Command-line entry point orchestrating every pipeline stage.

Stages hand off through files in the workdir (no database) so any stage
can be inspected or diffed:

    articles.jsonl            ingest     filtered, deduplicated corpus
    ingest_rejects.jsonl      ingest     malformed input lines
    extraction.jsonl          extract    per-article records (checkpoint)
    dataset.jsonl             curate     curated pair store
    corpus_stats.json         curate     counts and coverage
    splits/{train,validation,test}.jsonl   split
    training/train_{completion,instruct}.jsonl + validation_report.json
    topic_model.json          cluster    unlabeled topic model
    topic_model_labeled.json  label      after manual mapping
    generated.jsonl           generate   generated impacts (checkpoint)
    generation_failures.jsonl generate
    assignments/*.jsonl       classify   per-source category assignments
    reports/report_s2.*       report     quality report
    reports/report_s3.*       report     distribution + gaps

Exit codes: 0 success, 2 config error, 3 stage failure.
"""

import argparse
import datetime
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import (
    corpus,
    dataset,
    evaluation,
    extraction,
    generation,
    taxonomy,
)
from .errors import PipelineError
from .gateway import BackendConfig, Gateway, HttpBackend
from .jsonl import read_records, write_records
from .mock_backend import MockBackend

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

STAGES = (
    "ingest",
    "extract",
    "curate",
    "split",
    "emit-train",
    "cluster",
    "label",
    "generate",
    "classify",
    "serve-annotation",
    "report",
)


class ConfigError(Exception):
    pass


def default_config(corpus_path: str = "demo", workdir: str = "work", seed: int = 0) -> dict:
    """Starter configuration with mock backends (offline-safe)."""
    return {
        "paths": {"corpus": corpus_path, "workdir": workdir},
        "seed": seed,
        "keywords_file": None,
        "date_window": {"enabled": False, "start": "2020-01-01", "end": "2023-06-01"},
        "extraction": {"char_budget": extraction.DEFAULT_CHAR_BUDGET},
        # Demo-sized split; production runs typically use the reference
        # fractions 32035/37689, 5140/37689, 514/37689 (SplitSpec defaults).
        "split": {
            "train_fraction": 0.6,
            "validation_fraction": 0.2,
            "test_fraction": 0.2,
        },
        "taxonomy": {"k": 10, "tau": 0.2, "label_mapping": None},
        "gateway": {"max_in_flight": 4, "transcript": None},
        "backends": {
            "extractor": {"base_url": "mock:", "model_name": "extractor-sim", "mode": "chat"},
            "embedder": {"base_url": "mock:", "model_name": "embedder-sim", "mode": "embedding"},
            "generators": [
                {"kind": "zero_shot_chat", "base_url": "mock:", "model_name": "chat-large", "mode": "chat"},
                {"kind": "zero_shot_instruct", "base_url": "mock:", "model_name": "instruct-7b", "mode": "completion"},
                {"kind": "finetuned_completion", "base_url": "mock:", "model_name": "completion-base-ft", "mode": "completion"},
            ],
            "finetune": {"base_url": "mock:", "model_name": "completion-base", "mode": "finetune"},
        },
        "report": {"adjudication": "first_complete"},
        "annotation": {
            "host": "127.0.0.1",
            "port": 8787,
            "blind": True,
            "claim_ttl_seconds": 1800,
            "static_dir": None,
        },
    }


def demo_corpus_path() -> Path:
    return Path(str(resources.files("newsimpact").joinpath("data/demo_articles.jsonl")))


class Pipeline:
    """Resolved configuration plus stage implementations."""

    def __init__(self, config: dict, *, mock: bool = False, seed: int | None = None,
                 workdir: str | None = None):
        self.config = config
        self.mock = mock
        if seed is not None:
            config["seed"] = seed
        self.seed = int(config.get("seed", 0))
        paths = config.get("paths", {})
        self.workdir = Path(workdir or paths.get("workdir", "work"))
        corpus_path = paths.get("corpus", "demo")
        self.corpus_path = demo_corpus_path() if corpus_path == "demo" else Path(corpus_path)
        self._mock_backend = None
        self._validate()

    # -- config ---------------------------------------------------------------

    def _validate(self) -> None:
        backends = self.config.get("backends", {})
        for role in ("extractor", "embedder", "finetune"):
            if role not in backends:
                raise ConfigError(f"backends.{role} missing from config")
        if not backends.get("generators"):
            raise ConfigError("backends.generators must list at least one generator")
        names = [g.get("model_name") for g in backends["generators"]]
        if len(set(names)) != len(names):
            raise ConfigError("generator model_name values must be unique")
        for role, raw in self._iter_backend_entries():
            if not self._is_mock(raw):
                ref = raw.get("api_key_ref", "")
                if ref and ref not in os.environ:
                    raise ConfigError(
                        f"backend {role!r} needs environment variable {ref} (not set)"
                    )

    def _iter_backend_entries(self):
        backends = self.config.get("backends", {})
        for role in ("extractor", "embedder", "finetune"):
            yield role, backends[role]
        for index, entry in enumerate(backends.get("generators", [])):
            yield f"generators[{index}]", entry

    def _is_mock(self, raw: dict) -> bool:
        return self.mock or str(raw.get("base_url", "")).startswith("mock")

    def _backend_config(self, raw: dict) -> BackendConfig:
        fields = {
            k: raw[k]
            for k in (
                "base_url",
                "model_name",
                "mode",
                "api_key_ref",
                "max_output_tokens",
                "temperature",
                "timeout",
                "max_retries",
            )
            if k in raw
        }
        try:
            return BackendConfig(**fields)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad backend config: {exc}") from exc

    def gateway_for(self, raw: dict) -> tuple[Gateway, BackendConfig]:
        config = self._backend_config(raw)
        gateway_cfg = self.config.get("gateway", {})
        transcript = gateway_cfg.get("transcript")
        if self._is_mock(raw):
            if self._mock_backend is None:
                self._mock_backend = MockBackend(seed=self.seed)
            backend = self._mock_backend
        else:
            backend = HttpBackend()
        gateway = Gateway(
            backend,
            max_in_flight=int(gateway_cfg.get("max_in_flight", 4)),
            transcript_path=self.workdir / transcript if transcript else None,
        )
        return gateway, config

    # -- stage paths ------------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.workdir / name

    def _require(self, name: str, produced_by: str) -> Path:
        path = self.path(name)
        if not path.exists():
            raise PipelineError(f"{path} not found; run `{produced_by}` first")
        return path

    # -- stages -----------------------------------------------------------------

    def ingest(self) -> dict:
        keywords_file = self.config.get("keywords_file")
        keywords = (
            corpus.load_keyword_set(keywords_file)
            if keywords_file
            else corpus.default_keyword_set()
        )
        result = corpus.load_articles(self.corpus_path)
        articles = corpus.filter_by_keywords(result.articles, keywords)
        window = self.config.get("date_window", {})
        if window.get("enabled"):
            articles = corpus.filter_by_date_window(
                articles,
                datetime.date.fromisoformat(window.get("start", "2020-01-01")),
                datetime.date.fromisoformat(window.get("end", "2023-06-01")),
            )
        articles = corpus.dedup(articles)
        write_records(self.path("articles.jsonl"), (a.to_record() for a in articles))
        write_records(
            self.path("ingest_rejects.jsonl"), (r.to_record() for r in result.rejects)
        )
        return {
            "loaded": len(result.articles),
            "rejected": len(result.rejects),
            "retained": len(articles),
        }

    def _load_articles_stage(self) -> list[corpus.Article]:
        path = self._require("articles.jsonl", "ingest")
        return [
            corpus.Article(
                id=r["id"],
                url=r["url"],
                domain=r["domain"],
                country=r["country"],
                published_at=datetime.date.fromisoformat(r["published_at"]),
                title=r["title"],
                body=r["body"],
            )
            for r in read_records(path)
        ]

    def extract(self) -> dict:
        articles = self._load_articles_stage()
        gateway, config = self.gateway_for(self.config["backends"]["extractor"])
        budget = int(self.config.get("extraction", {}).get("char_budget", extraction.DEFAULT_CHAR_BUDGET))
        records = extraction.extract_corpus(
            articles, gateway, config, self.path("extraction.jsonl"), budget
        )
        with_impacts = sum(1 for r in records if r.impacts)
        return {"articles": len(articles), "records": len(records), "with_impacts": with_impacts}

    def curate(self) -> dict:
        articles = self._load_articles_stage()
        records = [
            extraction.ExtractionRecord.from_record(r)
            for r in read_records(self._require("extraction.jsonl", "extract"))
        ]
        pairs = extraction.build_pairs(records)
        curated = dataset.curate(pairs, dataset.corpus_hash([a.id for a in articles]))
        dataset.write_pairs(self.path("dataset.jsonl"), curated.pairs)
        stats = corpus.corpus_stats(articles, records)
        stats_path = self.path("corpus_stats.json")
        with open(stats_path, "w", encoding="utf-8") as fh:
            json.dump(stats.to_record(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        return {"pairs": len(pairs), "coverage_percent": stats.coverage_percent()}

    def _split_spec(self) -> dataset.SplitSpec:
        raw = self.config.get("split", {})
        return dataset.SplitSpec(
            train_fraction=raw.get("train_fraction", 32035 / 37689),
            validation_fraction=raw.get("validation_fraction", 5140 / 37689),
            test_fraction=raw.get("test_fraction", 514 / 37689),
            seed=int(raw.get("seed", self.seed)),
            group_by_article=bool(raw.get("group_by_article", False)),
        )

    def split(self) -> dict:
        pairs = dataset.read_pairs(self._require("dataset.jsonl", "curate"))
        curated = dataset.curate(pairs)
        train, validation, test = dataset.split_dataset(curated, self._split_spec())
        for name, part in (("train", train), ("validation", validation), ("test", test)):
            dataset.write_pairs(self.path(f"splits/{name}.jsonl"), part)
        return {"train": len(train), "validation": len(validation), "test": len(test)}

    def emit_train(self) -> dict:
        train = dataset.read_pairs(self._require("splits/train.jsonl", "split"))
        reports = {}
        for file_format in dataset.TRAINING_FORMATS:
            path = self.path(f"training/train_{file_format}.jsonl")
            dataset.emit_training_file(train, file_format, path)
            record = dataset.validate_dataset(path, file_format).to_record()
            # Workdir-relative so reruns in different workdirs byte-match.
            record["path"] = path.relative_to(self.workdir).as_posix()
            reports[file_format] = record
        report_path = self.path("training/validation_report.json")
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(reports, fh, sort_keys=True, indent=1)
            fh.write("\n")
        violations = sum(len(r["violations"]) for r in reports.values())
        if violations:
            raise PipelineError(f"emitted training files failed validation ({violations} violations)")
        return {"examples": len(train), "violations": 0}

    def cluster(self) -> dict:
        pairs = dataset.read_pairs(self._require("dataset.jsonl", "curate"))
        gateway, config = self.gateway_for(self.config["backends"]["embedder"])
        tax = self.config.get("taxonomy", {})
        model = taxonomy.cluster_impacts(
            [p.impact for p in pairs],
            gateway,
            config,
            k=int(tax.get("k", 10)),
            seed=int(tax.get("seed", self.seed)),
            ids=[p.pair_id for p in pairs],
            tau=float(tax.get("tau", 0.2)),
        )
        taxonomy.save_model(model, self.path("topic_model.json"))
        return {"clusters": len(model.clusters), "statements": len(pairs)}

    def label(self, mapping: str | None = None) -> dict:
        mapping_path = mapping or self.config.get("taxonomy", {}).get("label_mapping")
        if not mapping_path:
            raise ConfigError("label stage needs --mapping or taxonomy.label_mapping")
        model = taxonomy.load_model(self._require("topic_model.json", "cluster"))
        labeled = taxonomy.assign_labels(model, mapping_path)
        taxonomy.save_model(labeled, self.path("topic_model_labeled.json"))
        return {"clusters": len(labeled.clusters), "labels": len(set(labeled.label_map.values()))}

    def generate(self) -> dict:
        test = dataset.read_pairs(self._require("splits/test.jsonl", "split"))
        specs = []
        shared_gateway = None
        for raw in self.config["backends"]["generators"]:
            gateway, config = self.gateway_for(raw)
            shared_gateway = gateway
            specs.append(generation.GeneratorSpec(config, raw.get("kind", "zero_shot_chat")))
        results, failures = generation.generate_batch(
            test, shared_gateway, specs, self.path("generated.jsonl")
        )
        write_records(
            self.path("generation_failures.jsonl"), (f.to_record() for f in failures)
        )
        return {"generated": len(results), "failures": len(failures)}

    def classify(self) -> dict:
        model = taxonomy.load_model(self._require("topic_model_labeled.json", "label"))
        gateway, config = self.gateway_for(self.config["backends"]["embedder"])
        test = dataset.read_pairs(self._require("splits/test.jsonl", "split"))
        sources: dict[str, list[taxonomy.CategoryAssignment]] = {}
        sources["test_dataset"] = taxonomy.classify_impacts(
            model, [p.impact for p in test], gateway, config, [p.pair_id for p in test]
        )
        generated_path = self.path("generated.jsonl")
        if generated_path.exists():
            by_model: dict[str, list[generation.GeneratedImpact]] = {}
            for record in read_records(generated_path):
                impact = generation.GeneratedImpact.from_record(record)
                by_model.setdefault(impact.model_name, []).append(impact)
            for model_name in sorted(by_model):
                impacts = by_model[model_name]
                sources[model_name] = taxonomy.classify_impacts(
                    model,
                    [g.text for g in impacts],
                    gateway,
                    config,
                    [g.id for g in impacts],
                )
        for source, assignments in sources.items():
            write_records(
                self.path(f"assignments/{source}.jsonl"),
                (a.to_record() for a in assignments),
            )
        return {source: len(assignments) for source, assignments in sources.items()}

    def serve_annotation(self) -> dict:
        from .annotation_service import TaskStore, serve

        generated = [
            generation.GeneratedImpact.from_record(r)
            for r in read_records(self._require("generated.jsonl", "generate"))
        ]
        annotation_cfg = self.config.get("annotation", {})
        store = TaskStore(
            self.path("annotation_journal.jsonl"),
            self.path("annotations.jsonl"),
            claim_ttl=float(annotation_cfg.get("claim_ttl_seconds", 1800)),
            blind=bool(annotation_cfg.get("blind", True)),
        )
        existing = {t.generated_impact_id for t in store._tasks.values()}
        new = [g for g in generated if g.id not in existing]
        if new:
            store.create_tasks(new)
        static_dir = annotation_cfg.get("static_dir")
        serve(
            store,
            host=annotation_cfg.get("host", "127.0.0.1"),
            port=int(annotation_cfg.get("port", 8787)),
            static_dir=static_dir,
        )
        return {}

    def report(self, annotations_path: str | None = None) -> dict:
        generated = [
            generation.GeneratedImpact.from_record(r)
            for r in read_records(self._require("generated.jsonl", "generate"))
        ]
        annotations_file = Path(annotations_path) if annotations_path else self.path("annotations.jsonl")
        if not annotations_file.exists():
            raise PipelineError(
                f"{annotations_file} not found; export annotations before reporting"
            )
        raw_annotations = evaluation.read_annotations(annotations_file)
        strategy = self.config.get("report", {}).get("adjudication", "first_complete")
        adjudicated = evaluation.adjudicate(raw_annotations, strategy)
        quality = evaluation.aggregate_report(adjudicated, generated)

        assignments_dir = self.path("assignments")
        if not assignments_dir.exists():
            raise PipelineError("assignments/ not found; run `classify` first")
        per_source: dict[str, list[taxonomy.CategoryAssignment]] = {}
        for path in sorted(assignments_dir.glob("*.jsonl")):
            per_source[path.stem] = [
                taxonomy.CategoryAssignment(r["statement_id"], r["category"], r["score"])
                for r in read_records(path)
            ]
        ordered = {"test_dataset": per_source.pop("test_dataset")}
        ordered.update(sorted(per_source.items()))
        comparison = evaluation.compare_distributions(ordered)
        paths = evaluation.render_reports(quality, comparison, self.path("reports"))
        return {"reports": [str(p) for p in paths], "gap_cells": len(comparison.gap_cells)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsimpact",
        description=(
            "Impact assessment pipeline over news coverage of AI: "
            "ingest articles, extract description/impact pairs, curate and split "
            "the dataset, emit fine-tuning files, categorize impacts, generate "
            "candidate impacts, and evaluate them."
        ),
    )
    parser.add_argument("--config", help="pipeline config JSON (default: built-in mock demo)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--mock", action="store_true", help="force mock backends everywhere")
    parser.add_argument("--workdir", default=None, help="override the config workdir")
    sub = parser.add_subparsers(dest="stage", required=True)

    sub.add_parser("ingest", help="load, keyword-filter, and deduplicate the corpus "
                                  "(reads the corpus path; writes articles.jsonl, ingest_rejects.jsonl)")
    sub.add_parser("extract", help="run both extraction prompts per article "
                                   "(reads articles.jsonl; writes extraction.jsonl, resumable)")
    sub.add_parser("curate", help="build the curated pair dataset and corpus stats "
                                  "(reads extraction.jsonl; writes dataset.jsonl, corpus_stats.json)")
    sub.add_parser("split", help="seeded train/validation/test split "
                                 "(reads dataset.jsonl; writes splits/*.jsonl)")
    sub.add_parser("emit-train", help="emit and validate fine-tuning files "
                                      "(reads splits/train.jsonl; writes training/*)")
    sub.add_parser("cluster", help="cluster impact statements into topics "
                                   "(reads dataset.jsonl; writes topic_model.json)")
    label_parser = sub.add_parser("label", help="install the manual cluster-to-category mapping "
                                                "(reads topic_model.json; writes topic_model_labeled.json)")
    label_parser.add_argument("--mapping", help="cluster_id<TAB>label mapping file")
    sub.add_parser("generate", help="generate impacts for the test split per configured model "
                                    "(reads splits/test.jsonl; writes generated.jsonl, resumable)")
    sub.add_parser("classify", help="assign categories to test and generated impacts "
                                    "(reads topic_model_labeled.json, splits/test.jsonl, generated.jsonl; "
                                    "writes assignments/*.jsonl)")
    sub.add_parser("serve-annotation", help="serve the annotation HTTP API and UI "
                                            "(reads generated.jsonl; appends annotations.jsonl)")
    report_parser = sub.add_parser("report", help="aggregate annotations and distributions into reports "
                                                  "(reads annotations, assignments/; writes reports/)")
    report_parser.add_argument("--annotations", help="annotation store path (default workdir/annotations.jsonl)")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.config:
            with open(ns.config, encoding="utf-8") as fh:
                config = json.load(fh)
        else:
            config = default_config()
        pipeline = Pipeline(config, mock=ns.mock, seed=ns.seed, workdir=ns.workdir)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG

    stage = ns.stage
    try:
        if stage == "ingest":
            summary = pipeline.ingest()
        elif stage == "extract":
            summary = pipeline.extract()
        elif stage == "curate":
            summary = pipeline.curate()
        elif stage == "split":
            summary = pipeline.split()
        elif stage == "emit-train":
            summary = pipeline.emit_train()
        elif stage == "cluster":
            summary = pipeline.cluster()
        elif stage == "label":
            summary = pipeline.label(ns.mapping)
        elif stage == "generate":
            summary = pipeline.generate()
        elif stage == "classify":
            summary = pipeline.classify()
        elif stage == "serve-annotation":
            summary = pipeline.serve_annotation()
        elif stage == "report":
            summary = pipeline.report(ns.annotations)
        else:  # pragma: no cover - argparse enforces choices
            raise ValueError(stage)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "stage": stage, "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(
            json.dumps({"error": type(exc).__name__, "stage": stage, "detail": str(exc)}),
            file=sys.stderr,
        )
        return EXIT_STAGE
    print(json.dumps({"stage": stage, **summary}, sort_keys=True))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
