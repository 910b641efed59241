"""Candidate-impact generation from technology descriptions in three
modes: zero-shot chat, zero-shot instruct, and fine-tuned completion.

Generated-impact store format: line-delimited JSON with all
GeneratedImpact fields; this file feeds evaluation and taxonomy
classification, and doubles as the batch checkpoint (reruns complete
only missing (model, pair) combinations).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import prompts
from .dataset import COMPLETION_STOP, PROMPT_SEPARATOR, Pair
from .errors import EmptyOutputError, GatewayError
from .gateway import BackendConfig, Gateway
from .jsonl import read_records, write_records

MODES = ("zero_shot_chat", "zero_shot_instruct", "finetuned_completion")


@dataclass(frozen=True)
class GeneratedImpact:
    id: str
    source_pair_id: str
    description_used: str
    model_name: str
    mode: str
    text: str
    fingerprint: str
    finish_reason: str = "stop"

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "source_pair_id": self.source_pair_id,
            "description_used": self.description_used,
            "model_name": self.model_name,
            "mode": self.mode,
            "text": self.text,
            "fingerprint": self.fingerprint,
            "finish_reason": self.finish_reason,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GeneratedImpact":
        return cls(
            id=record["id"],
            source_pair_id=record["source_pair_id"],
            description_used=record["description_used"],
            model_name=record["model_name"],
            mode=record["mode"],
            text=record["text"],
            fingerprint=record["fingerprint"],
            finish_reason=record.get("finish_reason", "stop"),
        )


@dataclass(frozen=True)
class GeneratorSpec:
    """One generation route: a backend config plus which of the three
    modes it is driven in."""

    config: BackendConfig
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in MODES:
            raise ValueError(f"unknown generation mode {self.kind!r}")
        expected = "chat" if self.kind == "zero_shot_chat" else "completion"
        if self.config.mode != expected:
            raise ValueError(
                f"{self.kind} requires backend mode {expected!r}, got {self.config.mode!r}"
            )


def _impact_id(model_name: str, source_pair_id: str) -> str:
    return f"{model_name}::{source_pair_id}"


def generate_zero_shot(
    description: str,
    gateway: Gateway,
    config: BackendConfig,
    template: prompts.PromptTemplate,
    source_pair_id: str = "",
) -> GeneratedImpact:
    """One impact statement via the zero-shot route matching the
    template: chat for P3, instruct-served completion for P4. An empty
    reply is retried once, then reported as a failure."""
    if not description:
        raise ValueError("empty description")
    if template.id not in ("P3", "P4"):
        raise ValueError(f"zero-shot generation uses P3 or P4, got {template.id}")
    rendered = prompts.render_prompt(template, description)
    if template.id == "P3":
        if config.mode != "chat":
            raise ValueError("P3 generation requires a chat backend")
        mode = "zero_shot_chat"
        call = lambda: gateway.chat_complete(config, [{"role": "user", "content": rendered}])
    else:
        if config.mode != "completion":
            raise ValueError("P4 generation requires a completion backend")
        mode = "zero_shot_instruct"
        call = lambda: gateway.text_complete(config, rendered)
    response = call()
    if not response.text.strip():
        response = call()
        if not response.text.strip():
            raise EmptyOutputError(
                f"empty output for pair {source_pair_id or '?'} from {config.model_name}"
            )
    return GeneratedImpact(
        id=_impact_id(config.model_name, source_pair_id),
        source_pair_id=source_pair_id,
        description_used=description,
        model_name=config.model_name,
        mode=mode,
        text=response.text.strip(),
        fingerprint=response.request_fingerprint,
        finish_reason=response.finish_reason,
    )


def finetuned_prompt(description: str) -> str:
    """Prompt a fine-tuned completion model exactly the way the training
    file built its prompts (shared separator constant)."""
    return description + PROMPT_SEPARATOR


def generate_finetuned(
    description: str,
    gateway: Gateway,
    config: BackendConfig,
    source_pair_id: str = "",
) -> GeneratedImpact:
    """One impact from a fine-tuned completion model. The completion is
    cut at the first stop marker and the training format's leading
    space is stripped; output lacking the marker is kept and flagged
    with finish_reason=length."""
    if not description:
        raise ValueError("empty description")
    if config.mode != "completion":
        raise ValueError("fine-tuned generation requires a completion backend")
    prompt = finetuned_prompt(description)
    response = gateway.text_complete(config, prompt)
    raw = response.text
    finish = response.finish_reason
    marker = raw.find(COMPLETION_STOP)
    if marker >= 0:
        text = raw[:marker]
    else:
        text = raw
        finish = "length"
    text = text.lstrip().strip()
    if not text:
        response = gateway.text_complete(config, prompt)
        raw = response.text
        marker = raw.find(COMPLETION_STOP)
        text = (raw[:marker] if marker >= 0 else raw).strip()
        if not text:
            raise EmptyOutputError(
                f"empty output for pair {source_pair_id or '?'} from {config.model_name}"
            )
    return GeneratedImpact(
        id=_impact_id(config.model_name, source_pair_id),
        source_pair_id=source_pair_id,
        description_used=description,
        model_name=config.model_name,
        mode="finetuned_completion",
        text=text,
        fingerprint=response.request_fingerprint,
        finish_reason=finish,
    )


def _generate_one(pair: Pair, gateway: Gateway, spec: GeneratorSpec) -> GeneratedImpact:
    if spec.kind == "zero_shot_chat":
        return generate_zero_shot(pair.description, gateway, spec.config, prompts.P3, pair.pair_id)
    if spec.kind == "zero_shot_instruct":
        return generate_zero_shot(pair.description, gateway, spec.config, prompts.P4, pair.pair_id)
    return generate_finetuned(pair.description, gateway, spec.config, pair.pair_id)


@dataclass
class GenerationFailure:
    model_name: str
    source_pair_id: str
    error: str

    def to_record(self) -> dict:
        return {
            "model_name": self.model_name,
            "source_pair_id": self.source_pair_id,
            "error": self.error,
        }


def generate_batch(
    test_set: Sequence[Pair],
    gateway: Gateway,
    specs: Sequence[GeneratorSpec],
    store_path: str | Path | None = None,
) -> tuple[list[GeneratedImpact], list[GenerationFailure]]:
    """One GeneratedImpact per (pair, generator). Resumes from the store
    when given: combinations already present are skipped. Output is
    sorted by (model_name, source_pair_id) and the store rewritten in
    that order, so completion order never shows in the file. Failed
    pairs are returned per model instead of aborting the batch."""
    if not test_set:
        raise ValueError("empty test set")
    done: dict[tuple[str, str], GeneratedImpact] = {}
    if store_path is not None:
        store_path = Path(store_path)
        if store_path.exists():
            for record in read_records(store_path):
                impact = GeneratedImpact.from_record(record)
                done[(impact.model_name, impact.source_pair_id)] = impact

    tasks = [
        (pair, spec)
        for spec in specs
        for pair in test_set
        if (spec.config.model_name, pair.pair_id) not in done
    ]
    failures: list[GenerationFailure] = []

    def run(task: tuple[Pair, GeneratorSpec]):
        pair, spec = task
        try:
            return _generate_one(pair, gateway, spec)
        except (GatewayError, ValueError) as exc:
            return GenerationFailure(spec.config.model_name, pair.pair_id, str(exc))

    if tasks:
        with ThreadPoolExecutor(max_workers=gateway.max_in_flight) as pool:
            outcomes = list(pool.map(run, tasks))
        for outcome in outcomes:
            if isinstance(outcome, GenerationFailure):
                failures.append(outcome)
            else:
                done[(outcome.model_name, outcome.source_pair_id)] = outcome

    results = sorted(done.values(), key=lambda g: (g.model_name, g.source_pair_id))
    if store_path is not None:
        write_records(store_path, (g.to_record() for g in results))
    failures.sort(key=lambda f: (f.model_name, f.source_pair_id))
    return results, failures
