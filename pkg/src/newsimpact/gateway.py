"""Uniform access to model backends: chat, completion, embeddings, and
fine-tune jobs over HTTP, plus retry/backoff, bounded concurrency, and a
redacted transcript log.

The wire protocol follows the de-facto chat/completions/embeddings JSON
shape so hosted GPT-family endpoints and self-hosted Mistral servers
plug in unmodified:

    chat        POST {base}/chat/completions   {model, messages, temperature, max_tokens}
    completion  POST {base}/completions        {model, prompt, temperature, max_tokens}
    embeddings  POST {base}/embeddings         {model, input}
    fine-tune   POST {base}/fine_tuning/jobs   {model, training_file}
                GET  {base}/fine_tuning/jobs/{id}

API keys are resolved from the environment variable named in
``BackendConfig.api_key_ref`` at request time and never serialized into
logs or reports.
"""

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import requests

from .errors import (
    AuthError,
    GatewayError,
    ProtocolError,
    TransientBackendError,
    UnknownJobError,
)
from .jsonl import append_record

MODES = ("chat", "completion", "embedding", "finetune")

BACKOFF_BASE_SECONDS = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_SECONDS = 60.0
BACKOFF_JITTER = 0.2

DEFAULT_MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    model_name: str
    mode: str
    api_key_ref: str = ""
    max_output_tokens: int = 512
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def resolve_api_key(self) -> str:
        if not self.api_key_ref:
            return ""
        key = os.environ.get(self.api_key_ref)
        if key is None:
            raise AuthError(f"environment variable {self.api_key_ref} is not set")
        return key


@dataclass
class ModelResponse:
    text: str
    finish_reason: str  # stop | length | error
    request_fingerprint: str
    retries: int = 0


@dataclass
class FineTuneJob:
    job_id: str
    status: str  # pending | running | succeeded | failed
    result_model_name: str | None = None
    training_file_ref: str = ""
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "job_id": self.job_id,
            "status": self.status,
            "result_model_name": self.result_model_name,
            "training_file_ref": self.training_file_ref,
            "error": self.error,
        }


def request_fingerprint(config: BackendConfig, payload: Any) -> str:
    """Deterministic hash of (model, mode, payload, sampling params)."""
    blob = json.dumps(
        {
            "model": config.model_name,
            "mode": config.mode,
            "payload": payload,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class HttpBackend:
    """Synchronous HTTP backend speaking the JSON shapes above."""

    def __init__(self, session: requests.Session | None = None):
        self._session = session or requests.Session()

    def _post(self, config: BackendConfig, path: str, body: dict) -> dict:
        return self._request(config, "POST", path, body)

    def _get(self, config: BackendConfig, path: str) -> dict:
        return self._request(config, "GET", path, None)

    def _request(self, config: BackendConfig, method: str, path: str, body: dict | None) -> dict:
        url = config.base_url.rstrip("/") + path
        headers = {}
        key = config.resolve_api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._session.request(
                method, url, json=body, headers=headers, timeout=config.timeout
            )
        except requests.Timeout as exc:
            raise TransientBackendError(f"timeout contacting {url}") from exc
        except requests.ConnectionError as exc:
            raise TransientBackendError(f"connection error contacting {url}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"auth failure ({resp.status_code}) from {url}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"status {resp.status_code} from {url}")
        if resp.status_code >= 400:
            raise GatewayError(f"status {resp.status_code} from {url}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"non-JSON response from {url}") from exc

    def chat(self, config: BackendConfig, messages: Sequence[dict]) -> tuple[str, str]:
        body = {
            "model": config.model_name,
            "messages": list(messages),
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        data = self._post(config, "/chat/completions", body)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason") or "stop"
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response: {exc}") from exc
        return text, finish

    def complete(self, config: BackendConfig, prompt: str) -> tuple[str, str]:
        body = {
            "model": config.model_name,
            "prompt": prompt,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        data = self._post(config, "/completions", body)
        try:
            choice = data["choices"][0]
            text = choice["text"]
            finish = choice.get("finish_reason") or "stop"
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        return text, finish

    def embed(self, config: BackendConfig, texts: Sequence[str]) -> list[list[float]]:
        body = {"model": config.model_name, "input": list(texts)}
        data = self._post(config, "/embeddings", body)
        try:
            vectors = [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embeddings response: {exc}") from exc
        return vectors

    def submit_finetune(self, config: BackendConfig, training_file: str) -> FineTuneJob:
        body = {"model": config.model_name, "training_file": training_file}
        data = self._post(config, "/fine_tuning/jobs", body)
        return _job_from_response(data, training_file)

    def poll_finetune(self, config: BackendConfig, job_id: str) -> FineTuneJob:
        data = self._get(config, f"/fine_tuning/jobs/{job_id}")
        if data.get("error", {}).get("code") == "not_found":
            raise UnknownJobError(f"unknown fine-tune job {job_id}")
        return _job_from_response(data, data.get("training_file", ""))


def _job_from_response(data: dict, training_file: str) -> FineTuneJob:
    try:
        job_id = data["id"]
        status = data["status"]
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed fine-tune response: {exc}") from exc
    return FineTuneJob(
        job_id=job_id,
        status=status,
        result_model_name=data.get("fine_tuned_model"),
        training_file_ref=training_file,
        error=(data.get("error") or {}).get("message") if data.get("error") else None,
    )


class Gateway:
    """Wraps a backend with retry, bounded in-flight concurrency, and a
    transcript log (fingerprint/latency/finish_reason; bodies and keys
    never logged). Handles are shareable across threads.
    """

    def __init__(
        self,
        backend,
        *,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        transcript_path: str | Path | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_rng: random.Random | None = None,
    ):
        self.backend = backend
        self.max_in_flight = max_in_flight
        self._semaphore = threading.Semaphore(max_in_flight)
        self._transcript_path = Path(transcript_path) if transcript_path else None
        self._transcript_lock = threading.Lock()
        self._sleep = sleep
        self._jitter_rng = jitter_rng or random.Random()

    def _backoff_delay(self, attempt: int) -> float:
        delay = min(BACKOFF_CAP_SECONDS, BACKOFF_BASE_SECONDS * BACKOFF_FACTOR**attempt)
        jitter = 1.0 + self._jitter_rng.uniform(-BACKOFF_JITTER, BACKOFF_JITTER)
        return delay * jitter

    def _log(self, record: dict) -> None:
        if self._transcript_path is None:
            return
        with self._transcript_lock:
            append_record(self._transcript_path, record)

    def _call_with_retry(self, config: BackendConfig, fingerprint: str, fn: Callable[[], Any]):
        attempt = 0
        started = time.monotonic()
        while True:
            try:
                with self._semaphore:
                    result = fn()
            except TransientBackendError:
                if attempt >= config.max_retries:
                    self._log(
                        {
                            "fingerprint": fingerprint,
                            "model": config.model_name,
                            "mode": config.mode,
                            "latency_ms": round((time.monotonic() - started) * 1000, 3),
                            "finish_reason": "error",
                            "retries": attempt,
                            "error": "transient failure after retries",
                        }
                    )
                    raise
                self._sleep(self._backoff_delay(attempt))
                attempt += 1
                continue
            except GatewayError as exc:
                self._log(
                    {
                        "fingerprint": fingerprint,
                        "model": config.model_name,
                        "mode": config.mode,
                        "latency_ms": round((time.monotonic() - started) * 1000, 3),
                        "finish_reason": "error",
                        "retries": attempt,
                        "error": type(exc).__name__,
                    }
                )
                raise
            return result, attempt

    def chat_complete(self, config: BackendConfig, messages: Sequence[dict]) -> ModelResponse:
        """First choice text for an ordered system/user message list."""
        if config.mode != "chat":
            raise ValueError(f"chat_complete requires mode=chat, got {config.mode!r}")
        if not messages:
            raise ValueError("empty message list")
        for message in messages:
            if "role" not in message or "content" not in message:
                raise ValueError("each message needs role and content")
        fingerprint = request_fingerprint(config, list(messages))
        (text, finish), retries = self._call_with_retry(
            config, fingerprint, lambda: self.backend.chat(config, messages)
        )
        self._log(
            {
                "fingerprint": fingerprint,
                "model": config.model_name,
                "mode": config.mode,
                "finish_reason": finish,
                "retries": retries,
            }
        )
        return ModelResponse(text, finish, fingerprint, retries)

    def text_complete(self, config: BackendConfig, prompt: str) -> ModelResponse:
        if config.mode != "completion":
            raise ValueError(f"text_complete requires mode=completion, got {config.mode!r}")
        if not prompt:
            raise ValueError("empty prompt")
        fingerprint = request_fingerprint(config, prompt)
        (text, finish), retries = self._call_with_retry(
            config, fingerprint, lambda: self.backend.complete(config, prompt)
        )
        self._log(
            {
                "fingerprint": fingerprint,
                "model": config.model_name,
                "mode": config.mode,
                "finish_reason": finish,
                "retries": retries,
            }
        )
        return ModelResponse(text, finish, fingerprint, retries)

    def embed(self, config: BackendConfig, texts: Sequence[str]) -> list[list[float]]:
        """One vector per input, order-aligned, all the same dimension."""
        if config.mode != "embedding":
            raise ValueError(f"embed requires mode=embedding, got {config.mode!r}")
        if not texts:
            raise ValueError("no texts to embed")
        fingerprint = request_fingerprint(config, list(texts))
        vectors, retries = self._call_with_retry(
            config, fingerprint, lambda: self.backend.embed(config, texts)
        )
        if len(vectors) != len(texts):
            raise ProtocolError(f"expected {len(texts)} vectors, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise ProtocolError(f"embedding dimension mismatch across batch: {sorted(dims)}")
        self._log(
            {
                "fingerprint": fingerprint,
                "model": config.model_name,
                "mode": config.mode,
                "finish_reason": "stop",
                "retries": retries,
            }
        )
        return vectors

    def submit_finetune(
        self, config: BackendConfig, training_file: str | Path, file_format: str = "completion"
    ) -> FineTuneJob:
        """Validate the training file against its schema, then submit.

        A file failing validation is returned as a failed job carrying
        the first violations verbatim; nothing is sent to the backend.
        """
        if config.mode != "finetune":
            raise ValueError(f"submit_finetune requires mode=finetune, got {config.mode!r}")
        from .dataset import validate_dataset  # local import, avoids cycle at module load

        report = validate_dataset(training_file, file_format)
        if report.violations:
            summary = "; ".join(
                f"line {line}: {msg}" for line, msg in report.violations[:5]
            )
            return FineTuneJob(
                job_id="",
                status="failed",
                training_file_ref=str(training_file),
                error=f"training file rejected: {summary}",
            )
        job = self.backend.submit_finetune(config, str(training_file))
        self._log(
            {
                "fingerprint": request_fingerprint(config, str(training_file)),
                "model": config.model_name,
                "mode": config.mode,
                "finish_reason": "stop",
                "retries": 0,
            }
        )
        return job

    def poll_finetune(self, config: BackendConfig, job_id: str) -> FineTuneJob:
        if config.mode != "finetune":
            raise ValueError(f"poll_finetune requires mode=finetune, got {config.mode!r}")
        return self.backend.poll_finetune(config, job_id)


def with_mode(config: BackendConfig, mode: str) -> BackendConfig:
    """Copy of a config with a different mode (configs are immutable)."""
    return replace(config, mode=mode)
