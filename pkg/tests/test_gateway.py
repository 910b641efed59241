"""Gateway behavior: retry policy, mock determinism, embeddings, and
fine-tune job lifecycle."""

import math

import pytest

from newsimpact import dataset
from newsimpact.errors import AuthError, TransientBackendError, UnknownJobError
from newsimpact.gateway import BackendConfig, Gateway, request_fingerprint
from newsimpact.mock_backend import MockBackend


class FlakyBackend:
    """Fails the first N calls with a transient error, then delegates."""

    def __init__(self, inner, fail_times: int, error=TransientBackendError("429")):
        self.inner = inner
        self.remaining = fail_times
        self.error = error

    def _maybe_fail(self):
        if self.remaining > 0:
            self.remaining -= 1
            raise self.error

    def chat(self, config, messages):
        self._maybe_fail()
        return self.inner.chat(config, messages)

    def complete(self, config, prompt):
        self._maybe_fail()
        return self.inner.complete(config, prompt)

    def embed(self, config, texts):
        self._maybe_fail()
        return self.inner.embed(config, texts)


def no_sleep_gateway(backend, **kwargs):
    return Gateway(backend, sleep=lambda s: None, **kwargs)


class TestChatComplete:
    def test_mock_is_deterministic(self, mock_gateway, chat_config):
        messages = [{"role": "user", "content": "X"}]
        first = mock_gateway.chat_complete(chat_config, messages)
        second = mock_gateway.chat_complete(chat_config, messages)
        assert first.text == second.text
        assert first.request_fingerprint == second.request_fingerprint

    def test_transient_429_then_success_records_retry(self, chat_config):
        gateway = no_sleep_gateway(FlakyBackend(MockBackend(seed=7), fail_times=1))
        response = gateway.chat_complete(chat_config, [{"role": "user", "content": "X"}])
        assert response.retries == 1
        assert response.finish_reason == "stop"

    def test_auth_error_not_retried(self, chat_config):
        backend = FlakyBackend(MockBackend(), fail_times=5, error=AuthError("bad key"))
        gateway = no_sleep_gateway(backend)
        with pytest.raises(AuthError):
            gateway.chat_complete(chat_config, [{"role": "user", "content": "X"}])
        assert backend.remaining == 4  # exactly one attempt

    def test_exhausted_retries_raise(self, chat_config):
        gateway = no_sleep_gateway(FlakyBackend(MockBackend(), fail_times=10))
        with pytest.raises(TransientBackendError):
            gateway.chat_complete(chat_config, [{"role": "user", "content": "X"}])

    def test_wrong_mode_rejected(self, completion_config):
        gateway = no_sleep_gateway(MockBackend())
        with pytest.raises(ValueError):
            gateway.chat_complete(completion_config, [{"role": "user", "content": "X"}])


class TestTextComplete:
    def test_mock_text_deterministic_in_prompt(self, mock_gateway, completion_config):
        a = mock_gateway.text_complete(completion_config, "prompt A")
        b = mock_gateway.text_complete(completion_config, "prompt A")
        c = mock_gateway.text_complete(completion_config, "prompt B")
        assert a.text == b.text
        assert a.text != c.text or a.request_fingerprint != c.request_fingerprint

    def test_finish_reason_length_at_token_cap(self, mock_gateway):
        config = BackendConfig(
            base_url="mock:", model_name="m", mode="completion", max_output_tokens=1
        )
        prompt = "a described technology" + dataset.PROMPT_SEPARATOR
        response = mock_gateway.text_complete(config, prompt)
        assert response.finish_reason == "length"
        assert len(response.text.split(" ")) == 1

    def test_empty_prompt_rejected(self, mock_gateway, completion_config):
        with pytest.raises(ValueError):
            mock_gateway.text_complete(completion_config, "")


class TestEmbed:
    def test_identical_text_identical_vector(self, mock_gateway, embedding_config):
        first = mock_gateway.embed(embedding_config, ["hello world"])
        second = mock_gateway.embed(embedding_config, ["hello world"])
        assert first == second
        assert len(first[0]) == 64

    def test_batch_arity(self, mock_gateway, embedding_config):
        vectors = mock_gateway.embed(embedding_config, ["a", "b", "c"])
        assert len(vectors) == 3
        assert len({len(v) for v in vectors}) == 1

    def test_self_cosine_is_one(self, mock_gateway, embedding_config):
        [u], [v] = (
            mock_gateway.embed(embedding_config, ["same text"]),
            mock_gateway.embed(embedding_config, ["same text"]),
        )
        dot = sum(x * y for x, y in zip(u, v))
        norm = math.sqrt(sum(x * x for x in u)) * math.sqrt(sum(y * y for y in v))
        assert abs(dot / norm - 1.0) <= 1e-9

    def test_empty_batch_rejected(self, mock_gateway, embedding_config):
        with pytest.raises(ValueError):
            mock_gateway.embed(embedding_config, [])


class TestFingerprint:
    def test_fingerprint_deterministic_and_sensitive(self, chat_config):
        a = request_fingerprint(chat_config, "payload")
        b = request_fingerprint(chat_config, "payload")
        c = request_fingerprint(chat_config, "other payload")
        assert a == b
        assert a != c

    def test_config_not_mutated(self, mock_gateway, chat_config):
        before = chat_config
        mock_gateway.chat_complete(chat_config, [{"role": "user", "content": "X"}])
        assert chat_config == before  # frozen dataclass; also same values


class TestTranscript:
    def test_transcript_has_no_key_material(self, tmp_path, chat_config, monkeypatch):
        monkeypatch.setenv("TEST_GW_KEY", "sk-super-secret")
        config = BackendConfig(
            base_url="mock:", model_name="m", mode="chat", api_key_ref="TEST_GW_KEY"
        )
        log = tmp_path / "transcript.jsonl"
        gateway = Gateway(MockBackend(), transcript_path=log)
        gateway.chat_complete(config, [{"role": "user", "content": "hello"}])
        content = log.read_text()
        assert "sk-super-secret" not in content
        assert "fingerprint" in content
        assert "hello" not in content  # bodies stay out of the log


def make_training_file(tmp_path):
    pairs = [dataset.Pair("p1", "a tool that sorts mail", "postal jobs shrink", "a1")]
    path = tmp_path / "train.jsonl"
    dataset.emit_training_file(pairs, "completion", path)
    return path


class TestFineTune:
    def test_job_succeeds_after_configured_polls(self, tmp_path, finetune_config):
        gateway = no_sleep_gateway(MockBackend(finetune_polls=3))
        job = gateway.submit_finetune(finetune_config, make_training_file(tmp_path))
        assert job.status == "pending"
        statuses = [gateway.poll_finetune(finetune_config, job.job_id).status for _ in range(3)]
        assert statuses == ["pending", "running", "succeeded"]
        final = gateway.poll_finetune(finetune_config, job.job_id)
        assert final.status == "succeeded"  # never moves backward
        assert final.result_model_name == "completion-model-ft"

    def test_submit_idempotent_per_file_content(self, tmp_path, finetune_config):
        gateway = no_sleep_gateway(MockBackend())
        path = make_training_file(tmp_path)
        assert (
            gateway.submit_finetune(finetune_config, path).job_id
            == gateway.submit_finetune(finetune_config, path).job_id
        )

    def test_invalid_file_fails_with_schema_error(self, tmp_path, finetune_config):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"prompt": "no separator", "completion": ""}\n')
        gateway = no_sleep_gateway(MockBackend())
        job = gateway.submit_finetune(finetune_config, path)
        assert job.status == "failed"
        assert "line 1" in job.error

    def test_poll_unknown_job(self, finetune_config):
        gateway = no_sleep_gateway(MockBackend())
        with pytest.raises(UnknownJobError):
            gateway.poll_finetune(finetune_config, "ftjob-missing")
