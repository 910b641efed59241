"""Deterministic mock backend for tests and offline pipeline runs.

Every reply is a pure function of (request fingerprint, seed): identical
configuration and inputs produce byte-identical text, so whole-pipeline
runs under a fixed seed reproduce exactly. Replies are keyed off the
shape of the incoming prompt so each pipeline stage receives plausible
material:

  * impact-summary prompts get either the no-impacts marker (~1 in 5,
    mirroring the low share of impact-bearing coverage) or 1-3 bullet
    impact statements,
  * capability-description prompts get a short synthetic paragraph,
  * single-impact prompts (chat or ``[INST]``-wrapped) get one sentence,
  * completion prompts ending in the fine-tune separator get an
    ``" impact END"``-style continuation.

Fine-tune jobs are idempotent per training-file content hash and reach
``succeeded`` after a configurable number of polls.
"""

import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import UnknownJobError
from .gateway import BackendConfig, FineTuneJob, request_fingerprint
from .prompts import INSTRUCT_OPEN, NO_IMPACTS_SENTINEL

MOCK_EMBED_DIM = 64

# One statement per row; themes span the whole impact taxonomy so that
# demo runs exercise every downstream category path.
IMPACT_BANK = (
    "AI systems can spread disinformation and erode public trust in institutions.",
    "Deepfake tools enable defamation and blackmail campaigns against private citizens.",
    "Facial recognition systems misidentify people of color at disproportionate rates.",
    "Automation driven by AI leads to job displacement across the logistics sector.",
    "Chatbots replacing support staff cause layoffs in customer service roles.",
    "Pervasive facial recognition enables mass surveillance that undermines privacy.",
    "Employers can use AI monitoring tools to track workers without consent.",
    "Autonomous vehicles can cause crashes when their sensors misread road conditions.",
    "Military drones increase the risk of civilian casualties during conflicts.",
    "A chatbot gave harmful advice that put a vulnerable user's safety at risk.",
    "Wrongful arrests have followed incorrect facial recognition matches.",
    "Regulators cannot audit opaque AI models, leaving no accountability for failures.",
    "The pace of AI deployment has outrun any regulatory framework to govern it.",
    "Language models hallucinate plausible but false statements presented as fact.",
    "Overtrust in automated predictions leads to automation bias in clinical decisions.",
    "AI-generated text evades plagiarism detection and threatens academic integrity.",
    "Synthetic voices are indistinguishable from real ones and fuel cloning scams.",
    "Generative AI lowers the barrier for writing malware and ransomware.",
    "Prompt injection attacks can exfiltrate data from AI-powered assistants.",
    "Training large models consumes energy at a scale with real environmental cost.",
    "AI companions inspire false feelings of attachment in vulnerable users.",
)

DESCRIPTION_BANK = (
    "The system analyzes medical scans to flag anomalies for radiologists, serving "
    "hospitals, clinicians, and patients who rely on faster screening.",
    "A conversational assistant drafts text, answers questions, and summarizes "
    "documents for office workers, students, and publishers.",
    "The platform matches job candidates to openings by ranking resumes, serving "
    "recruiters, employers, and applicants in the hiring market.",
    "Driverless vehicles navigate city streets without a human operator, involving "
    "carmakers, regulators, and the general public who share the roads.",
    "A vision system identifies individuals in camera feeds for building access, "
    "used by security teams, facility owners, and visitors.",
    "The model generates photorealistic images from text prompts for designers, "
    "advertisers, and media producers seeking rapid visual content.",
    "A translation engine converts speech between languages in real time for "
    "travelers, call centers, and international businesses.",
    "The tool composes short news summaries from wire feeds for editors, "
    "broadcasters, and readers who want quick briefings.",
)


def _h(*parts: object) -> int:
    blob = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(blob.encode("utf-8")).digest()[:8], "big")


@dataclass
class MockBackend:
    """Offline stand-in for a live HTTP backend."""

    seed: int = 0
    finetune_polls: int = 2
    embed_dim: int = MOCK_EMBED_DIM
    sentinel_rate: int = 5  # 1 out of N impact summaries is impact-free
    _jobs: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # -- text ---------------------------------------------------------------

    def chat(self, config: BackendConfig, messages: Sequence[dict]) -> tuple[str, str]:
        fingerprint = request_fingerprint(config, list(messages))
        prompt_text = "\n".join(m.get("content", "") for m in messages)
        text = self._respond(fingerprint, prompt_text)
        return self._truncate(text, config.max_output_tokens)

    def complete(self, config: BackendConfig, prompt: str) -> tuple[str, str]:
        fingerprint = request_fingerprint(config, prompt)
        text = self._respond(fingerprint, prompt)
        return self._truncate(text, config.max_output_tokens)

    def _respond(self, fingerprint: str, prompt_text: str) -> str:
        h = _h(self.seed, fingerprint)
        if prompt_text.endswith("\n\n###\n\n"):
            return " " + IMPACT_BANK[h % len(IMPACT_BANK)] + " END"
        if prompt_text.startswith(INSTRUCT_OPEN):
            return IMPACT_BANK[(h >> 3) % len(IMPACT_BANK)]
        if "Summarize the negative impacts" in prompt_text:
            if h % self.sentinel_rate == 0:
                return NO_IMPACTS_SENTINEL
            count = 1 + (h >> 4) % 3
            picks = [(h >> (8 + 5 * i)) % len(IMPACT_BANK) for i in range(count)]
            return "\n".join(f"- {IMPACT_BANK[p]}" for p in picks)
        if "functional capabilities" in prompt_text:
            return DESCRIPTION_BANK[h % len(DESCRIPTION_BANK)]
        if "Write a single negative impact" in prompt_text:
            return IMPACT_BANK[(h >> 5) % len(IMPACT_BANK)]
        return f"mock-reply-{fingerprint[:12]}"

    @staticmethod
    def _truncate(text: str, max_output_tokens: int) -> tuple[str, str]:
        # Character-budget heuristic: one whitespace-delimited word per token.
        words = text.split(" ")
        if len(words) > max_output_tokens:
            return " ".join(words[:max_output_tokens]), "length"
        return text, "stop"

    # -- embeddings ----------------------------------------------------------

    def embed(self, config: BackendConfig, texts: Sequence[str]) -> list[list[float]]:
        return [self._embed_one(text) for text in texts]

    def _embed_one(self, text: str) -> list[float]:
        digest = hashlib.sha256(f"{self.seed}\x1f{text}".encode("utf-8")).digest()
        rng = np.random.RandomState(int.from_bytes(digest[:4], "big"))
        vec = rng.standard_normal(self.embed_dim)
        vec /= np.linalg.norm(vec)
        return [float(x) for x in vec]

    # -- fine-tune jobs -------------------------------------------------------

    def submit_finetune(self, config: BackendConfig, training_file: str) -> FineTuneJob:
        content = Path(training_file).read_bytes()
        job_id = "ftjob-" + hashlib.sha256(content).hexdigest()[:12]
        with self._lock:
            if job_id not in self._jobs:
                self._jobs[job_id] = {
                    "polls": 0,
                    "model": config.model_name,
                    "file": str(training_file),
                }
        return FineTuneJob(
            job_id=job_id, status="pending", training_file_ref=str(training_file)
        )

    def poll_finetune(self, config: BackendConfig, job_id: str) -> FineTuneJob:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJobError(f"unknown fine-tune job {job_id}")
            state = self._jobs[job_id]
            state["polls"] += 1
            polls = state["polls"]
        if polls >= self.finetune_polls:
            return FineTuneJob(
                job_id=job_id,
                status="succeeded",
                result_model_name=state["model"] + "-ft",
                training_file_ref=state["file"],
            )
        status = "running" if polls > 1 else "pending"
        return FineTuneJob(job_id=job_id, status=status, training_file_ref=state["file"])
