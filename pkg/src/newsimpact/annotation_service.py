"""Annotation workflow service: queue generated impacts for human
review, hand out claims with expiry, accept rubric submissions, track
progress, and export the append-only annotation store.

HTTP JSON API (also consumed by the browser UI):

    GET  /tasks/next?annotator=ID   claim the next open task
    POST /tasks/{task_id}/submit    body {annotator_id, scores, notes?}
    GET  /progress                  per-model open/claimed/done counts
    GET  /export                    annotation store (ndjson)
    GET  /rubric                    criteria, scales, and labels

Task state is journaled (append-only) so a restart preserves every
status; accepted records append to the annotation store. Annotators are
blind to model identity by default.
"""

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .errors import PipelineError
from .evaluation import RUBRIC, AnnotationRecord, validate_annotation
from .generation import GeneratedImpact
from .jsonl import append_record, read_records

DEFAULT_CLAIM_TTL_SECONDS = 30 * 60


class NothingToClaim(PipelineError):
    pass


class UnknownTask(PipelineError):
    pass


class StaleClaim(PipelineError):
    pass


class DuplicateTasks(PipelineError):
    pass


@dataclass
class AnnotationTask:
    task_id: str
    generated_impact_id: str
    description_shown: str
    impact_shown: str
    model_name: str  # internal; hidden from annotators when blind
    status: str = "open"  # open | claimed | done
    claimed_by: str | None = None
    claim_expiry: float = 0.0

    def public_view(self, blind: bool) -> dict:
        view = {
            "task_id": self.task_id,
            "description": self.description_shown,
            "impact": self.impact_shown,
        }
        if not blind:
            view["model_name"] = self.model_name
        return view


@dataclass
class ProgressSummary:
    per_model: dict[str, dict[str, int]]
    total: int
    done: int

    @property
    def done_fraction(self) -> float:
        return self.done / self.total if self.total else 0.0

    def to_record(self) -> dict:
        return {
            "per_model": {m: dict(c) for m, c in sorted(self.per_model.items())},
            "total": self.total,
            "done": self.done,
            "done_fraction": self.done_fraction,
        }


class TaskStore:
    """Thread-safe task queue with journaled persistence.

    Transitions run under one lock, so a task is never claimed twice and
    done tasks never reopen; expired claims reopen lazily on the next
    access. The journal replays on restart.
    """

    def __init__(
        self,
        journal_path: str | Path,
        store_path: str | Path,
        *,
        claim_ttl: float = DEFAULT_CLAIM_TTL_SECONDS,
        blind: bool = True,
        clock: Callable[[], float] = time.time,
    ):
        self.journal_path = Path(journal_path)
        self.store_path = Path(store_path)
        self.claim_ttl = claim_ttl
        self.blind = blind
        self._clock = clock
        self._lock = threading.Lock()
        self._tasks: dict[str, AnnotationTask] = {}
        self._order: list[str] = []
        if self.journal_path.exists():
            self._replay()

    # -- persistence -----------------------------------------------------------

    def _journal(self, event: dict) -> None:
        append_record(self.journal_path, event)

    def _replay(self) -> None:
        for event in read_records(self.journal_path):
            kind = event["event"]
            if kind == "created":
                task = AnnotationTask(
                    task_id=event["task_id"],
                    generated_impact_id=event["generated_impact_id"],
                    description_shown=event["description"],
                    impact_shown=event["impact"],
                    model_name=event["model_name"],
                )
                self._tasks[task.task_id] = task
                self._order.append(task.task_id)
            elif kind == "claimed":
                task = self._tasks[event["task_id"]]
                task.status = "claimed"
                task.claimed_by = event["annotator_id"]
                task.claim_expiry = event["expiry"]
            elif kind == "done":
                task = self._tasks[event["task_id"]]
                task.status = "done"
            elif kind == "reopened":
                task = self._tasks[event["task_id"]]
                task.status = "open"
                task.claimed_by = None
                task.claim_expiry = 0.0

    # -- transitions -----------------------------------------------------------

    def create_tasks(self, generations: Sequence[GeneratedImpact]) -> int:
        """One open task per generation, exposing the source description
        alongside the impact (the relevance criteria need both)."""
        if not generations:
            raise ValueError("no generations to queue")
        with self._lock:
            existing = {t.generated_impact_id for t in self._tasks.values()}
            duplicates = [g.id for g in generations if g.id in existing]
            if duplicates:
                raise DuplicateTasks(
                    f"tasks already exist for {len(duplicates)} generation(s), "
                    f"e.g. {duplicates[0]!r}"
                )
            for generation in generations:
                task = AnnotationTask(
                    task_id="task-" + generation.id,
                    generated_impact_id=generation.id,
                    description_shown=generation.description_used,
                    impact_shown=generation.text,
                    model_name=generation.model_name,
                )
                self._tasks[task.task_id] = task
                self._order.append(task.task_id)
                self._journal(
                    {
                        "event": "created",
                        "task_id": task.task_id,
                        "generated_impact_id": task.generated_impact_id,
                        "description": task.description_shown,
                        "impact": task.impact_shown,
                        "model_name": task.model_name,
                    }
                )
            return len(generations)

    def _sweep_expired_locked(self) -> None:
        now = self._clock()
        for task in self._tasks.values():
            if task.status == "claimed" and task.claim_expiry <= now:
                task.status = "open"
                task.claimed_by = None
                task.claim_expiry = 0.0
                self._journal({"event": "reopened", "task_id": task.task_id})

    def claim_next(self, annotator_id: str) -> AnnotationTask:
        if not annotator_id:
            raise ValueError("annotator_id required")
        with self._lock:
            self._sweep_expired_locked()
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.status == "open":
                    task.status = "claimed"
                    task.claimed_by = annotator_id
                    task.claim_expiry = self._clock() + self.claim_ttl
                    self._journal(
                        {
                            "event": "claimed",
                            "task_id": task.task_id,
                            "annotator_id": annotator_id,
                            "expiry": task.claim_expiry,
                        }
                    )
                    return task
        raise NothingToClaim("no open tasks")

    def submit(self, task_id: str, record: AnnotationRecord) -> list[str]:
        """Validate and accept a rubric submission for a claimed task.

        Returns rubric violations (task stays claimed) or [] on
        acceptance, which marks the task done and appends to the store.
        """
        with self._lock:
            self._sweep_expired_locked()
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"unknown task {task_id!r}")
            if task.status == "done":
                raise StaleClaim(f"task {task_id!r} is already done")
            if task.status != "claimed" or task.claimed_by != record.annotator_id:
                raise StaleClaim(
                    f"task {task_id!r} is not claimed by {record.annotator_id!r}"
                )
            if record.generated_impact_id != task.generated_impact_id:
                return ["record references a different generation than the task"]
            violations = validate_annotation(record)
            if violations:
                return violations
            task.status = "done"
            self._journal({"event": "done", "task_id": task_id})
            append_record(self.store_path, record.to_record())
            return []

    # -- reads -----------------------------------------------------------------

    def progress(self) -> ProgressSummary:
        with self._lock:
            self._sweep_expired_locked()
            per_model: dict[str, dict[str, int]] = {}
            done = 0
            for task in self._tasks.values():
                counts = per_model.setdefault(
                    task.model_name, {"open": 0, "claimed": 0, "done": 0}
                )
                counts[task.status] += 1
                if task.status == "done":
                    done += 1
            return ProgressSummary(per_model, total=len(self._tasks), done=done)

    def export_records(self) -> list[AnnotationRecord]:
        if not self.store_path.exists():
            return []
        return [AnnotationRecord.from_record(r) for r in read_records(self.store_path)]

    def get_task(self, task_id: str) -> AnnotationTask:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"unknown task {task_id!r}")
            return task


def build_app(store: TaskStore, static_dir: str | Path | None = None):
    """FastAPI app over a TaskStore; optionally serves the browser UI's
    static assets at the root path."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="impact annotation service")

    @app.get("/rubric")
    def get_rubric():
        return {
            "criteria": [
                {
                    "id": c.id,
                    "question": c.question,
                    "scale": list(c.scale),
                    "labels": {str(k): v for k, v in c.labels.items()},
                    "gated": c.gated,
                }
                for c in RUBRIC
            ]
        }

    @app.get("/tasks/next")
    def next_task(annotator: str = ""):
        if not annotator:
            return JSONResponse({"error": "annotator query parameter required"}, status_code=400)
        try:
            task = store.claim_next(annotator)
        except NothingToClaim:
            return JSONResponse({"error": "no open tasks"}, status_code=404)
        return task.public_view(store.blind)

    @app.post("/tasks/{task_id}/submit")
    async def submit_task(task_id: str, request: Request):
        body = await request.json()
        annotator_id = body.get("annotator_id", "")
        scores = body.get("scores", {})
        if not isinstance(scores, dict):
            return JSONResponse({"error": "scores must be an object"}, status_code=400)
        try:
            task = store.get_task(task_id)
            record = AnnotationRecord(
                generated_impact_id=task.generated_impact_id,
                annotator_id=annotator_id,
                scores={k: int(v) for k, v in scores.items()},
                timestamp=body.get("timestamp", ""),
                notes=body.get("notes"),
            )
            violations = store.submit(task_id, record)
        except UnknownTask:
            return JSONResponse({"error": f"unknown task {task_id}"}, status_code=404)
        except StaleClaim as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        except (TypeError, ValueError):
            return JSONResponse({"error": "scores must map criterion to integer"}, status_code=400)
        if violations:
            return JSONResponse({"accepted": False, "violations": violations}, status_code=422)
        return {"accepted": True}

    @app.get("/progress")
    def progress():
        return store.progress().to_record()

    @app.get("/export")
    def export():
        from .jsonl import dumps_line

        lines = [dumps_line(r.to_record()) for r in store.export_records()]
        return PlainTextResponse(
            "\n".join(lines) + ("\n" if lines else ""),
            media_type="application/x-ndjson",
        )

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(
    store: TaskStore,
    host: str = "127.0.0.1",
    port: int = 8787,
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    uvicorn.run(build_app(store, static_dir), host=host, port=port, log_level="info")
