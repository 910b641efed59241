"""Task queue semantics (claims, expiry, persistence) and the HTTP API."""

import threading

import pytest
from fastapi.testclient import TestClient

from newsimpact.annotation_service import (
    DuplicateTasks,
    NothingToClaim,
    StaleClaim,
    TaskStore,
    build_app,
)
from newsimpact.evaluation import AnnotationRecord
from newsimpact.generation import GeneratedImpact

FULL_SCORES = {
    "validation": 1,
    "coherence_complete_sentence": 1,
    "coherence_multiple_impacts": 0,
    "granularity": 3,
    "relevance_stakeholders": 3,
    "relevance_core_functionality": 2,
    "plausibility": 3,
}


def make_generations(n, model="model-a"):
    return [
        GeneratedImpact(
            id=f"{model}::p{i:03d}",
            source_pair_id=f"p{i:03d}",
            description_used=f"description {i}",
            model_name=model,
            mode="zero_shot_chat",
            text=f"impact {i}",
            fingerprint="f",
        )
        for i in range(n)
    ]


class ManualClock:
    def __init__(self, now=1000.0):
        self.now = now

    def __call__(self):
        return self.now


@pytest.fixture
def store(tmp_path):
    return TaskStore(tmp_path / "journal.jsonl", tmp_path / "store.jsonl", claim_ttl=60)


def record_for(task, annotator, scores):
    return AnnotationRecord(task.generated_impact_id, annotator, dict(scores))


class TestTaskLifecycle:
    def test_one_task_per_generation(self, store):
        assert store.create_tasks(make_generations(5)) == 5
        assert store.progress().total == 5

    def test_duplicate_creation_rejected_and_count_unchanged(self, store):
        generations = make_generations(3)
        store.create_tasks(generations)
        with pytest.raises(DuplicateTasks):
            store.create_tasks(generations[:1])
        assert store.progress().total == 3

    def test_empty_input_rejected(self, store):
        with pytest.raises(ValueError):
            store.create_tasks([])

    def test_claim_then_submit_marks_done_and_appends(self, store, tmp_path):
        store.create_tasks(make_generations(2))
        task = store.claim_next("ann1")
        violations = store.submit(task.task_id, record_for(task, "ann1", FULL_SCORES))
        assert violations == []
        assert store.progress().done == 1
        assert len(store.export_records()) == 1

    def test_gating_violation_keeps_task_claimed(self, store):
        store.create_tasks(make_generations(1))
        task = store.claim_next("ann1")
        bad = record_for(task, "ann1", {"validation": 0, "plausibility": 3})
        violations = store.submit(task.task_id, bad)
        assert violations
        assert store.get_task(task.task_id).status == "claimed"
        # Still submittable with a corrected record.
        assert store.submit(task.task_id, record_for(task, "ann1", {"validation": 0})) == []

    def test_submit_by_other_annotator_is_stale(self, store):
        store.create_tasks(make_generations(1))
        task = store.claim_next("ann1")
        with pytest.raises(StaleClaim):
            store.submit(task.task_id, record_for(task, "intruder", FULL_SCORES))

    def test_nothing_to_claim(self, store):
        store.create_tasks(make_generations(1))
        store.claim_next("ann1")
        with pytest.raises(NothingToClaim):
            store.claim_next("ann2")

    def test_expired_claim_reopens_and_stale_submit_rejected(self, tmp_path):
        clock = ManualClock()
        store = TaskStore(
            tmp_path / "j.jsonl", tmp_path / "s.jsonl", claim_ttl=60, clock=clock
        )
        store.create_tasks(make_generations(1))
        task = store.claim_next("ann1")
        clock.now += 61
        retaken = store.claim_next("ann2")
        assert retaken.task_id == task.task_id
        with pytest.raises(StaleClaim):
            store.submit(task.task_id, record_for(task, "ann1", FULL_SCORES))
        assert store.submit(task.task_id, record_for(retaken, "ann2", FULL_SCORES)) == []

    def test_done_tasks_never_reopen(self, tmp_path):
        clock = ManualClock()
        store = TaskStore(
            tmp_path / "j.jsonl", tmp_path / "s.jsonl", claim_ttl=60, clock=clock
        )
        store.create_tasks(make_generations(1))
        task = store.claim_next("ann1")
        store.submit(task.task_id, record_for(task, "ann1", FULL_SCORES))
        clock.now += 10_000
        assert store.progress().done == 1
        with pytest.raises(NothingToClaim):
            store.claim_next("ann2")

    def test_concurrent_claims_disjoint(self, store):
        store.create_tasks(make_generations(8))
        claimed: list[str] = []
        lock = threading.Lock()

        def worker(annotator):
            for _ in range(2):
                task = store.claim_next(annotator)
                with lock:
                    claimed.append(task.task_id)

        threads = [threading.Thread(target=worker, args=(f"ann{i}",)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(claimed) == 8
        assert len(set(claimed)) == 8

    def test_restart_preserves_state(self, tmp_path):
        journal, records = tmp_path / "j.jsonl", tmp_path / "s.jsonl"
        store = TaskStore(journal, records, claim_ttl=3600)
        store.create_tasks(make_generations(3))
        task = store.claim_next("ann1")
        store.submit(task.task_id, record_for(task, "ann1", FULL_SCORES))
        claimed = store.claim_next("ann2")

        reloaded = TaskStore(journal, records, claim_ttl=3600)
        summary = reloaded.progress()
        assert summary.total == 3
        assert summary.done == 1
        assert reloaded.get_task(claimed.task_id).status == "claimed"
        assert reloaded.get_task(claimed.task_id).claimed_by == "ann2"
        assert len(reloaded.export_records()) == 1

    def test_store_append_count_equals_done_count(self, store):
        store.create_tasks(make_generations(4))
        for annotator in ("a1", "a2"):
            task = store.claim_next(annotator)
            store.submit(task.task_id, record_for(task, annotator, FULL_SCORES))
        summary = store.progress()
        assert summary.done == len(store.export_records()) == 2

    def test_per_model_progress(self, tmp_path):
        store = TaskStore(tmp_path / "j.jsonl", tmp_path / "s.jsonl")
        store.create_tasks(make_generations(2, model="model-a") + make_generations(3, model="model-b"))
        summary = store.progress()
        assert summary.per_model["model-a"]["open"] == 2
        assert summary.per_model["model-b"]["open"] == 3
        assert summary.total == 5


class TestHttpApi:
    @pytest.fixture
    def client(self, tmp_path):
        store = TaskStore(tmp_path / "j.jsonl", tmp_path / "s.jsonl")
        store.create_tasks(make_generations(2))
        return TestClient(build_app(store))

    def test_claim_submit_progress_export_loop(self, client):
        task = client.get("/tasks/next", params={"annotator": "ann1"}).json()
        assert "task_id" in task and "description" in task and "impact" in task
        assert "model_name" not in task  # blind by default
        response = client.post(
            f"/tasks/{task['task_id']}/submit",
            json={"annotator_id": "ann1", "scores": FULL_SCORES},
        )
        assert response.status_code == 200
        assert response.json() == {"accepted": True}
        progress = client.get("/progress").json()
        assert progress["done"] == 1
        export = client.get("/export")
        assert export.status_code == 200
        assert export.text.count("\n") == 1

    def test_violations_returned_as_422(self, client):
        task = client.get("/tasks/next", params={"annotator": "ann1"}).json()
        response = client.post(
            f"/tasks/{task['task_id']}/submit",
            json={"annotator_id": "ann1", "scores": {"validation": 0, "plausibility": 3}},
        )
        assert response.status_code == 422
        assert response.json()["violations"]

    def test_stale_claim_is_409(self, client):
        task = client.get("/tasks/next", params={"annotator": "ann1"}).json()
        response = client.post(
            f"/tasks/{task['task_id']}/submit",
            json={"annotator_id": "someone-else", "scores": FULL_SCORES},
        )
        assert response.status_code == 409

    def test_exhausted_queue_is_404(self, client):
        client.get("/tasks/next", params={"annotator": "a"})
        client.get("/tasks/next", params={"annotator": "b"})
        response = client.get("/tasks/next", params={"annotator": "c"})
        assert response.status_code == 404

    def test_missing_annotator_param_is_400(self, client):
        assert client.get("/tasks/next").status_code == 400

    def test_unknown_task_is_404(self, client):
        response = client.post(
            "/tasks/task-nope/submit", json={"annotator_id": "a", "scores": FULL_SCORES}
        )
        assert response.status_code == 404

    def test_rubric_endpoint_lists_seven_criteria(self, client):
        rubric = client.get("/rubric").json()
        assert len(rubric["criteria"]) == 7
        gated = [c for c in rubric["criteria"] if c["gated"]]
        assert len(gated) == 6

    def test_unblinded_store_exposes_model(self, tmp_path):
        store = TaskStore(tmp_path / "j2.jsonl", tmp_path / "s2.jsonl", blind=False)
        store.create_tasks(make_generations(1))
        client = TestClient(build_app(store))
        task = client.get("/tasks/next", params={"annotator": "a"}).json()
        assert task["model_name"] == "model-a"
