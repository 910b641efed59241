// Typed client for the annotation service HTTP JSON API.

import type { RubricInfo, Scores } from './rubric.js';

export interface TaskView {
  task_id: string;
  description: string;
  impact: string;
  model_name?: string;
}

export interface ProgressSummary {
  per_model: Record<string, { open: number; claimed: number; done: number }>;
  total: number;
  done: number;
  done_fraction: number;
}

export interface SubmitResult {
  accepted: boolean;
  violations: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export class AnnotationApi {
  constructor(private readonly baseUrl: string = '') {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async fetchRubric(): Promise<RubricInfo> {
    const response = await fetch(this.url('/rubric'));
    if (!response.ok) throw new ApiError(response.status, 'failed to load rubric');
    return (await response.json()) as RubricInfo;
  }

  /** Claim the next open task; null when the queue is empty. */
  async nextTask(annotatorId: string): Promise<TaskView | null> {
    const query = new URLSearchParams({ annotator: annotatorId });
    const response = await fetch(this.url(`/tasks/next?${query}`));
    if (response.status === 404) return null;
    if (!response.ok) throw new ApiError(response.status, 'failed to claim a task');
    return (await response.json()) as TaskView;
  }

  /**
   * Submit rubric scores. Rubric violations (422) and stale claims
   * (409) come back as a non-accepted result so the form can show them
   * inline without losing state; other failures throw.
   */
  async submit(taskId: string, annotatorId: string, scores: Scores): Promise<SubmitResult> {
    const response = await fetch(this.url(`/tasks/${encodeURIComponent(taskId)}/submit`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ annotator_id: annotatorId, scores }),
    });
    if (response.status === 422) {
      const body = (await response.json()) as { violations?: string[] };
      return { accepted: false, violations: body.violations ?? ['submission rejected'] };
    }
    if (response.status === 409) {
      const body = (await response.json()) as { error?: string };
      return { accepted: false, violations: [body.error ?? 'claim is stale'] };
    }
    if (!response.ok) throw new ApiError(response.status, 'submit failed');
    return { accepted: true, violations: [] };
  }

  async progress(): Promise<ProgressSummary> {
    const response = await fetch(this.url('/progress'));
    if (!response.ok) throw new ApiError(response.status, 'failed to load progress');
    return (await response.json()) as ProgressSummary;
  }
}
