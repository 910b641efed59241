// Rubric form state: criterion definitions come from the service's
// /rubric endpoint; this module owns the gating and completeness rules
// so the client never submits a score outside its scale (the server
// stays authoritative).

export interface Criterion {
  id: string;
  question: string;
  scale: number[];
  labels: Record<string, string>;
  gated: boolean;
}

export interface RubricInfo {
  criteria: Criterion[];
}

export type Scores = Record<string, number>;

export const VALIDATION_ID = 'validation';

export class RubricFormState {
  readonly criteria: Criterion[];
  private values: Map<string, number> = new Map();

  constructor(criteria: Criterion[]) {
    if (!criteria.some((c) => c.id === VALIDATION_ID)) {
      throw new Error('rubric must include the validation criterion');
    }
    this.criteria = criteria;
  }

  get validationValue(): number | undefined {
    return this.values.get(VALIDATION_ID);
  }

  /** Gated criteria are interactive only once the text is judged to be
   * an actual impact (validation = 1). */
  isEnabled(criterionId: string): boolean {
    const criterion = this.find(criterionId);
    if (!criterion.gated) return true;
    return this.validationValue === 1;
  }

  /** Returns true when the value was applied (in scale and enabled). */
  set(criterionId: string, value: number): boolean {
    const criterion = this.find(criterionId);
    if (!criterion.scale.includes(value)) return false;
    if (criterion.gated && this.validationValue !== 1) return false;
    this.values.set(criterionId, value);
    return true;
  }

  get(criterionId: string): number | undefined {
    return this.values.get(criterionId);
  }

  /** Submittable payload: gated selections are retained in the form but
   * excluded whenever validation is 0. */
  scores(): Scores {
    const out: Scores = {};
    const validation = this.validationValue;
    if (validation === undefined) return out;
    out[VALIDATION_ID] = validation;
    if (validation === 1) {
      for (const criterion of this.criteria) {
        if (!criterion.gated) continue;
        const value = this.values.get(criterion.id);
        if (value !== undefined) out[criterion.id] = value;
      }
    }
    return out;
  }

  /** Submit is allowed once validation is set and, for validated
   * impacts, every gated criterion has a rating. */
  isComplete(): boolean {
    const validation = this.validationValue;
    if (validation === undefined) return false;
    if (validation === 0) return true;
    return this.criteria
      .filter((c) => c.gated)
      .every((c) => this.values.get(c.id) !== undefined);
  }

  missing(): string[] {
    if (this.validationValue === undefined) return [VALIDATION_ID];
    if (this.validationValue === 0) return [];
    return this.criteria
      .filter((c) => c.gated && this.values.get(c.id) === undefined)
      .map((c) => c.id);
  }

  reset(): void {
    this.values.clear();
  }

  private find(criterionId: string): Criterion {
    const criterion = this.criteria.find((c) => c.id === criterionId);
    if (!criterion) throw new Error(`unknown criterion ${criterionId}`);
    return criterion;
  }
}
