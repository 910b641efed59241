// View controller: renders one task at a time with the description and
// impact side by side, applies the rubric form rules, and keeps entered
// state on violations or network failures.

import { AnnotationApi, TaskView } from './api.js';
import { Criterion, RubricFormState, VALIDATION_ID } from './rubric.js';

const TASK_KEY = 'newsimpact.currentTask';
const ANNOTATOR_KEY = 'newsimpact.annotator';

interface Elements {
  description: HTMLElement;
  impact: HTMLElement;
  form: HTMLElement;
  submit: HTMLButtonElement;
  messages: HTMLElement;
  progress: HTMLElement;
  taskLabel: HTMLElement;
}

export class App {
  private form!: RubricFormState;
  private criteria: Criterion[] = [];
  private task: TaskView | null = null;
  private activeRow = 0;

  constructor(
    private readonly api: AnnotationApi,
    private readonly annotatorId: string,
    private readonly el: Elements,
    private readonly storage: Storage = window.localStorage,
  ) {}

  async start(): Promise<void> {
    const rubric = await this.api.fetchRubric();
    this.criteria = rubric.criteria;
    this.form = new RubricFormState(this.criteria);
    document.addEventListener('keydown', (event) => this.onKey(event));
    this.el.submit.addEventListener('click', () => void this.submit());
    await this.refreshProgress();
    // Recover an unexpired claim after a refresh instead of claiming a
    // second task.
    const saved = this.storage.getItem(TASK_KEY);
    if (saved) {
      this.renderTask(JSON.parse(saved) as TaskView);
      this.info('Recovered your in-progress task.');
      return;
    }
    await this.claimNext();
  }

  private async claimNext(): Promise<void> {
    this.clearMessages();
    let task: TaskView | null;
    try {
      task = await this.api.nextTask(this.annotatorId);
    } catch (error) {
      this.retryPrompt('Could not reach the service while claiming a task.', () =>
        this.claimNext(),
      );
      return;
    }
    if (!task) {
      this.el.taskLabel.textContent = 'All tasks are done 🎉';
      this.el.description.textContent = '';
      this.el.impact.textContent = '';
      this.el.form.replaceChildren();
      this.el.submit.disabled = true;
      this.task = null;
      this.storage.removeItem(TASK_KEY);
      return;
    }
    this.storage.setItem(TASK_KEY, JSON.stringify(task));
    this.renderTask(task);
  }

  private renderTask(task: TaskView): void {
    this.task = task;
    this.form.reset();
    this.activeRow = 0;
    this.el.taskLabel.textContent = task.task_id;
    this.el.description.textContent = task.description;
    this.el.impact.textContent = task.impact;
    this.renderForm();
  }

  private renderForm(): void {
    const rows = this.criteria.map((criterion, index) => {
      const row = document.createElement('div');
      row.className = 'criterion';
      if (index === this.activeRow) row.classList.add('active');
      if (!this.form.isEnabled(criterion.id)) row.classList.add('disabled');
      row.addEventListener('click', () => {
        this.activeRow = index;
        this.renderForm();
      });

      const question = document.createElement('div');
      question.className = 'question';
      question.textContent = `${index + 1}. ${criterion.question}`;
      row.appendChild(question);

      const options = document.createElement('div');
      options.className = 'options';
      for (const value of criterion.scale) {
        const button = document.createElement('button');
        button.type = 'button';
        button.textContent = `${value} · ${criterion.labels[String(value)]}`;
        button.disabled = !this.form.isEnabled(criterion.id);
        if (this.form.get(criterion.id) === value) button.classList.add('selected');
        button.addEventListener('click', (event) => {
          event.stopPropagation();
          this.setScore(criterion.id, value, index);
        });
        options.appendChild(button);
      }
      row.appendChild(options);
      return row;
    });
    this.el.form.replaceChildren(...rows);
    this.el.submit.disabled = !this.form.isComplete();
  }

  private setScore(criterionId: string, value: number, rowIndex: number): void {
    this.activeRow = rowIndex;
    this.form.set(criterionId, value);
    if (criterionId === VALIDATION_ID) this.clearMessages();
    this.renderForm();
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.task) return;
    if (event.key === 'ArrowDown' || event.key === 'j') {
      this.activeRow = Math.min(this.activeRow + 1, this.criteria.length - 1);
      this.renderForm();
    } else if (event.key === 'ArrowUp' || event.key === 'k') {
      this.activeRow = Math.max(this.activeRow - 1, 0);
      this.renderForm();
    } else if (/^[0-9]$/.test(event.key)) {
      const criterion = this.criteria[this.activeRow];
      if (this.form.set(criterion.id, Number(event.key))) {
        if (criterion.id !== VALIDATION_ID && this.activeRow < this.criteria.length - 1) {
          this.activeRow += 1;
        }
        this.renderForm();
      }
    } else if (event.key === 'Enter' && !this.el.submit.disabled) {
      void this.submit();
    }
  }

  private async submit(): Promise<void> {
    if (!this.task || !this.form.isComplete()) return;
    this.clearMessages();
    let result;
    try {
      result = await this.api.submit(this.task.task_id, this.annotatorId, this.form.scores());
    } catch (error) {
      // Entered scores stay in the form; the user just retries.
      this.retryPrompt('Could not reach the service while submitting.', () => this.submit());
      return;
    }
    if (!result.accepted) {
      this.showViolations(result.violations);
      return;
    }
    this.storage.removeItem(TASK_KEY);
    await this.refreshProgress();
    await this.claimNext();
  }

  private async refreshProgress(): Promise<void> {
    try {
      const summary = await this.api.progress();
      const parts = Object.entries(summary.per_model)
        .map(([model, counts]) => `${model}: ${counts.done}/${counts.done + counts.open + counts.claimed}`)
        .join('  ·  ');
      const share = (summary.done_fraction * 100).toFixed(1);
      this.el.progress.textContent = `${summary.done}/${summary.total} done (${share}%)` + (parts ? `  —  ${parts}` : '');
    } catch {
      this.el.progress.textContent = 'progress unavailable';
    }
  }

  private showViolations(violations: string[]): void {
    const list = document.createElement('ul');
    list.className = 'violations';
    for (const violation of violations) {
      const item = document.createElement('li');
      item.textContent = violation;
      list.appendChild(item);
    }
    this.el.messages.replaceChildren(list);
  }

  private retryPrompt(text: string, retry: () => Promise<void>): void {
    const banner = document.createElement('div');
    banner.className = 'retry';
    const label = document.createElement('span');
    label.textContent = text + ' ';
    const button = document.createElement('button');
    button.type = 'button';
    button.textContent = 'Retry';
    button.addEventListener('click', () => void retry());
    banner.append(label, button);
    this.el.messages.replaceChildren(banner);
  }

  private info(text: string): void {
    const note = document.createElement('div');
    note.className = 'info';
    note.textContent = text;
    this.el.messages.replaceChildren(note);
  }

  private clearMessages(): void {
    this.el.messages.replaceChildren();
  }
}

export function resolveAnnotatorId(storage: Storage = window.localStorage): string {
  const fromQuery = new URLSearchParams(window.location.search).get('annotator');
  if (fromQuery) {
    storage.setItem(ANNOTATOR_KEY, fromQuery);
    return fromQuery;
  }
  const saved = storage.getItem(ANNOTATOR_KEY);
  if (saved) return saved;
  const entered = window.prompt('Annotator id:') || 'anonymous';
  storage.setItem(ANNOTATOR_KEY, entered);
  return entered;
}
