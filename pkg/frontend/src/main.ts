import { AnnotationApi } from './api.js';
import { App, resolveAnnotatorId } from './app.js';

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const app = new App(new AnnotationApi(), resolveAnnotatorId(), {
  description: element('description'),
  impact: element('impact'),
  form: element('rubric-form'),
  submit: element<HTMLButtonElement>('submit'),
  messages: element('messages'),
  progress: element('progress'),
  taskLabel: element('task-label'),
});

void app.start();
