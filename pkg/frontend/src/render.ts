/**
 * DOM construction for the two screens: the subject entry view (the only
 * pre-session screen) and the session view with its three state panels
 * (services / summary / inspection), the interaction forms, preference
 * chips, and the iteration browser. History is read-only: every
 * interaction control is disabled unless the latest iteration is shown.
 */

import { renderDiagram } from './mermaid.js';
import { SUMMARY_ASPECT_KEYS } from './types.js';
import type { SessionViewModel } from './viewmodel.js';

export type Tab = 'services' | 'summary' | 'inspection';

export interface Handlers {
  onRunIteration(): void;
  onSelectIteration(index: number): void;
  onSelectTab(tab: Tab): void;
  onAnswer(question: string, answer: 'Yes' | 'No'): void;
  onRate(alternative: string, rating: 'Good' | 'Bad'): void;
  onPin(service: string): void;
}

type Attrs = Record<string, string | boolean | ((event: Event) => void)>;

function h(
  tag: string,
  attrs: Attrs = {},
  ...children: (Node | string)[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === 'function') {
      node.addEventListener(key, value);
    } else if (typeof value === 'boolean') {
      if (value) node.setAttribute(key, '');
      if (key === 'disabled') (node as HTMLButtonElement).disabled = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  node.append(...children);
  return node;
}

export function renderSubjectScreen(
  root: HTMLElement,
  onStart: (subject: string) => void,
  error?: string,
): void {
  const input = h('textarea', {
    'data-testid': 'subject-input',
    placeholder:
      'Describe what you want to build, e.g. "Host Jupyter on AWS and coding in local"',
    rows: '4',
  }) as HTMLTextAreaElement;
  const start = h(
    'button',
    {
      'data-testid': 'start-session',
      click: () => onStart(input.value.trim()),
    },
    'Start designing',
  );
  root.replaceChildren(
    h(
      'section',
      { class: 'subject-screen' },
      h('h1', {}, 'New design session'),
      h('p', {}, 'State your high-level goal; the system drives the rest.'),
      input,
      start,
      ...(error ? [h('p', { class: 'error', 'data-testid': 'error' }, error)] : []),
    ),
  );
}

function chipRow(model: SessionViewModel): HTMLElement {
  const chips = model.chips.map(({ key, value }) =>
    h(
      'span',
      { class: `chip chip-${value.toLowerCase()}`, 'data-chip': key },
      `${key}: ${value}`,
    ),
  );
  return h(
    'div',
    { class: 'chips', 'data-testid': 'preference-chips' },
    ...(chips.length ? chips : [h('span', { class: 'muted' }, 'No preferences yet')]),
  );
}

function servicesPanel(
  model: SessionViewModel,
  handlers: Handlers,
  live: boolean,
): HTMLElement {
  const rows = model.services.map(({ entry, badge, pinned }) => {
    const settings = Object.entries(entry.settings).map(([key, value]) =>
      h('li', {}, `${key}: ${value}`),
    );
    return h(
      'article',
      { class: 'service-card', 'data-service': entry.name },
      h(
        'header',
        {},
        h('strong', {}, entry.name),
        ...(badge
          ? [h('span', { class: `badge badge-${badge}`, 'data-badge': badge }, badge)]
          : []),
        ...(pinned ? [h('span', { class: 'badge badge-pinned' }, 'pinned')] : []),
      ),
      h('p', {}, entry.usage),
      h('ul', { class: 'settings' }, ...settings),
    );
  });
  const pinButtons = model.services.map(({ entry, pinned }) =>
    h(
      'button',
      {
        'data-pin': entry.name,
        disabled: !live,
        click: () => handlers.onPin(entry.name),
      },
      pinned ? `Unpin ${entry.name}` : `Pin ${entry.name}`,
    ),
  );
  return h(
    'section',
    { 'data-region': 'services', class: 'panel' },
    ...rows,
    h(
      'div',
      { 'data-region': 'pin-form', class: 'pin-form' },
      h('h3', {}, 'Mark essential services'),
      ...pinButtons,
    ),
  );
}

function summaryPanel(model: SessionViewModel): HTMLElement {
  const summary = model.view.architecture?.summary;
  const diagramHost = h('div', { class: 'diagram', 'data-testid': 'diagram' });
  if (summary) void renderDiagram(diagramHost, summary.diagram);
  const cards = SUMMARY_ASPECT_KEYS.filter(
    (key) => summary?.aspects[key] !== undefined,
  ).map((key) =>
    h(
      'article',
      { class: 'aspect-card', 'data-aspect': key },
      h('h4', {}, key),
      h('p', {}, summary?.aspects[key] ?? ''),
    ),
  );
  return h(
    'section',
    { 'data-region': 'summary', class: 'panel' },
    diagramHost,
    h('div', { class: 'aspects' }, ...cards),
  );
}

function inspectionPanel(
  model: SessionViewModel,
  handlers: Handlers,
  live: boolean,
): HTMLElement {
  const issues = model.view.architecture?.inspection ?? [];
  if (!issues.length) {
    return h(
      'section',
      { 'data-region': 'inspection', class: 'panel' },
      h('p', { class: 'muted', 'data-testid': 'no-issues' }, 'No issues found.'),
      h('div', { 'data-region': 'rating-form' }),
    );
  }
  const items = issues.map((issue) =>
    h(
      'article',
      { class: 'issue-card' },
      h('header', {}, h('strong', {}, issue.service), ` — ${issue.issue}`),
      h('p', {}, issue.reason),
    ),
  );
  const ratingRows = issues.flatMap((issue) =>
    issue.alternatives.map((alternative) =>
      h(
        'div',
        { class: 'alternative', 'data-alternative': alternative },
        h('span', {}, alternative),
        h(
          'button',
          {
            'data-rate-good': alternative,
            disabled: !live,
            click: () => handlers.onRate(alternative, 'Good'),
          },
          'Good',
        ),
        h(
          'button',
          {
            'data-rate-bad': alternative,
            disabled: !live,
            click: () => handlers.onRate(alternative, 'Bad'),
          },
          'Bad',
        ),
      ),
    ),
  );
  return h(
    'section',
    { 'data-region': 'inspection', class: 'panel' },
    ...items,
    h(
      'div',
      { 'data-region': 'rating-form', class: 'rating-form' },
      h('h3', {}, 'Evaluate alternatives'),
      ...ratingRows,
    ),
  );
}

function inquiryForm(
  model: SessionViewModel,
  handlers: Handlers,
  live: boolean,
): HTMLElement {
  const questions = model.view.architecture?.inquiry ?? [];
  const rows = questions.map((question) =>
    h(
      'div',
      { class: 'question', 'data-question': question },
      h('span', {}, question),
      h(
        'button',
        {
          'data-answer-yes': question,
          disabled: !live,
          click: () => handlers.onAnswer(question, 'Yes'),
        },
        'Yes',
      ),
      h(
        'button',
        {
          'data-answer-no': question,
          disabled: !live,
          click: () => handlers.onAnswer(question, 'No'),
        },
        'No',
      ),
    ),
  );
  return h(
    'section',
    { 'data-region': 'inquiry-form', class: 'inquiry' },
    h('h3', {}, 'Open questions'),
    ...(rows.length ? rows : [h('p', { class: 'muted' }, 'No open questions.')]),
  );
}

function iterationNav(
  model: SessionViewModel,
  handlers: Handlers,
): HTMLElement {
  const current = model.iteration ?? 0;
  return h(
    'nav',
    { class: 'iteration-nav', 'data-testid': 'iteration-nav' },
    h(
      'button',
      {
        'data-testid': 'prev-iteration',
        disabled: current <= 1,
        click: () => handlers.onSelectIteration(current - 1),
      },
      '◀',
    ),
    h(
      'span',
      { 'data-testid': 'iteration-label' },
      model.iterationCount
        ? `Iteration ${current} of ${model.iterationCount}`
        : 'No iterations yet',
    ),
    h(
      'button',
      {
        'data-testid': 'next-iteration',
        disabled: current >= model.iterationCount,
        click: () => handlers.onSelectIteration(current + 1),
      },
      '▶',
    ),
    ...(model.isLatest || !model.iterationCount
      ? []
      : [
          h(
            'span',
            { class: 'history-note', 'data-testid': 'history-note' },
            'read-only history view',
          ),
        ]),
  );
}

export interface RenderOptions {
  activeTab: Tab;
  error?: string | null;
}

export function renderSession(
  root: HTMLElement,
  model: SessionViewModel,
  handlers: Handlers,
  options: RenderOptions,
): void {
  const live = model.isLatest && !model.pendingJob;
  const tabs = (['services', 'summary', 'inspection'] as Tab[]).map((tab) =>
    h(
      'button',
      {
        class: options.activeTab === tab ? 'tab active' : 'tab',
        'data-tab': tab,
        click: () => handlers.onSelectTab(tab),
      },
      tab,
    ),
  );
  const panel =
    options.activeTab === 'services'
      ? servicesPanel(model, handlers, live)
      : options.activeTab === 'summary'
        ? summaryPanel(model)
        : inspectionPanel(model, handlers, live);

  root.replaceChildren(
    h(
      'header',
      { class: 'session-header' },
      h('h1', {}, model.subject),
      h(
        'div',
        { class: 'session-actions' },
        h(
          'span',
          { 'data-testid': 'job-indicator', class: 'muted' },
          model.pendingJob ? 'generating…' : `status: ${model.status}`,
        ),
        h(
          'button',
          {
            'data-testid': 'run-iteration',
            disabled: model.pendingJob || !(model.isLatest || !model.iterationCount),
            click: () => handlers.onRunIteration(),
          },
          model.iterationCount ? 'Run next iteration' : 'Run first iteration',
        ),
      ),
    ),
    ...(options.error
      ? [h('p', { class: 'error', 'data-testid': 'error' }, options.error)]
      : []),
    chipRow(model),
    iterationNav(model, handlers),
    ...(model.iterationCount
      ? [
          h('div', { class: 'tabs' }, ...tabs),
          panel,
          inquiryForm(model, handlers, live),
        ]
      : [
          h(
            'p',
            { class: 'muted', 'data-testid': 'empty-state' },
            'Run the first iteration to generate a proposal.',
          ),
        ]),
  );
}
