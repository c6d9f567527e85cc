/**
 * Controller: wires the API client, the poll loop, and the renderer.
 * The view model is rebuilt from server responses only; the controller
 * owns just the selected iteration, the active tab, the pending-job
 * flag, and the current inline error.
 */

import { ApiClient, ApiError } from './api.js';
import { pollJob } from './poll.js';
import { renderSession, renderSubjectScreen, type Handlers, type Tab } from './render.js';
import type { SessionView } from './types.js';
import { buildViewModel } from './viewmodel.js';

export interface AppOptions {
  client?: ApiClient;
  pollIntervalMs?: number;
}

export class App {
  private client: ApiClient;
  private readonly pollIntervalMs: number;
  private view: SessionView | null = null;
  private selectedIteration: number | null = null;
  private activeTab: Tab = 'services';
  private pendingJob = false;
  private error: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    options: AppOptions = {},
  ) {
    this.client = options.client ?? new ApiClient();
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
  }

  start(): void {
    this.renderSubject();
  }

  private renderSubject(): void {
    renderSubjectScreen(
      this.root,
      (subject) => void this.createSession(subject),
      this.error ?? undefined,
    );
  }

  private handlers(): Handlers {
    return {
      onRunIteration: () => void this.runIteration(),
      onSelectIteration: (index) => void this.showIteration(index),
      onSelectTab: (tab) => {
        this.activeTab = tab;
        this.render();
      },
      onAnswer: (question, answer) =>
        void this.interact(() =>
          this.client.answer(this.sessionId(), question, answer),
        ),
      onRate: (alternative, rating) =>
        void this.interact(() =>
          this.client.rate(this.sessionId(), alternative, rating),
        ),
      onPin: (service) =>
        void this.interact(() => this.client.pin(this.sessionId(), service)),
    };
  }

  private sessionId(): string {
    if (!this.view) throw new Error('no session loaded');
    return this.view.session_id;
  }

  private render(): void {
    if (!this.view) {
      this.renderSubject();
      return;
    }
    renderSession(
      this.root,
      buildViewModel(this.view, this.pendingJob),
      this.handlers(),
      { activeTab: this.activeTab, error: this.error },
    );
  }

  private describe(err: unknown): string {
    if (err instanceof ApiError) return `${err.code}: ${err.message}`;
    return String(err);
  }

  private async createSession(subject: string): Promise<void> {
    if (!subject) {
      this.error = 'Please describe your goal first.';
      this.renderSubject();
      return;
    }
    try {
      this.view = await this.client.createSession(subject);
      this.error = null;
      this.selectedIteration = null;
    } catch (err) {
      this.error = this.describe(err);
    }
    this.render();
  }

  private async refresh(): Promise<void> {
    this.view = await this.client.getSession(
      this.sessionId(),
      this.selectedIteration ?? undefined,
    );
  }

  private async runIteration(): Promise<void> {
    this.error = null;
    this.pendingJob = true;
    this.render();
    try {
      const job = await this.client.startIteration(this.sessionId());
      const finished = await pollJob(
        this.client,
        job.job_id,
        this.pollIntervalMs,
      );
      if (finished.state === 'Failed') {
        this.error = finished.error ?? 'iteration failed';
      }
      this.selectedIteration = null; // jump to the new latest
      await this.refresh();
    } catch (err) {
      this.error = this.describe(err);
    } finally {
      this.pendingJob = false;
      this.render();
    }
  }

  /** One in-flight mutation at a time; errors surface inline and the
   * rest of the view (including other form state) is left alone. */
  private async interact(
    call: () => Promise<SessionView>,
  ): Promise<void> {
    this.error = null;
    try {
      const updated = await call();
      if (this.selectedIteration === null) {
        this.view = updated;
      } else {
        await this.refresh();
      }
    } catch (err) {
      this.error = this.describe(err);
    }
    this.render();
  }

  private async showIteration(index: number): Promise<void> {
    this.error = null;
    this.selectedIteration =
      this.view && index >= this.view.iteration_count ? null : index;
    try {
      await this.refresh();
    } catch (err) {
      this.error = this.describe(err);
    }
    this.render();
  }
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): App {
  const app = new App(root, options);
  app.start();
  return app;
}

declare global {
  interface Window {
    archloopAutoMount?: boolean;
  }
}

// Browser entry point; tests mount explicitly.
if (typeof document !== 'undefined' && window.archloopAutoMount !== false) {
  const root = document.getElementById('app');
  if (root) {
    const baseUrl =
      localStorage.getItem('archloop.apiBase') ?? 'http://127.0.0.1:8080';
    const token = localStorage.getItem('archloop.token') ?? '';
    mountApp(root, { client: new ApiClient(baseUrl, token) });
  }
}
