/**
 * Pure derivation of everything the panels need from one session view.
 * No client-side state beyond what GET /sessions/{id} returned, plus the
 * pending-job flag owned by the controller.
 */

import type { PreferenceValue, ServiceEntry, SessionView } from './types.js';

export type ServiceBadge = 'added' | 'changed' | null;

export interface ServiceRow {
  entry: ServiceEntry;
  badge: ServiceBadge;
  pinned: boolean;
}

export interface PreferenceChip {
  key: string;
  value: PreferenceValue;
}

export interface SessionViewModel {
  sessionId: string;
  subject: string;
  status: string;
  iterationCount: number;
  iteration: number | null;
  /** Interaction forms are live only on the latest iteration. */
  isLatest: boolean;
  pendingJob: boolean;
  chips: PreferenceChip[];
  services: ServiceRow[];
  view: SessionView;
}

export function buildViewModel(
  view: SessionView,
  pendingJob = false,
): SessionViewModel {
  const added = new Set(view.diff?.added ?? []);
  const changed = new Set((view.diff?.changed ?? []).map((c) => c.name));
  const pinnedNames = new Set(
    Object.entries(view.user_state.preferences)
      .filter(([, value]) => value === 'Pinned')
      .map(([key]) => key),
  );
  const services: ServiceRow[] = (view.architecture?.services ?? []).map(
    (entry) => ({
      entry,
      badge: added.has(entry.name)
        ? 'added'
        : changed.has(entry.name)
          ? 'changed'
          : null,
      pinned: pinnedNames.has(entry.name),
    }),
  );
  return {
    sessionId: view.session_id,
    subject: view.user_state.subject,
    status: view.status,
    iterationCount: view.iteration_count,
    iteration: view.iteration,
    isLatest:
      view.iteration !== null && view.iteration === view.iteration_count,
    pendingJob,
    chips: Object.entries(view.user_state.preferences).map(
      ([key, value]) => ({ key, value }),
    ),
    services,
    view,
  };
}
