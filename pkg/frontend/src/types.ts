/** JSON shapes served by the design-support API. */

export type PreferenceValue = 'Yes' | 'No' | 'Good' | 'Bad' | 'Pinned';

export interface ServiceEntry {
  name: string;
  usage: string;
  settings: Record<string, string>;
}

export interface SummaryView {
  diagram: string;
  aspects: Record<string, string>;
}

export interface IssueView {
  service: string;
  issue: string;
  reason: string;
  alternatives: string[];
}

export interface ArchitectureView {
  services: ServiceEntry[];
  summary: SummaryView;
  inspection: IssueView[];
  inquiry: string[];
}

export interface ServiceChange {
  name: string;
  setting_keys: string[];
}

export interface DiffView {
  added: string[];
  removed: string[];
  changed: ServiceChange[];
}

export interface UserStateView {
  subject: string;
  preferences: Record<string, PreferenceValue>;
}

export interface SessionView {
  session_id: string;
  created_at: string;
  status: string;
  iteration_count: number;
  user_state: UserStateView;
  iteration: number | null;
  architecture: ArchitectureView | null;
  diff: DiffView | null;
}

export type JobState = 'Queued' | 'Running' | 'Done' | 'Failed';

export interface JobView {
  job_id: string;
  session_id: string;
  state: JobState;
  error: string | null;
  iteration: number | null;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}

export const SUMMARY_ASPECT_KEYS = [
  'security',
  'reliability',
  'scalability',
  'cost',
  'performance',
  'storage',
  'analytics',
  'operation',
] as const;
