/** Typed client for the documented service endpoints — nothing else. */

import type {
  ApiErrorBody,
  JobView,
  PreferenceValue,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly token: string = '',
  ) {}

  private async request<T>(
    method: 'GET' | 'POST',
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['content-type'] = 'application/json';
    if (this.token) headers['authorization'] = `Bearer ${this.token}`;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = `HTTP${response.status}`;
      let message = response.statusText;
      try {
        const payload = (await response.json()) as ApiErrorBody;
        code = payload.error.code;
        message = payload.error.message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  createSession(subject: string): Promise<SessionView> {
    return this.request('POST', '/sessions', { subject });
  }

  getSession(sessionId: string, iteration?: number): Promise<SessionView> {
    const query = iteration === undefined ? '' : `?iteration=${iteration}`;
    return this.request('GET', `/sessions/${sessionId}${query}`);
  }

  startIteration(sessionId: string): Promise<JobView> {
    return this.request('POST', `/sessions/${sessionId}/iterations`);
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request('GET', `/jobs/${jobId}`);
  }

  answer(
    sessionId: string,
    question: string,
    answer: Extract<PreferenceValue, 'Yes' | 'No'>,
  ): Promise<SessionView> {
    return this.request('POST', `/sessions/${sessionId}/answers`, {
      question,
      answer,
    });
  }

  rate(
    sessionId: string,
    alternative: string,
    rating: Extract<PreferenceValue, 'Good' | 'Bad'>,
  ): Promise<SessionView> {
    return this.request('POST', `/sessions/${sessionId}/ratings`, {
      alternative,
      rating,
    });
  }

  pin(sessionId: string, service: string): Promise<SessionView> {
    return this.request('POST', `/sessions/${sessionId}/pins`, { service });
  }

  exportUrl(sessionId: string, format: 'md' | 'json'): string {
    return `${this.baseUrl}/sessions/${sessionId}/export?format=${format}`;
  }
}
