/**
 * Typed client for the session control API.
 *
 * The backend exposes a small JSON/HTTP surface:
 *   GET  /inputs                  demo input gallery
 *   POST /session                 {server_url, input_id} -> {session_id}
 *   GET  /session/{id}            state snapshot
 *   POST /session/{id}/pause      |
 *   POST /session/{id}/resume     | state-machine transitions (409 when invalid)
 *   POST /session/{id}/stop       |
 *   POST /session/{id}/choice     {label} manual pick; stops a live session
 */

export type SessionStatus = 'downloading' | 'paused' | 'stopped' | 'complete';

export interface DemoInput {
  id: string;
  label: string;
  features: number[];
}

/** One per-stage prediction, rendered as a card. */
export interface StageCard {
  stage: number;
  bits: number;
  class_index: number;
  confidence: number;
  probabilities: number[];
  elapsed_s: number;
}

export interface StageTiming {
  stage: number;
  transfer_start: number;
  transfer_end: number;
  infer_start: number | null;
  infer_end: number | null;
}

/** Manual "do it myself" pick, plus whether the transfer was still running. */
export interface Choice {
  label: string;
  while_transmitting: boolean;
}

export interface SessionSnapshot {
  session_id: string;
  status: SessionStatus;
  stages_received: number;
  stages_total: number;
  bytes_received: number;
  elapsed_s: number;
  timings: StageTiming[];
  results: StageCard[];
  error: string | null;
  choice: Choice | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ControlClient {
  private readonly fetchFn: FetchLike;

  constructor(readonly baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async listInputs(): Promise<DemoInput[]> {
    const body = await this.request('/inputs');
    return body.inputs as DemoInput[];
  }

  async createSession(serverUrl: string, inputId: string): Promise<string> {
    const body = await this.post('/session', {
      server_url: serverUrl,
      input_id: inputId,
    });
    return body.session_id as string;
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request(`/session/${sessionId}`);
  }

  pause(sessionId: string): Promise<SessionSnapshot> {
    return this.post(`/session/${sessionId}/pause`);
  }

  resume(sessionId: string): Promise<SessionSnapshot> {
    return this.post(`/session/${sessionId}/resume`);
  }

  stop(sessionId: string): Promise<SessionSnapshot> {
    return this.post(`/session/${sessionId}/stop`);
  }

  choose(sessionId: string, label: string): Promise<SessionSnapshot> {
    return this.post(`/session/${sessionId}/choice`, { label });
  }

  private post(path: string, payload?: unknown): Promise<any> {
    return this.request(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload ?? {}),
    });
  }

  private async request(path: string, init?: RequestInit): Promise<any> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, body.error ?? `HTTP ${response.status}`);
    }
    return body;
  }
}
