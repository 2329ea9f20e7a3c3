import { FetchLike, SessionSnapshot, StageCard } from '../src/api.js';

export function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function card(stage: number): StageCard {
  return {
    stage,
    bits: stage * 2,
    class_index: 3,
    confidence: 0.4 + stage * 0.05,
    probabilities: [],
    elapsed_s: stage * 0.5,
  };
}

export function snap(partial: Partial<SessionSnapshot> = {}): SessionSnapshot {
  return {
    session_id: 's1',
    status: 'downloading',
    stages_received: 0,
    stages_total: 8,
    bytes_received: 0,
    elapsed_s: 0,
    timings: [],
    results: [],
    error: null,
    choice: null,
    ...partial,
  };
}

/**
 * Scripted control service. GETs walk through `snapshots` (sticking on the
 * last one); POSTed actions are recorded and answered via `actionReply`.
 */
export class FakeService {
  snapshots: SessionSnapshot[] = [snap()];
  getCount = 0;
  failNextGets = 0;
  actions: string[] = [];
  actionReply: (action: string) => Response | Promise<Response> = () =>
    json(200, snap());

  readonly fetchFn: FetchLike = async (url, init) => {
    const path = new URL(url).pathname;
    if (init?.method === 'POST') {
      if (path === '/session') {
        return json(201, { session_id: 's1' });
      }
      const action = path.split('/').pop() as string;
      this.actions.push(action);
      return this.actionReply(action);
    }
    if (this.failNextGets > 0) {
      this.failNextGets -= 1;
      throw new TypeError('fetch failed');
    }
    const index = Math.min(this.getCount, this.snapshots.length - 1);
    this.getCount += 1;
    return json(200, this.snapshots[index]);
  };
}
