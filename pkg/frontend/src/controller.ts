/**
 * Session lifecycle driver for the demo UI.
 *
 * Owns the poll loop (at most 2 Hz) and the button state machine. The
 * controller holds no authoritative state: every snapshot comes from the
 * control service, and stage cards are emitted strictly in stage order as
 * they appear in those snapshots.
 */

import {
  ApiError,
  ControlClient,
  SessionSnapshot,
  SessionStatus,
  StageCard,
} from './api.js';

export interface ControlsState {
  start: boolean;
  pause: boolean;
  resume: boolean;
  stop: boolean;
  choose: boolean;
}

/** Which controls the server-reported status allows. */
export function controlsFor(status: SessionStatus | null): ControlsState {
  switch (status) {
    case 'downloading':
      return { start: false, pause: true, resume: false, stop: true, choose: true };
    case 'paused':
      return { start: false, pause: false, resume: true, stop: true, choose: true };
    case 'stopped':
    case 'complete':
      return { start: true, pause: false, resume: false, stop: false, choose: true };
    default: // no session yet
      return { start: true, pause: false, resume: false, stop: false, choose: false };
  }
}

export type ActionOutcome =
  | { ok: true; snapshot: SessionSnapshot }
  | { ok: false; reason: 'busy' }
  | { ok: false; reason: 'rejected'; status: number; message: string }
  | { ok: false; reason: 'unreachable'; message: string };

export interface ControllerEvents {
  /** Every accepted snapshot, after any onCard calls it triggered. */
  onSnapshot?: (snapshot: SessionSnapshot) => void;
  /** Each stage result exactly once, in increasing stage order. */
  onCard?: (card: StageCard, snapshot: SessionSnapshot) => void;
  /** Connection banner: a message when the service is unreachable, null to clear. */
  onBanner?: (message: string | null) => void;
}

const UNREACHABLE = 'control service unreachable — retrying';

/** Extra polls allowed after a terminal status while results catch up. */
const TERMINAL_GRACE_POLLS = 3;

export class SessionController {
  sessionId: string | null = null;
  snapshot: SessionSnapshot | null = null;

  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private pollInFlight = false;
  private actionInFlight = false;
  private cardsSeen = 0;
  private graceLeft = TERMINAL_GRACE_POLLS;
  private disposed = false;

  constructor(
    private readonly client: ControlClient,
    private readonly events: ControllerEvents = {},
    private readonly pollMs = 500,
  ) {}

  get status(): SessionStatus | null {
    return this.snapshot?.status ?? null;
  }

  controls(): ControlsState {
    return controlsFor(this.status);
  }

  /** "Find automatically": create a session and start polling it. */
  start(serverUrl: string, inputId: string): Promise<ActionOutcome> {
    return this.act(async () => {
      const sessionId = await this.client.createSession(serverUrl, inputId);
      this.sessionId = sessionId;
      this.snapshot = null;
      this.cardsSeen = 0;
      this.graceLeft = TERMINAL_GRACE_POLLS;
      const snapshot = await this.client.getSession(sessionId);
      this.schedulePoll();
      return snapshot;
    });
  }

  pause(): Promise<ActionOutcome> {
    return this.act(() => this.client.pause(this.requireSession()));
  }

  resume(): Promise<ActionOutcome> {
    return this.act(async () => {
      const snapshot = await this.client.resume(this.requireSession());
      this.schedulePoll(); // transfer is live again
      return snapshot;
    });
  }

  stop(): Promise<ActionOutcome> {
    return this.act(() => this.client.stop(this.requireSession()));
  }

  /** "Do it myself": record a manual label; stops the transfer if live. */
  choose(label: string): Promise<ActionOutcome> {
    return this.act(() => this.client.choose(this.requireSession(), label));
  }

  dispose(): void {
    this.disposed = true;
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }

  // -- internals --------------------------------------------------------------

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new ApiError(0, 'no session started');
    }
    return this.sessionId;
  }

  /** Run one control call; at most one in flight at a time. */
  private async act(call: () => Promise<SessionSnapshot>): Promise<ActionOutcome> {
    if (this.actionInFlight) {
      return { ok: false, reason: 'busy' };
    }
    this.actionInFlight = true;
    try {
      const snapshot = await call();
      this.events.onBanner?.(null);
      this.ingest(snapshot);
      return { ok: true, snapshot };
    } catch (err) {
      if (err instanceof ApiError) {
        // Invalid transition (or stale session): the server state wins, so
        // refresh it and let the controls re-render as disabled.
        await this.refresh();
        return { ok: false, reason: 'rejected', status: err.status, message: err.message };
      }
      this.events.onBanner?.(UNREACHABLE);
      return { ok: false, reason: 'unreachable', message: String(err) };
    } finally {
      this.actionInFlight = false;
    }
  }

  private async refresh(): Promise<void> {
    if (this.sessionId === null) return;
    try {
      this.ingest(await this.client.getSession(this.sessionId));
    } catch {
      // the next poll tick retries
    }
  }

  private ingest(snapshot: SessionSnapshot): void {
    if (snapshot.results.length > this.cardsSeen) {
      this.graceLeft = TERMINAL_GRACE_POLLS;
    }
    this.snapshot = snapshot;
    while (this.cardsSeen < snapshot.results.length) {
      this.events.onCard?.(snapshot.results[this.cardsSeen], snapshot);
      this.cardsSeen += 1;
    }
    this.events.onSnapshot?.(snapshot);
  }

  /**
   * Polling stops once the status is terminal and every received stage has
   * its result (a stopped session may still be finishing one inference), or
   * after a few grace polls if results never catch up.
   */
  private donePolling(): boolean {
    if (this.snapshot === null) return false;
    const { status, results, stages_received } = this.snapshot;
    if (status !== 'stopped' && status !== 'complete') return false;
    if (results.length >= stages_received) return true;
    this.graceLeft -= 1;
    return this.graceLeft < 0;
  }

  private schedulePoll(): void {
    if (this.disposed || this.pollTimer !== null) return;
    this.pollTimer = setTimeout(() => {
      this.pollTimer = null;
      void this.poll();
    }, this.pollMs);
  }

  private async poll(): Promise<void> {
    if (this.disposed || this.sessionId === null) return;
    if (this.pollInFlight) {
      this.schedulePoll();
      return;
    }
    this.pollInFlight = true;
    try {
      const snapshot = await this.client.getSession(this.sessionId);
      this.events.onBanner?.(null);
      this.ingest(snapshot);
    } catch (err) {
      if (!(err instanceof ApiError)) {
        this.events.onBanner?.(UNREACHABLE); // keep polling: that is the retry
      }
    } finally {
      this.pollInFlight = false;
      if (!this.donePolling()) {
        this.schedulePoll();
      }
    }
  }
}
