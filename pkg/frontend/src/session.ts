// Session state machine for a paired-comparison run.
//
// Owns the protocol invariants, independent of any DOM:
//  - a winner can be submitted only for the currently displayed pair,
//    and only once both media have signalled readiness;
//  - a submission in flight blocks further submissions (double clicks
//    collapse into one choice, helped by the server's token idempotency);
//  - a network failure retries the same token, a stale-token conflict
//    re-fetches the server's pending pair instead of guessing.

import { ApiError, PendingPair, SessionState, StudyApi } from "./api.js";

export type Phase = "loading-media" | "ready" | "submitting" | "complete" | "media-error";

export interface UiSnapshot {
  phase: Phase;
  pair: PendingPair | null;
  referenceUrl: string | null;
  completedChoices: number;
  minRemaining: number | null;
  maxRemaining: number | null;
  ranking: string[] | null;
}

export type Listener = (snapshot: UiSnapshot) => void;

export class UiSession {
  private phase: Phase = "loading-media";
  private state: SessionState;
  private mediaReady = false;
  private listeners: Listener[] = [];
  readonly winners: string[] = [];

  constructor(private api: StudyApi, initial: SessionState) {
    this.state = initial;
    this.phase = initial.status === "active" ? "loading-media" : "complete";
  }

  static async open(api: StudyApi, studyId: string, subject = ""): Promise<UiSession> {
    return new UiSession(api, await api.createSession(studyId, subject));
  }

  get sessionId(): string {
    return this.state.session_id;
  }

  snapshot(): UiSnapshot {
    return {
      phase: this.phase,
      pair: this.state.pair,
      referenceUrl: this.state.reference?.media_url ?? null,
      completedChoices: this.state.completed_choices,
      minRemaining: this.state.progress?.min_remaining ?? null,
      maxRemaining: this.state.progress?.max_remaining ?? null,
      ranking: this.state.ranking ?? null,
    };
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const listener of this.listeners) listener(snap);
  }

  /** The player layer reports that both stimuli finished their first load. */
  mediaLoaded(): void {
    if (this.phase === "loading-media" || this.phase === "media-error") {
      this.mediaReady = true;
      this.phase = "ready";
      this.emit();
    }
  }

  /** The player layer reports a failed media load; choosing stays disabled. */
  mediaFailed(): void {
    if (this.phase !== "complete") {
      this.mediaReady = false;
      this.phase = "media-error";
      this.emit();
    }
  }

  get canChoose(): boolean {
    return this.phase === "ready" && this.mediaReady && this.state.pair !== null;
  }

  /**
   * Submit the chosen stimulus and advance to the next pair (or the
   * completion state). Returns false when no submission was started
   * (nothing displayed, media not ready, or one already in flight).
   */
  async choose(winnerId: string, maxRetries = 3): Promise<boolean> {
    if (!this.canChoose) return false;
    const pair = this.state.pair!;
    if (winnerId !== pair.a.id && winnerId !== pair.b.id) {
      throw new Error(`winner ${winnerId} is not part of the displayed pair`);
    }
    this.phase = "submitting";
    this.emit();

    let attempt = 0;
    for (;;) {
      try {
        const next = await this.api.submitChoice(this.sessionId, pair.token, winnerId);
        this.winners.push(winnerId);
        this.absorb(next);
        return true;
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          // stale token: trust the server's idea of the pending pair
          this.absorb(await this.api.pendingPair(this.sessionId));
          return false;
        }
        if (error instanceof ApiError) {
          this.phase = "ready";
          this.emit();
          throw error;
        }
        // network failure: same token is safe to retry (idempotent)
        attempt += 1;
        if (attempt > maxRetries) {
          this.phase = "ready";
          this.emit();
          throw error;
        }
      }
    }
  }

  /** Re-sync with the server (e.g. after reconnecting). */
  async refresh(): Promise<void> {
    this.absorb(await this.api.pendingPair(this.sessionId));
  }

  private absorb(state: SessionState): void {
    const pairChanged =
      state.pair === null ||
      this.state.pair === null ||
      state.pair.token !== this.state.pair.token;
    this.state = state;
    if (state.status !== "active" || state.pair === null) {
      this.phase = "complete";
    } else if (pairChanged) {
      this.mediaReady = false;
      this.phase = "loading-media";
    } else {
      this.phase = this.mediaReady ? "ready" : "loading-media";
    }
    this.emit();
  }
}
