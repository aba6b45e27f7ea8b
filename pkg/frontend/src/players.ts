// Side-by-side stimulus playback and the reference overlay.
//
// The logic is written against a narrow media interface so it tests
// without a real DOM; app.ts adapts HTMLVideoElement / HTMLImageElement
// to it.

export interface MediaLike {
  /** Begin or restart playback from the start (no-op for still images). */
  restart(): void;
  /** Resolves once the media can play through; rejects on load failure. */
  ready(): Promise<void>;
}

export type PairLoadOutcome = "loaded" | "failed";

/**
 * Couple two stimulus players: wait for both to load, start them
 * together, and restart both on replay so the pair stays in sync.
 */
export class PairedPlayers {
  private loaded = false;

  constructor(private left: MediaLike, private right: MediaLike) {}

  async start(): Promise<PairLoadOutcome> {
    try {
      await Promise.all([this.left.ready(), this.right.ready()]);
    } catch {
      return "failed";
    }
    this.loaded = true;
    this.left.restart();
    this.right.restart();
    return "loaded";
  }

  /** Unlimited replay: both restart together; ignored until loaded. */
  replay(): void {
    if (!this.loaded) return;
    this.left.restart();
    this.right.restart();
  }

  get isLoaded(): boolean {
    return this.loaded;
  }
}

/**
 * Reference display: a single overlay instance that replays the
 * reference media on demand and leaves the pending pair untouched.
 */
export class ReferenceOverlay {
  private openCount = 0;
  private visible = false;

  constructor(
    private media: MediaLike,
    private show: () => void,
    private hide: () => void,
  ) {}

  async open(): Promise<void> {
    this.openCount += 1;
    if (this.visible) {
      this.media.restart();
      return;
    }
    this.visible = true;
    this.show();
    try {
      await this.media.ready();
      this.media.restart();
    } catch {
      // reference failing to load must not break the session; the
      // overlay simply shows its error state
    }
  }

  dismiss(): void {
    if (!this.visible) return;
    this.visible = false;
    this.hide();
  }

  get isOpen(): boolean {
    return this.visible;
  }

  get timesOpened(): number {
    return this.openCount;
  }
}
