// Morph timeline: the scrubber maps a schedule position in [0, 1] to a
// single-frame /morph preview. Only the newest scrub position may paint.

import { ServiceClient } from "./api.js";
import { MorphTimeline, validateTimeline } from "./types.js";

export interface PreviewFrame {
  position: number;
  png: Uint8Array;
  contentHash: string;
}

type FrameListener = (frame: PreviewFrame) => void;

/** Schedule position of archive frame `index` (stages x framesPerStage grid). */
export function framePosition(timeline: MorphTimeline, index: number): number {
  const f = timeline.framesPerStage;
  const stage = Math.floor(index / f);
  const local = (index % f) / (f - 1);
  return (stage + local) / timeline.stages.length;
}

export class TimelineController {
  private latestRequested = -1;
  private appliedPosition = -1;
  private listeners: FrameListener[] = [];
  current: PreviewFrame | null = null;

  constructor(
    private readonly client: ServiceClient,
    public timeline: MorphTimeline,
  ) {
    validateTimeline(timeline);
  }

  onFrame(listener: FrameListener): void {
    this.listeners.push(listener);
  }

  /** Scrub to a schedule position; stale previews are dropped on arrival. */
  async scrub(position: number): Promise<PreviewFrame | null> {
    if (!(position >= 0 && position <= 1)) throw new Error("position must lie in [0, 1]");
    this.timeline = { ...this.timeline, position };
    const ticket = ++this.requestCounter;
    this.latestRequested = ticket;
    const payload = await this.client.morphPreview({
      stages: this.timeline.stages,
      frames_per_stage: this.timeline.framesPerStage,
      seed: this.timeline.seed,
      psi: this.timeline.psi,
      preview_at: position,
    });
    if (ticket !== this.latestRequested) return null; // superseded while in flight
    const frame: PreviewFrame = {
      position,
      png: payload.bytes,
      contentHash: payload.contentHash,
    };
    this.appliedPosition = position;
    this.current = frame;
    for (const listener of this.listeners) listener(frame);
    return frame;
  }

  private requestCounter = 0;

  /** Fetch the full server-side batch render of the schedule. */
  async archive(): Promise<{ bytes: Uint8Array; contentHash: string }> {
    const payload = await this.client.morphArchive({
      stages: this.timeline.stages,
      frames_per_stage: this.timeline.framesPerStage,
      seed: this.timeline.seed,
      psi: this.timeline.psi,
    });
    return { bytes: payload.bytes, contentHash: payload.contentHash };
  }
}
