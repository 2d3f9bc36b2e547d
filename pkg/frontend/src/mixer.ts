// Interactive direction mixing: sliders feed a debounced /mix + /generate
// round trip; responses carry a sequence number so stale replies can never
// overwrite a newer gallery.

import { ServiceClient } from "./api.js";
import { readStoredZip } from "./zip.js";
import {
  GalleryImage,
  GallerySnapshot,
  MixerState,
  validateMixerState,
} from "./types.js";

export const SLIDER_DEBOUNCE_MS = 150;

type Listener = (snapshot: GallerySnapshot) => void;
type ErrorListener = (error: Error) => void;

export class MixerController {
  private state: MixerState;
  private sequence = 0;
  private applied = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private listeners: Listener[] = [];
  private errorListeners: ErrorListener[] = [];
  gallery: GallerySnapshot | null = null;

  constructor(
    private readonly client: ServiceClient,
    initial: MixerState,
    private readonly debounceMs: number = SLIDER_DEBOUNCE_MS,
  ) {
    validateMixerState(initial);
    this.state = structuredClone(initial);
  }

  getState(): MixerState {
    return structuredClone(this.state);
  }

  onGallery(listener: Listener): void {
    this.listeners.push(listener);
  }

  onError(listener: ErrorListener): void {
    this.errorListeners.push(listener);
  }

  /** Slider / input mutation entry point; schedules a debounced refresh. */
  update(patch: Partial<MixerState>): void {
    const next = { ...this.state, ...structuredClone(patch) };
    validateMixerState(next);
    this.state = next;
    this.schedule();
  }

  setCoefficient(directionId: string, coeff: number): void {
    const directions = this.state.directions.map((term) =>
      term.id === directionId ? { ...term, coeff } : term,
    );
    if (!directions.some((t) => t.id === directionId)) directions.push({ id: directionId, coeff });
    this.update({ directions });
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.refresh();
    }, this.debounceMs);
  }

  /** One /mix (when directions are set) + one /generate, newest wins. */
  async refresh(): Promise<GallerySnapshot | null> {
    const seq = ++this.sequence;
    const state = structuredClone(this.state);
    try {
      let mixedId: string | null = null;
      let terms = state.directions;
      if (terms.length > 0) {
        const entry = await this.client.mix(terms);
        mixedId = entry.id;
        terms = [{ id: entry.id, coeff: 1.0 }];
      }
      const payload = await this.client.generate({
        generator_id: state.generatorId,
        directions: terms,
        strength: state.strength,
        seeds: state.seeds,
        psi: state.psi,
      });
      if (seq < this.applied) return null; // a newer response already landed
      const images = this.unpack(payload.bytes, payload.mediaType, state.seeds);
      const snapshot: GallerySnapshot = {
        sequence: seq,
        contentHash: payload.contentHash,
        images,
        mixedDirectionId: mixedId,
      };
      this.applied = seq;
      this.gallery = snapshot;
      for (const listener of this.listeners) listener(snapshot);
      return snapshot;
    } catch (error) {
      if (seq >= this.applied) {
        for (const listener of this.errorListeners) listener(error as Error);
      }
      return null;
    }
  }

  private unpack(bytes: Uint8Array, mediaType: string, seeds: number[]): GalleryImage[] {
    if (mediaType.startsWith("image/png")) {
      const seed = seeds[0];
      if (seed === undefined) throw new Error("no seeds in request");
      return [{ seed, png: bytes }];
    }
    return readStoredZip(bytes).map((entry, i) => {
      const seed = seeds[i];
      if (seed === undefined) throw new Error("archive has more entries than seeds");
      return { seed, png: entry.data };
    });
  }

  /** Pending debounce timer, exposed for deterministic tests. */
  hasPendingRefresh(): boolean {
    return this.timer !== null;
  }
}
