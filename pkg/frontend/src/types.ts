// Shared state and wire types, mirroring the service's request bodies.

export interface DirectionTerm {
  id: string;
  coeff: number;
}

export interface MixerState {
  generatorId: string;
  directions: DirectionTerm[];
  strength: number;
  seeds: number[];
  psi: number;
}

export const GALLERY_SEED_CAP = 16;

export function validateMixerState(state: MixerState): void {
  if (!state.generatorId) throw new Error("mixer state needs a generator id");
  if (state.seeds.length === 0) throw new Error("mixer state needs at least one seed");
  if (state.seeds.length > GALLERY_SEED_CAP)
    throw new Error(`gallery is capped at ${GALLERY_SEED_CAP} seeds`);
  for (const term of state.directions) {
    if (!Number.isFinite(term.coeff))
      throw new Error(`coefficient for ${term.id} must be finite`);
  }
  if (!Number.isFinite(state.strength)) throw new Error("strength must be finite");
  if (!(state.psi >= 0 && state.psi <= 1)) throw new Error("psi must lie in [0, 1]");
}

// Morph plan stages exactly as the service's /morph endpoint expects them.

export interface DirectionRampStage {
  type: "direction_ramp";
  generator: string;
  direction: string;
  from?: number;
  to?: number;
}

export interface WeightBlendStage {
  type: "weight_blend";
  generator_a: string;
  generator_b: string;
  direction?: string | null;
  strength?: number;
}

export interface DirectionCrossfadeStage {
  type: "direction_crossfade";
  generator: string;
  direction_a: string;
  direction_b: string;
}

export type MorphStage = DirectionRampStage | WeightBlendStage | DirectionCrossfadeStage;

export interface MorphTimeline {
  stages: MorphStage[];
  framesPerStage: number;
  seed: number;
  psi: number;
  /** scrub position over the whole schedule, in [0, 1] */
  position: number;
}

export function validateTimeline(timeline: MorphTimeline): void {
  if (timeline.stages.length === 0) throw new Error("timeline needs at least one stage");
  if (timeline.framesPerStage < 2) throw new Error("framesPerStage must be >= 2");
  if (!(timeline.position >= 0 && timeline.position <= 1))
    throw new Error("scrub position must lie in [0, 1]");
}

export interface GalleryImage {
  seed: number;
  png: Uint8Array;
}

export interface GallerySnapshot {
  sequence: number;
  contentHash: string;
  images: GalleryImage[];
  mixedDirectionId: string | null;
}

export interface RegistryEntry {
  id: string;
  kind: string;
  path: string;
  fingerprint: string;
  metadata: Record<string, unknown>;
  created_at: number;
}

export interface JobStatus {
  job_id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: { done: number; total: number };
  result_id: string | null;
  error: string | null;
}
