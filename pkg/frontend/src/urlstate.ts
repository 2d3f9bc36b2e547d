// Shareable-URL serialization of the mixer state. Loading the URL rebuilds
// an identical state, so a fresh session reproduces the gallery
// byte-for-byte (the service is deterministic in the request body).

import { MixerState, validateMixerState } from "./types.js";

export function serializeMixerState(state: MixerState): string {
  validateMixerState(state);
  const params = new URLSearchParams();
  params.set("gen", state.generatorId);
  for (const term of state.directions) {
    params.append("dir", `${term.id}:${term.coeff}`);
  }
  params.set("strength", String(state.strength));
  params.set("seeds", state.seeds.join(","));
  params.set("psi", String(state.psi));
  return params.toString();
}

export function parseMixerState(query: string): MixerState {
  const params = new URLSearchParams(query);
  const generatorId = params.get("gen");
  if (!generatorId) throw new Error("url state is missing the generator id");
  const directions = params.getAll("dir").map((raw) => {
    const sep = raw.lastIndexOf(":");
    if (sep <= 0) throw new Error(`malformed direction term ${raw}`);
    return { id: raw.slice(0, sep), coeff: Number(raw.slice(sep + 1)) };
  });
  const seedsRaw = params.get("seeds") ?? "0";
  const seeds = seedsRaw.split(",").map((s) => {
    const n = Number(s);
    if (s.trim() === "" || !Number.isInteger(n)) throw new Error(`malformed seed ${s}`);
    return n;
  });
  const state: MixerState = {
    generatorId,
    directions,
    strength: Number(params.get("strength") ?? "1"),
    seeds,
    psi: Number(params.get("psi") ?? "0.7"),
  };
  validateMixerState(state);
  return state;
}
