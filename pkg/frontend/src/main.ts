// DOM wiring for the console: direction sliders, strength/psi/seed inputs,
// the regenerated gallery, and the morph timeline scrubber.

import { ServiceClient } from "./api.js";
import { MixerController } from "./mixer.js";
import { TimelineController } from "./timeline.js";
import { parseMixerState, serializeMixerState } from "./urlstate.js";
import { GALLERY_SEED_CAP, MixerState, MorphTimeline } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function pngUrl(png: Uint8Array): string {
  const copy = new Uint8Array(png); // detach from any shared archive buffer
  return URL.createObjectURL(new Blob([copy.buffer], { type: "image/png" }));
}

async function boot(): Promise<void> {
  const client = new ServiceClient("");
  const gallery = el<HTMLDivElement>("gallery");
  const status = el<HTMLDivElement>("status");

  let initial: MixerState;
  try {
    initial = parseMixerState(window.location.search.slice(1));
  } catch {
    const entries = await client.registry();
    const generator = entries.find((e) => e.kind === "generator");
    if (!generator) {
      status.textContent = "register a generator first (see README)";
      return;
    }
    initial = {
      generatorId: generator.id,
      directions: entries
        .filter((e) => e.kind === "direction")
        .slice(0, 4)
        .map((e) => ({ id: e.id, coeff: 0.0 })),
      strength: 1.0,
      seeds: Array.from({ length: 8 }, (_, i) => i),
      psi: 0.7,
    };
  }

  const mixer = new MixerController(client, initial);
  mixer.onGallery((snapshot) => {
    gallery.replaceChildren(
      ...snapshot.images.map((image) => {
        const img = document.createElement("img");
        img.src = pngUrl(image.png);
        img.title = `seed ${image.seed}`;
        img.width = 128;
        return img;
      }),
    );
    status.textContent = `gallery ${snapshot.contentHash.slice(0, 12)} (seq ${snapshot.sequence})`;
    const url = `${window.location.pathname}?${serializeMixerState(mixer.getState())}`;
    window.history.replaceState(null, "", url);
  });
  mixer.onError((error) => {
    status.textContent = `error: ${error.message}`;
  });

  const sliders = el<HTMLDivElement>("sliders");
  for (const term of initial.directions) {
    const row = document.createElement("div");
    const label = document.createElement("label");
    label.textContent = term.id;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "-2";
    input.max = "2";
    input.step = "0.05";
    input.value = String(term.coeff);
    input.addEventListener("input", () => mixer.setCoefficient(term.id, Number(input.value)));
    const value = document.createElement("span");
    input.addEventListener("input", () => (value.textContent = input.value));
    row.append(label, input, value);
    sliders.append(row);
  }

  el<HTMLInputElement>("strength").addEventListener("input", (event) => {
    mixer.update({ strength: Number((event.target as HTMLInputElement).value) });
  });
  el<HTMLInputElement>("psi").addEventListener("input", (event) => {
    mixer.update({ psi: Number((event.target as HTMLInputElement).value) });
  });
  el<HTMLInputElement>("seeds").addEventListener("change", (event) => {
    const seeds = (event.target as HTMLInputElement).value
      .split(",")
      .map((s) => Number(s.trim()))
      .filter((n) => Number.isFinite(n))
      .slice(0, GALLERY_SEED_CAP);
    if (seeds.length > 0) mixer.update({ seeds });
  });

  void mixer.refresh();

  // Morph timeline: paste a plan JSON, scrub for server-rendered previews.
  const planInput = el<HTMLTextAreaElement>("plan");
  const scrubber = el<HTMLInputElement>("scrubber");
  const preview = el<HTMLImageElement>("preview");
  let timelineController: TimelineController | null = null;
  el<HTMLButtonElement>("load-plan").addEventListener("click", () => {
    try {
      const doc = JSON.parse(planInput.value) as Partial<MorphTimeline> & {
        stages: MorphTimeline["stages"];
      };
      const timeline: MorphTimeline = {
        stages: doc.stages,
        framesPerStage: doc.framesPerStage ?? 8,
        seed: doc.seed ?? 0,
        psi: doc.psi ?? 0.7,
        position: 0,
      };
      timelineController = new TimelineController(client, timeline);
      timelineController.onFrame((frame) => {
        preview.src = pngUrl(frame.png);
        status.textContent = `frame @ ${frame.position.toFixed(3)} (${frame.contentHash.slice(0, 12)})`;
      });
      void timelineController.scrub(0);
    } catch (error) {
      status.textContent = `plan error: ${(error as Error).message}`;
    }
  });
  scrubber.addEventListener("input", () => {
    if (timelineController) void timelineController.scrub(Number(scrubber.value));
  });
}

void boot();
