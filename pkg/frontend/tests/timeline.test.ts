import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { TimelineController, framePosition } from "../src/timeline.js";
import { MorphTimeline } from "../src/types.js";
import { readStoredZip } from "../src/zip.js";
import { makeMockServer } from "./mock_server.js";

const timeline: MorphTimeline = {
  stages: [
    { type: "direction_ramp", generator: "gen-p", direction: "dir-a", from: 0, to: 1 },
    { type: "weight_blend", generator_a: "gen-p", generator_b: "gen-c", direction: "dir-a" },
    { type: "direction_crossfade", generator: "gen-c", direction_a: "dir-a", direction_b: "dir-b" },
    { type: "weight_blend", generator_a: "gen-c", generator_b: "gen-p", direction: "dir-b" },
  ],
  framesPerStage: 5,
  seed: 3,
  psi: 0.7,
  position: 0,
};

describe("TimelineController", () => {
  it("scrub(0) and scrub(1) fetch the schedule endpoints", async () => {
    const mock = makeMockServer();
    const controller = new TimelineController(new ServiceClient("", mock.fetchFn), timeline);
    const start = await controller.scrub(0);
    const end = await controller.scrub(1);
    expect(new TextDecoder().decode(start!.png)).toContain('"material":"0.000000000"');
    expect(new TextDecoder().decode(end!.png)).toContain('"material":"4.000000000"');
  });

  it("monotone scrub reproduces the server-side batch render hashes", async () => {
    const mock = makeMockServer();
    const controller = new TimelineController(new ServiceClient("", mock.fetchFn), timeline);
    const archive = await controller.archive();
    const frames = readStoredZip(archive.bytes);
    expect(frames).toHaveLength(timeline.stages.length * timeline.framesPerStage);
    for (let k = 0; k < frames.length; k++) {
      const preview = await controller.scrub(framePosition(timeline, k));
      expect(new TextDecoder().decode(preview!.png)).toBe(
        new TextDecoder().decode(frames[k]!.data),
      );
    }
  });

  it("stage boundaries share one frame across the seam", async () => {
    const mock = makeMockServer();
    const controller = new TimelineController(new ServiceClient("", mock.fetchFn), timeline);
    const archive = await controller.archive();
    const frames = readStoredZip(archive.bytes);
    const f = timeline.framesPerStage;
    for (let s = 0; s + 1 < timeline.stages.length; s++) {
      expect(Array.from(frames[s * f + f - 1]!.data)).toEqual(
        Array.from(frames[(s + 1) * f]!.data),
      );
    }
  });

  it("a stale scrub response never paints over a newer one", async () => {
    const gates: (() => void)[] = [];
    const mock = makeMockServer({
      beforeRespond: async (call) => {
        if (call.path !== "/morph") return;
        await new Promise<void>((resolve) => gates.push(resolve));
      },
    });
    const controller = new TimelineController(new ServiceClient("", mock.fetchFn), timeline);
    const first = controller.scrub(0.2);
    const second = controller.scrub(0.8);
    await new Promise((r) => setTimeout(r, 0));
    expect(gates).toHaveLength(2);
    gates[1]!(); // newest lands first
    const newest = await second;
    gates[0]!(); // stale arrives late
    expect(await first).toBeNull();
    expect(controller.current).toBe(newest);
    expect(controller.current!.position).toBe(0.8);
  });

  it("validates scrub positions and timeline shape", async () => {
    const mock = makeMockServer();
    const controller = new TimelineController(new ServiceClient("", mock.fetchFn), timeline);
    await expect(controller.scrub(1.5)).rejects.toThrow();
    expect(
      () =>
        new TimelineController(new ServiceClient("", mock.fetchFn), {
          ...timeline,
          stages: [],
        }),
    ).toThrow();
  });
});
