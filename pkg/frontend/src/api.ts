// Thin typed client over the service HTTP API. Every pixel comes from the
// service; this module never synthesizes image data locally.

import type {
  DirectionTerm,
  JobStatus,
  MorphStage,
  RegistryEntry,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface BinaryPayload {
  bytes: Uint8Array;
  contentHash: string;
  mediaType: string;
}

async function readBinary(resp: Response): Promise<BinaryPayload> {
  if (!resp.ok) throw new Error(`service error ${resp.status}: ${await resp.text()}`);
  const buf = new Uint8Array(await resp.arrayBuffer());
  return {
    bytes: buf,
    contentHash: resp.headers.get("x-content-sha256") ?? "",
    mediaType: resp.headers.get("content-type") ?? "application/octet-stream",
  };
}

async function readJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) throw new Error(`service error ${resp.status}: ${await resp.text()}`);
  return (await resp.json()) as T;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private post(path: string, body: unknown): Promise<Response> {
    return this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async registry(): Promise<RegistryEntry[]> {
    return readJson(await this.fetchFn(this.baseUrl + "/registry"));
  }

  async mix(directions: DirectionTerm[], domainLabel?: string): Promise<RegistryEntry> {
    return readJson(
      await this.post("/mix", { directions, domain_label: domainLabel ?? null }),
    );
  }

  async generate(body: {
    generator_id: string;
    directions: DirectionTerm[];
    strength: number;
    seeds: number[];
    psi: number;
  }): Promise<BinaryPayload> {
    return readBinary(await this.post("/generate", body));
  }

  async morphPreview(body: {
    stages: MorphStage[];
    frames_per_stage: number;
    seed: number;
    psi: number;
    preview_at: number;
  }): Promise<BinaryPayload> {
    return readBinary(await this.post("/morph", body));
  }

  async morphArchive(body: {
    stages: MorphStage[];
    frames_per_stage: number;
    seed: number;
    psi: number;
  }): Promise<BinaryPayload> {
    return readBinary(await this.post("/morph", body));
  }

  async adapt(body: Record<string, unknown>): Promise<JobStatus> {
    return readJson(await this.post("/adapt", body));
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    return readJson(await this.fetchFn(`${this.baseUrl}/jobs/${jobId}`));
  }
}
