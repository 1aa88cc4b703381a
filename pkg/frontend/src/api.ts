/** Thin typed client over the editing service; the only network surface. */

import type {
  FeedbackResult,
  GenerateResult,
  GuideAck,
  PresetInfo,
  SessionCreated,
  Verdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface GuidePayload {
  guidePpm?: string; // base64 netpbm bytes
  maskPpm?: string;
  guideVector?: number[];
  maskVector?: number[];
}

export interface GenerateOptions {
  t0?: number;
  nSteps?: number;
  repeats?: number;
  seed?: number;
}

async function parseError(res: Response): Promise<never> {
  let code = "internal";
  let message = `HTTP ${res.status}`;
  try {
    const body = (await res.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    /* non-JSON error body; keep defaults */
  }
  throw new ApiError(code, message, res.status);
}

export class EditServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  async listPresets(): Promise<PresetInfo[]> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/presets`);
    if (!res.ok) await parseError(res);
    const body = (await res.json()) as { presets: PresetInfo[] };
    return body.presets;
  }

  async createSession(preset: string): Promise<SessionCreated> {
    const raw = await this.postJson<{
      session_id: string;
      preset: PresetInfo;
      probe_t0: number;
    }>("/v1/sessions", { preset });
    return { sessionId: raw.session_id, preset: raw.preset, probeT0: raw.probe_t0 };
  }

  async submitGuide(sessionId: string, payload: GuidePayload): Promise<GuideAck> {
    return this.postJson<GuideAck>(`/v1/sessions/${sessionId}/guide`, {
      guide_ppm: payload.guidePpm,
      guide_vector: payload.guideVector,
      mask_ppm: payload.maskPpm,
      mask_vector: payload.maskVector,
    });
  }

  async generate(sessionId: string, opts: GenerateOptions = {}): Promise<GenerateResult> {
    const raw = await this.postJson<{
      result_id: string;
      t0: number;
      n_steps: number;
      repeats: number;
      seed: number;
      l2: number;
      l2_squared: number;
    }>(`/v1/sessions/${sessionId}/generate`, {
      t0: opts.t0,
      n_steps: opts.nSteps,
      repeats: opts.repeats,
      seed: opts.seed,
    });
    return {
      resultId: raw.result_id,
      t0: raw.t0,
      nSteps: raw.n_steps,
      repeats: raw.repeats,
      seed: raw.seed,
      l2: raw.l2,
      l2Squared: raw.l2_squared,
    };
  }

  async feedback(sessionId: string, verdict: Verdict): Promise<FeedbackResult> {
    const raw = await this.postJson<{
      probe_t0: number;
      accepted: boolean;
      interval: [number, number];
    }>(`/v1/sessions/${sessionId}/feedback`, { verdict });
    return { probeT0: raw.probe_t0, accepted: raw.accepted, interval: raw.interval };
  }

  async fetchResult(sessionId: string, resultId: string): Promise<Uint8Array> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/v1/sessions/${sessionId}/results/${resultId}`,
    );
    if (!res.ok) await parseError(res);
    return new Uint8Array(await res.arrayBuffer());
  }
}
