/** Wire types for the editing service JSON API. */

export interface PresetInfo {
  name: string;
  shape: number[];
  kind: string;
  schedule: Record<string, unknown>;
  description: string;
}

export interface SessionCreated {
  sessionId: string;
  preset: PresetInfo;
  probeT0: number;
}

export interface GuideAck {
  width?: number;
  height?: number;
  channels?: number;
  dim?: number;
  masked: boolean;
}

export interface GenerateResult {
  resultId: string;
  t0: number;
  nSteps: number;
  repeats: number;
  seed: number;
  l2: number;
  l2Squared: number;
}

export interface FeedbackResult {
  probeT0: number;
  accepted: boolean;
  interval: [number, number];
}

export type Verdict = "more_realistic" | "more_faithful" | "accept";
