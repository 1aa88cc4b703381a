/** Session controller: owns the probe state, the gallery, and provenance.
 *
 * Every candidate records the hash of the exact guide payload it was
 * generated from; the guide pixels are never mutated after export, so the
 * hash stored on a gallery item always matches the payload that produced it.
 * The local bisection mirror must agree with the server's probe exactly.
 */

import type { EditServiceClient, GenerateOptions } from "./api.js";
import { applyVerdict, initialSearch, probe, type SearchState } from "./bisect.js";
import type { CanvasDocument, ExportedGuide } from "./canvas.js";
import { sha256Hex } from "./hash.js";
import { toBase64 } from "./netpbm.js";
import type { GuideAck, PresetInfo, Verdict } from "./types.js";

export interface Candidate {
  resultId: string;
  t0: number;
  seed: number;
  l2: number;
  l2Squared: number;
  guideHash: string;
  payload: Uint8Array;
}

export class StudioSession {
  readonly gallery: Candidate[] = [];
  readonly history: Array<{ probe: number; verdict: Verdict }> = [];
  search: SearchState = initialSearch();
  lockedT0: number | null = null;
  exportedGuideHash: string | null = null;
  private lastExport: ExportedGuide | null = null;

  private constructor(
    private readonly client: EditServiceClient,
    readonly sessionId: string,
    readonly preset: PresetInfo,
  ) {}

  static async open(client: EditServiceClient, presetName: string): Promise<StudioSession> {
    const created = await client.createSession(presetName);
    const session = new StudioSession(client, created.sessionId, created.preset);
    if (created.probeT0 !== probe(session.search)) {
      throw new Error(
        `server probe ${created.probeT0} disagrees with local mirror ${probe(session.search)}`,
      );
    }
    return session;
  }

  get probeT0(): number {
    return this.lockedT0 ?? probe(this.search);
  }

  get accepted(): boolean {
    return this.search.accepted;
  }

  async submitDocument(doc: CanvasDocument): Promise<GuideAck> {
    const exported = doc.export();
    const ack = await this.client.submitGuide(this.sessionId, {
      guidePpm: toBase64(exported.guideBytes),
      maskPpm: toBase64(exported.maskBytes),
    });
    // the search resets server-side on a new guide; mirror that
    this.search = initialSearch();
    this.lockedT0 = null;
    this.lastExport = exported;
    this.exportedGuideHash = await sha256Hex(exported.guideBytes);
    return ack;
  }

  async generate(opts: GenerateOptions = {}): Promise<Candidate> {
    if (this.exportedGuideHash === null) {
      throw new Error("no guide submitted yet");
    }
    const result = await this.client.generate(this.sessionId, opts);
    const payload = await this.client.fetchResult(this.sessionId, result.resultId);
    const candidate: Candidate = {
      resultId: result.resultId,
      t0: result.t0,
      seed: result.seed,
      l2: result.l2,
      l2Squared: result.l2Squared,
      guideHash: this.exportedGuideHash,
      payload,
    };
    this.gallery.push(candidate);
    return candidate;
  }

  async sendFeedback(verdict: Verdict): Promise<number> {
    const before = probe(this.search);
    const response = await this.client.feedback(this.sessionId, verdict);
    this.history.push({ probe: before, verdict });
    if (verdict === "accept") {
      this.search = applyVerdict(this.search, verdict);
      this.lockedT0 = response.probeT0;
      return response.probeT0;
    }
    this.search = applyVerdict(this.search, verdict);
    const local = probe(this.search);
    if (response.probeT0 !== local) {
      throw new Error(
        `server probe ${response.probeT0} disagrees with local mirror ${local}`,
      );
    }
    return response.probeT0;
  }

  /** Exported guide payload backing the current candidates (for display). */
  get exportedGuide(): ExportedGuide | null {
    return this.lastExport;
  }
}
