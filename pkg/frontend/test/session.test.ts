import { describe, expect, it } from "vitest";

import { ApiError, EditServiceClient } from "../src/api.js";
import { applyVerdict, initialSearch, probe, type SearchState } from "../src/bisect.js";
import { CanvasDocument } from "../src/canvas.js";
import { sha256Hex } from "../src/hash.js";
import { fromBase64 } from "../src/netpbm.js";
import { StudioSession } from "../src/session.js";
import type { Verdict } from "../src/types.js";

/** In-process stand-in for the editing service, speaking the same wire
 * protocol (ids, probe arithmetic, error envelopes, result bytes). */
function mockService(options: { busyOnce?: boolean } = {}) {
  interface Sess {
    search: SearchState;
    frozen: number | null;
    pending: boolean;
    guide: Uint8Array | null;
    results: Map<string, Uint8Array>;
    counter: number;
  }
  const sessions = new Map<string, Sess>();
  let busyArmed = options.busyOnce ?? false;

  const json = (status: number, body: unknown) =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  const fail = (status: number, code: string, message: string) =>
    json(status, { code, message });

  const handler = async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : {};

    if (path === "/v1/presets") {
      return json(200, {
        presets: [{
          name: "blobs-32-rgb", shape: [32, 32, 3], kind: "analytic-gmm",
          schedule: { variant: "ve" }, description: "",
        }],
      });
    }
    if (path === "/v1/sessions") {
      const id = Math.random().toString(16).slice(2).padEnd(32, "0");
      const sess: Sess = {
        search: initialSearch(), frozen: null, pending: false,
        guide: null, results: new Map(), counter: 0,
      };
      sessions.set(id, sess);
      return json(200, {
        session_id: id,
        preset: { name: body.preset, shape: [32, 32, 3], kind: "analytic-gmm",
                  schedule: {}, description: "" },
        probe_t0: probe(sess.search),
      });
    }
    const match = path.match(/^\/v1\/sessions\/([^/]+)\/(guide|generate|feedback|results\/(.+))$/);
    if (!match) return fail(404, "not-found", `no route ${path}`);
    const sess = sessions.get(match[1]);
    if (!sess) return fail(404, "not-found", "no such session");

    if (match[2] === "guide") {
      sess.guide = fromBase64(body.guide_ppm);
      sess.search = initialSearch();
      sess.frozen = null;
      sess.pending = false;
      return json(200, { width: 32, height: 32, channels: 3, masked: body.mask_ppm != null });
    }
    if (match[2] === "generate") {
      if (busyArmed) {
        busyArmed = false;
        return fail(409, "busy", "a generation is already in flight");
      }
      if (!sess.guide) return fail(400, "bad-request", "no guide submitted yet");
      const t0 = body.t0 ?? sess.frozen ?? probe(sess.search);
      sess.counter += 1;
      const rid = `r${sess.counter}`;
      sess.results.set(rid, sess.guide); // payload bytes: echo is enough here
      sess.pending = true;
      return json(200, {
        result_id: rid, t0, n_steps: body.n_steps ?? 500,
        repeats: body.repeats ?? 1, seed: body.seed ?? sess.counter,
        l2: 1.5, l2_squared: 2.25,
      });
    }
    if (match[2] === "feedback") {
      if (!sess.pending) return fail(400, "bad-request", "no candidate yet");
      const verdict = body.verdict as Verdict;
      if (!["more_realistic", "more_faithful", "accept"].includes(verdict)) {
        return fail(400, "bad-request", `unknown verdict ${verdict}`);
      }
      const accepted_at = probe(sess.search);
      sess.search = applyVerdict(sess.search, verdict);
      if (verdict === "accept") sess.frozen = accepted_at;
      sess.pending = false;
      const probe_t0 = sess.frozen ?? probe(sess.search);
      return json(200, {
        probe_t0, accepted: sess.search.accepted,
        interval: [sess.search.lo, sess.search.hi],
      });
    }
    const rid = match[3];
    const payload = sess.results.get(rid);
    if (!payload) return fail(404, "not-found", `no result ${rid}`);
    return new Response(payload.slice().buffer as ArrayBuffer, {
      status: 200, headers: { "content-type": "image/x-portable-pixmap" },
    });
  };
  return handler as typeof fetch;
}

function paintedDocument(): CanvasDocument {
  const doc = new CanvasDocument(32, 32);
  doc.brushColor = [40, 120, 220];
  doc.brushRadius = 3;
  doc.paintLine(4, 4, 26, 20);
  doc.brushColor = [230, 60, 40];
  doc.paintLine(6, 26, 28, 26);
  return doc;
}

describe("scripted editing session", () => {
  it("drives probe 0.45 -> 0.525 -> 0.4875 and preserves guide provenance", async () => {
    const client = new EditServiceClient("http://svc", mockService());
    const session = await StudioSession.open(client, "blobs-32-rgb");

    // the nominal sequence, computed with the same midpoint arithmetic the
    // server uses; asserted exactly below
    const s0 = initialSearch();
    const p0 = probe(s0);
    const s1 = applyVerdict(s0, "more_realistic");
    const p1 = probe(s1);
    const s2 = applyVerdict(s1, "more_faithful");
    const p2 = probe(s2);
    expect(p0).toBeCloseTo(0.45, 12);
    expect(p1).toBeCloseTo(0.525, 12);
    expect(p2).toBeCloseTo(0.4875, 12);

    const doc = paintedDocument();
    const ack = await session.submitDocument(doc);
    expect(ack).toMatchObject({ width: 32, height: 32, channels: 3, masked: true });
    const exportedHash = session.exportedGuideHash!;
    expect(exportedHash).toBe(await sha256Hex(doc.export().guideBytes));

    const c1 = await session.generate();
    expect(c1.t0).toBe(p0);
    expect(await session.sendFeedback("more_realistic")).toBe(p1);

    const c2 = await session.generate();
    expect(c2.t0).toBe(p1);
    expect(await session.sendFeedback("more_faithful")).toBe(p2);

    const c3 = await session.generate();
    expect(c3.t0).toBe(p2);
    await session.sendFeedback("accept");
    expect(session.accepted).toBe(true);
    expect(session.probeT0).toBe(p2);

    // provenance: every candidate carries the exported guide's hash
    expect(session.gallery.map((c) => c.guideHash))
      .toEqual([exportedHash, exportedHash, exportedHash]);
    expect(c3.guideHash).toBe(exportedHash);

    // accepted t0 sticks for later generations
    const c4 = await session.generate();
    expect(c4.t0).toBe(p2);
  });

  it("surfaces busy as a typed error without corrupting state", async () => {
    const client = new EditServiceClient("http://svc", mockService({ busyOnce: true }));
    const session = await StudioSession.open(client, "blobs-32-rgb");
    await session.submitDocument(paintedDocument());
    const before = session.probeT0;
    await expect(session.generate()).rejects.toMatchObject({
      name: "ApiError",
      code: "busy",
      status: 409,
    });
    expect(session.gallery).toHaveLength(0);
    expect(session.probeT0).toBe(before);
    // the next attempt succeeds
    const candidate = await session.generate();
    expect(candidate.t0).toBe(before);
  });

  it("refuses to generate before a guide is exported", async () => {
    const client = new EditServiceClient("http://svc", mockService());
    const session = await StudioSession.open(client, "blobs-32-rgb");
    await expect(session.generate()).rejects.toThrow(/no guide/);
  });

  it("feedback before any candidate is a protocol error", async () => {
    const client = new EditServiceClient("http://svc", mockService());
    const session = await StudioSession.open(client, "blobs-32-rgb");
    await session.submitDocument(paintedDocument());
    await expect(session.sendFeedback("more_realistic")).rejects.toBeInstanceOf(ApiError);
  });

  it("resubmitting a guide resets the search and provenance", async () => {
    const client = new EditServiceClient("http://svc", mockService());
    const session = await StudioSession.open(client, "blobs-32-rgb");
    await session.submitDocument(paintedDocument());
    await session.generate();
    await session.sendFeedback("more_realistic");

    const doc2 = paintedDocument();
    doc2.brushColor = [10, 200, 10];
    doc2.paintDot(16, 16);
    await session.submitDocument(doc2);
    expect(session.probeT0).toBe(probe(initialSearch()));
    const c = await session.generate();
    expect(c.guideHash).toBe(await sha256Hex(doc2.export().guideBytes));
  });
});
