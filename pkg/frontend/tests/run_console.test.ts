import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api";
import { parseHistoryCsv, sparklinePath } from "../src/history";
import { createOverlay, overlayDimensionsMatch, pngDimensions, withOpacity } from "../src/overlay";
import type { AnnotationDocument, RunRecord } from "../src/types";

const DOC: AnnotationDocument = {
  image: "image.png",
  reverse: false,
  rois: [[[10, 10], [50, 10], [50, 50], [10, 50]]],
  samples: [{ cx: 20, cy: 20, r: 8 }],
};

const HISTORY_CSV = [
  "step,phase,lr,seg,edge,consist,total,train_dice",
  "0,1,0.001,1.2,0.9,0.4,2.5,",
  "1,1,0.001,1.0,0.8,0.35,2.15,",
  "2,2,0.0003,0.6,0.5,0.2,1.3,0.91",
].join("\n");

/** Minimal PNG header carrying just the IHDR dimensions. */
function fakePng(width: number, height: number): Uint8Array {
  const bytes = new Uint8Array(24);
  bytes.set([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a], 0);
  const view = new DataView(bytes.buffer);
  view.setUint32(8, 13); // IHDR length
  bytes.set([0x49, 0x48, 0x44, 0x52], 12);
  view.setUint32(16, width);
  view.setUint32(20, height);
  return bytes;
}

function record(state: RunRecord["state"], step = 0): RunRecord {
  return {
    run_id: "abc123",
    state,
    profile: "smoke",
    step,
    total_steps: 40,
    error: state === "failed" ? "boom" : null,
    created_at: 0,
    updated_at: 0,
    artifacts: {},
  };
}

/** fetch stub walking a run through its lifecycle. */
function lifecycleFetch(): typeof fetch {
  let polls = 0;
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    const u = String(url);
    if (u.endsWith("/api/runs") && init?.method === "POST") {
      return new Response(JSON.stringify({ run_id: "abc123", warnings: [] }), { status: 202 });
    }
    if (u.endsWith("/api/runs/abc123")) {
      polls += 1;
      const rec =
        polls === 1 ? record("queued") : polls === 2 ? record("training", 17) : record("done", 40);
      return new Response(JSON.stringify(rec), { status: 200 });
    }
    if (u.endsWith("/api/runs/abc123/mask")) {
      return new Response(fakePng(96, 96), { status: 200, headers: { "content-type": "image/png" } });
    }
    if (u.endsWith("/api/runs/abc123/history")) {
      return new Response(HISTORY_CSV, { status: 200, headers: { "content-type": "text/csv" } });
    }
    return new Response("not found", { status: 404 });
  }) as typeof fetch;
}

describe("run console lifecycle", () => {
  it("submits, polls to done, and the overlay matches the image dimensions", async () => {
    const api = new ApiClient({ baseUrl: "http://test", fetchFn: lifecycleFetch() });
    const { run_id } = await api.submitRun(new Blob([new Uint8Array(8)]), "image.png", DOC, "smoke");
    expect(run_id).toBe("abc123");

    const seen: string[] = [];
    const final = await api.pollRun(run_id, (rec) => seen.push(rec.state), 1);
    expect(final.state).toBe("done");
    expect(seen).toEqual(["queued", "training", "done"]);

    const mask = await api.fetchMask(run_id);
    const dims = pngDimensions(new Uint8Array(await mask.arrayBuffer()));
    const overlay = createOverlay(run_id, dims, { width: 96, height: 96 });
    expect(overlayDimensionsMatch(overlay)).toBe(true);
    expect(overlayDimensionsMatch(createOverlay(run_id, dims, { width: 128, height: 96 }))).toBe(false);
  });

  it("surfaces backend validation bodies verbatim", async () => {
    const fetchFn = (async () =>
      new Response(JSON.stringify({ detail: { errors: ["samples[0]: outside"], warnings: [] } }), {
        status: 400,
      })) as typeof fetch;
    const api = new ApiClient({ baseUrl: "http://test", fetchFn });
    await expect(api.submitRun(new Blob([]), "image.png", DOC, "smoke")).rejects.toThrowError(
      /samples\[0\]: outside/,
    );
    try {
      await api.submitRun(new Blob([]), "image.png", DOC, "smoke");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(400);
    }
  });

  it("propagates failed runs with their reason", async () => {
    let polls = 0;
    const fetchFn = (async () => {
      polls += 1;
      return new Response(JSON.stringify(record(polls < 2 ? "rendering" : "failed")), { status: 200 });
    }) as typeof fetch;
    const api = new ApiClient({ baseUrl: "http://test", fetchFn });
    const final = await api.pollRun("abc123", () => {}, 1);
    expect(final.state).toBe("failed");
    expect(final.error).toBe("boom");
  });
});

describe("history parsing", () => {
  it("extracts loss points with their phase", () => {
    const points = parseHistoryCsv(HISTORY_CSV);
    expect(points.length).toBe(3);
    expect(points[0]).toEqual({ step: 0, phase: 1, lr: 0.001, total: 2.5 });
    expect(points[2].phase).toBe(2);
  });

  it("renders a bounded sparkline path", () => {
    const path = sparklinePath(parseHistoryCsv(HISTORY_CSV), 220, 48);
    const coords = path.split(" ").map((pair) => pair.split(",").map(Number));
    expect(coords.length).toBe(3);
    for (const [x, y] of coords) {
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThanOrEqual(220);
      expect(y).toBeGreaterThanOrEqual(0);
      expect(y).toBeLessThanOrEqual(48);
    }
    expect(parseHistoryCsv("")).toEqual([]);
    expect(sparklinePath([], 220, 48)).toBe("");
  });
});

describe("overlay model", () => {
  it("clamps opacity", () => {
    const o = createOverlay("r", { width: 4, height: 4 }, { width: 4, height: 4 });
    expect(withOpacity(o, 2).opacity).toBe(1);
    expect(withOpacity(o, -1).opacity).toBe(0);
  });

  it("rejects non-PNG bytes", () => {
    expect(() => pngDimensions(new Uint8Array([1, 2, 3]))).toThrowError(/not a PNG/);
  });
});
