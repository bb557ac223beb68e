import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { AnnotationStore, type Gesture } from "../src/store";
import type { AnnotationDocument } from "../src/types";

const FIXTURES = join(__dirname, "..", "fixtures");

function loadGestures(name: string): Gesture[] {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.gestures.json`), "utf-8"));
}

function loadAnnotation(name: string): AnnotationDocument {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.annotation.json`), "utf-8"));
}

describe("golden gesture scripts", () => {
  for (const name of ["rect_two_circles", "reverse_region"]) {
    it(`replays ${name} into the stored document with zero diffs`, () => {
      const store = new AnnotationStore();
      store.applyAll(loadGestures(name));
      expect(store.issues().errors).toEqual([]);
      expect(store.export()).toEqual(loadAnnotation(name));
    });
  }
});

describe("gesture handling", () => {
  function freshStore(): AnnotationStore {
    const store = new AnnotationStore();
    store.apply({ type: "loadImage", name: "image.png", width: 64, height: 64 });
    return store;
  }

  it("closes a polygon by clicking near the first vertex", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 40, y: 10 },
      { type: "click", x: 40, y: 40 },
      { type: "click", x: 12, y: 11 }, // within the close radius of (10, 10)
    ]);
    expect(store.rois).toEqual([[[10, 10], [40, 10], [40, 40]]]);
    expect(store.draft).toEqual([]);
  });

  it("closes a polygon on double-click", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 40, y: 10 },
      { type: "click", x: 40, y: 40 },
      { type: "dblclick" },
    ]);
    expect(store.rois.length).toBe(1);
  });

  it("ignores double-click with fewer than 3 vertices", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 40, y: 10 },
      { type: "dblclick" },
    ]);
    expect(store.rois).toEqual([]);
    expect(store.draft).toEqual([]);
  });

  it("tracks circle drags with a live preview", () => {
    const store = freshStore();
    store.apply({ type: "selectTool", tool: "circle" });
    store.apply({ type: "dragStart", x: 30, y: 30 });
    store.apply({ type: "dragMove", x: 36, y: 30 });
    expect(store.pendingCircle).toEqual({ cx: 30, cy: 30, r: 6 });
    store.apply({ type: "dragEnd", x: 38, y: 30 });
    expect(store.pendingCircle).toBeNull();
    expect(store.samples).toEqual([{ cx: 30, cy: 30, r: 8 }]);
  });

  it("erases circles before polygons at the click point", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 50, y: 10 },
      { type: "click", x: 50, y: 50 },
      { type: "click", x: 10, y: 50 },
      { type: "dblclick" },
      { type: "selectTool", tool: "circle" },
      { type: "dragStart", x: 30, y: 30 },
      { type: "dragEnd", x: 38, y: 30 },
      { type: "selectTool", tool: "erase" },
      { type: "click", x: 30, y: 30 },
    ]);
    expect(store.samples).toEqual([]);
    expect(store.rois.length).toBe(1);
    store.apply({ type: "click", x: 30, y: 30 });
    expect(store.rois).toEqual([]);
  });

  it("undo pops draft vertices first, then entities", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 40, y: 10 },
      { type: "undo" },
    ]);
    expect(store.draft).toEqual([[10, 10]]);
  });

  it("blocks export while an invariant fails and names it", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 50, y: 10 },
      { type: "click", x: 50, y: 50 },
      { type: "click", x: 10, y: 50 },
      { type: "dblclick" },
      { type: "selectTool", tool: "circle" },
      // circle straddles the right image edge
      { type: "dragStart", x: 60, y: 20 },
      { type: "dragEnd", x: 60, y: 29 },
    ]);
    expect(store.canExport).toBe(false);
    expect(store.issues().errors.some((e) => e.startsWith("samples[0]"))).toBe(true);
  });

  it("flags reverse-mode circles placed outside the sketched healthy region", () => {
    const store = freshStore();
    store.applyAll([
      { type: "click", x: 10, y: 10 },
      { type: "click", x: 50, y: 10 },
      { type: "click", x: 50, y: 50 },
      { type: "click", x: 10, y: 50 },
      { type: "dblclick" },
      { type: "toggleReverse" },
      { type: "selectTool", tool: "circle" },
      { type: "dragStart", x: 30, y: 56 },
      { type: "dragEnd", x: 38, y: 56 },
    ]);
    expect(store.samplePlacementLegal(30, 56)).toBe(false);
    expect(store.samplePlacementLegal(30, 30)).toBe(true);
    expect(store.canExport).toBe(false);
    expect(store.issues().errors.some((e) => e.includes("reverse mode"))).toBe(true);
  });

  it("duplicate & edit round-trips a document", () => {
    const store = freshStore();
    const doc: AnnotationDocument = {
      image: "image.png",
      reverse: false,
      rois: [[[10, 10], [50, 10], [50, 50], [10, 50]]],
      samples: [{ cx: 20, cy: 20, r: 8 }],
    };
    store.importDocument(doc);
    expect(store.export()).toEqual(doc);
    // edits to the store do not mutate the original document
    store.apply({ type: "selectTool", tool: "circle" });
    store.apply({ type: "dragStart", x: 40, y: 40 });
    store.apply({ type: "dragEnd", x: 48, y: 40 });
    expect(doc.samples.length).toBe(1);
    expect(store.samples.length).toBe(2);
  });
});
