import { describe, expect, it } from "vitest";
import type { AnnotationDocument } from "../src/types";
import { validateDocument } from "../src/validation";

function doc(overrides: Partial<AnnotationDocument> = {}): AnnotationDocument {
  return {
    image: "image.png",
    reverse: false,
    rois: [[[10, 10], [50, 10], [50, 50], [10, 50]]],
    samples: [
      { cx: 20, cy: 20, r: 8 },
      { cx: 40, cy: 40, r: 8 },
    ],
    ...overrides,
  };
}

describe("validateDocument", () => {
  it("accepts the minimal valid document", () => {
    const issues = validateDocument(doc(), 64, 64);
    expect(issues.errors).toEqual([]);
    expect(issues.warnings).toEqual([]);
  });

  it("flags circles straddling the image edge", () => {
    const issues = validateDocument(
      doc({ samples: [{ cx: 60, cy: 20, r: 8 }, { cx: 20, cy: 20, r: 8 }] }),
      64,
      64,
    );
    expect(issues.errors.some((e) => e.startsWith("samples[0]"))).toBe(true);
  });

  it("flags vertices outside the half-open bounds", () => {
    const issues = validateDocument(doc({ rois: [[[10, 10], [64, 10], [50, 50]]] }), 64, 64);
    expect(issues.errors.some((e) => e.startsWith("rois[0]"))).toBe(true);
  });

  it("enforces the minimum sample radius", () => {
    const issues = validateDocument(doc({ samples: [{ cx: 20, cy: 20, r: 4 }] }), 64, 64);
    expect(issues.errors.some((e) => e.includes("below minimum"))).toBe(true);
  });

  it("requires sample centers inside the sketch in normal mode", () => {
    const issues = validateDocument(doc({ samples: [{ cx: 56, cy: 8, r: 8 }] }), 64, 64);
    expect(issues.errors.some((e) => e.includes("outside the sketched ROI"))).toBe(true);
  });

  it("samples the sketched healthy region in reverse mode", () => {
    // centers inside the sketch stay legal; outside is flagged
    const inside = validateDocument(doc({ reverse: true }), 64, 64);
    expect(inside.errors).toEqual([]);
    const outside = validateDocument(
      doc({ reverse: true, samples: [{ cx: 56, cy: 8, r: 8 }] }),
      64,
      64,
    );
    expect(outside.errors.filter((e) => e.includes("reverse mode")).length).toBe(1);
  });

  it("warns outside the recommended sample count range", () => {
    const one = validateDocument(doc({ samples: [{ cx: 20, cy: 20, r: 8 }] }), 64, 64);
    expect(one.errors).toEqual([]);
    expect(one.warnings.some((w) => w.includes("2-10"))).toBe(true);

    const many = validateDocument(
      doc({
        samples: Array.from({ length: 12 }, (_, i) => ({ cx: 20 + i, cy: 20, r: 8 })),
      }),
      64,
      64,
    );
    expect(many.errors).toEqual([]);
    expect(many.warnings.length).toBe(1);
  });

  it("rejects self-intersecting sketches", () => {
    const issues = validateDocument(
      doc({ rois: [[[10, 10], [50, 50], [50, 10], [10, 50]]], samples: [{ cx: 30, cy: 15, r: 8 }] }),
      64,
      64,
    );
    expect(issues.errors.some((e) => e.includes("self-intersecting"))).toBe(true);
  });

  it("warns on tiny sketch polygons", () => {
    const issues = validateDocument(
      doc({
        rois: [[[30, 30], [31, 30], [31, 31], [30, 31]]],
        samples: [{ cx: 30.5, cy: 30.5, r: 8 }],
      }),
      64,
      64,
    );
    expect(issues.errors).toEqual([]);
    expect(issues.warnings.some((w) => w.includes("0.1%"))).toBe(true);
  });

  it("requires at least one polygon and one sample", () => {
    const issues = validateDocument(doc({ rois: [], samples: [] }), 64, 64);
    expect(issues.errors.length).toBe(2);
  });
});
