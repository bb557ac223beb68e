/** Client-side mirror of the backend annotation validator.
 *
 * Accepts exactly the documents the service accepts; error strings use the
 * same entity-indexed prefixes so badge text matches server responses.
 */
import { pointInAnyPolygon, polygonArea, polygonIsSimple } from "./geometry";
import type { AnnotationDocument, ValidationIssues } from "./types";

export const R_MIN = 8.0;
export const SAMPLE_COUNT_RANGE: [number, number] = [2, 10];
export const TINY_ROI_FRACTION = 0.001;

export function validateDocument(
  doc: AnnotationDocument,
  width: number,
  height: number,
): ValidationIssues {
  const errors: string[] = [];
  const warnings: string[] = [];

  if (doc.rois.length === 0) {
    errors.push("rois: at least one polygon required");
  }
  doc.rois.forEach((verts, i) => {
    if (verts.length < 3) {
      errors.push(`rois[${i}]: polygon needs >= 3 vertices, has ${verts.length}`);
      return;
    }
    verts.forEach(([x, y], j) => {
      if (!(x >= 0 && x < width && y >= 0 && y < height)) {
        errors.push(`rois[${i}]: vertex ${j} (${x}, ${y}) outside [0,${width})x[0,${height})`);
      }
    });
    if (!polygonIsSimple(verts)) {
      errors.push(`rois[${i}]: polygon is self-intersecting`);
    } else if (polygonArea(verts) < TINY_ROI_FRACTION * width * height) {
      warnings.push(`rois[${i}]: area below 0.1% of the image`);
    }
  });

  if (doc.samples.length < 1) {
    errors.push("samples: at least one sample circle required");
  }
  doc.samples.forEach((c, i) => {
    if (c.r <= 0) {
      errors.push(`samples[${i}]: radius must be positive, got ${c.r}`);
      return;
    }
    if (c.r < R_MIN) {
      errors.push(`samples[${i}]: radius ${c.r} below minimum ${R_MIN}`);
    }
    if (c.cx - c.r < 0 || c.cx + c.r > width || c.cy - c.r < 0 || c.cy + c.r > height) {
      errors.push(`samples[${i}]: circle extends beyond image bounds (${c.cx},${c.cy},r=${c.r})`);
      return;
    }
    // texture is always sampled from the certified (sketched) region:
    // the lesion in normal mode, the healthy region in reverse mode
    const inside = pointInAnyPolygon(c.cx, c.cy, doc.rois);
    if (!inside) {
      const region = doc.reverse ? "sketched healthy region (reverse mode)" : "sketched ROI";
      errors.push(`samples[${i}]: center outside the ${region}`);
    }
  });

  const [lo, hi] = SAMPLE_COUNT_RANGE;
  if (doc.samples.length >= 1 && (doc.samples.length < lo || doc.samples.length > hi)) {
    warnings.push(`samples: count ${doc.samples.length} outside recommended range ${lo}-${hi}`);
  }
  return { errors, warnings };
}
