/** Client-side mirrors of the backend geometry predicates.
 *
 * Conventions must match the service exactly: even-odd membership with
 * edges half-open in y and crossings counted strictly right of the point.
 */
import type { PolygonVertices } from "./types";

export function pointInPolygon(px: number, py: number, verts: PolygonVertices): boolean {
  let inside = false;
  const n = verts.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = verts[i];
    const [x2, y2] = verts[(i + 1) % n];
    if (y1 === y2) continue;
    if ((y1 <= py && py < y2) || (y2 <= py && py < y1)) {
      const xCross = x1 + ((py - y1) * (x2 - x1)) / (y2 - y1);
      if (xCross > px) inside = !inside;
    }
  }
  return inside;
}

export function pointInAnyPolygon(px: number, py: number, polygons: PolygonVertices[]): boolean {
  return polygons.some((verts) => pointInPolygon(px, py, verts));
}

export function polygonArea(verts: PolygonVertices): number {
  let acc = 0;
  const n = verts.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = verts[i];
    const [x2, y2] = verts[(i + 1) % n];
    acc += x1 * y2 - x2 * y1;
  }
  return Math.abs(acc) / 2;
}

type Pt = [number, number];

function orient(a: Pt, b: Pt, c: Pt): number {
  const v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  return v === 0 ? 0 : v > 0 ? 1 : -1;
}

function onSegment(a: Pt, b: Pt, c: Pt): boolean {
  return (
    Math.min(a[0], b[0]) <= c[0] &&
    c[0] <= Math.max(a[0], b[0]) &&
    Math.min(a[1], b[1]) <= c[1] &&
    c[1] <= Math.max(a[1], b[1])
  );
}

export function segmentsIntersect(p1: Pt, p2: Pt, q1: Pt, q2: Pt): boolean {
  const o1 = orient(p1, p2, q1);
  const o2 = orient(p1, p2, q2);
  const o3 = orient(q1, q2, p1);
  const o4 = orient(q1, q2, p2);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(p1, p2, q1)) return true;
  if (o2 === 0 && onSegment(p1, p2, q2)) return true;
  if (o3 === 0 && onSegment(q1, q2, p1)) return true;
  if (o4 === 0 && onSegment(q1, q2, p2)) return true;
  return false;
}

function strictlyInsideSegment(c: Pt, a: Pt, b: Pt): boolean {
  const cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  if (cross !== 0) return false;
  const dot = (c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1]);
  const len2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2;
  return 0 < dot && dot < len2;
}

export function polygonIsSimple(verts: PolygonVertices): boolean {
  const n = verts.length;
  if (n < 3) return false;
  const edges: [Pt, Pt][] = [];
  for (let i = 0; i < n; i++) edges.push([verts[i] as Pt, verts[(i + 1) % n] as Pt]);
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      const [p1, p2] = edges[i];
      const [q1, q2] = edges[j];
      if (adjacent) {
        if (segmentsIntersect(p1, p2, q1, q2)) {
          const otherP = j === i + 1 ? p1 : p2;
          const otherQ = j === i + 1 ? q2 : q1;
          if (strictlyInsideSegment(otherQ, p1, p2) || strictlyInsideSegment(otherP, q1, q2)) {
            return false;
          }
        }
        continue;
      }
      if (segmentsIntersect(p1, p2, q1, q2)) return false;
    }
  }
  return true;
}

export function distance(ax: number, ay: number, bx: number, by: number): number {
  return Math.hypot(ax - bx, ay - by);
}
