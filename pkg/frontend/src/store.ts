/** Canvas annotation state and the gesture reducer driving it.
 *
 * Gestures mirror the sketching workflow: vertices by click, polygon close
 * by clicking the first vertex (or double-click), circles by center-drag,
 * erase by clicking an entity. The store serializes to the exact document
 * schema the backend accepts.
 */
import { distance, pointInAnyPolygon, pointInPolygon } from "./geometry";
import type { AnnotationDocument, PolygonVertices, SampleCircle, ToolMode, ValidationIssues } from "./types";
import { validateDocument } from "./validation";

export const CLOSE_RADIUS = 6;

export type Gesture =
  | { type: "loadImage"; name: string; width: number; height: number }
  | { type: "selectTool"; tool: ToolMode }
  | { type: "click"; x: number; y: number }
  | { type: "dblclick" }
  | { type: "dragStart"; x: number; y: number }
  | { type: "dragMove"; x: number; y: number }
  | { type: "dragEnd"; x: number; y: number }
  | { type: "toggleReverse" }
  | { type: "undo" };

export class AnnotationStore {
  imageName = "";
  width = 0;
  height = 0;
  tool: ToolMode = "polygon";
  reverse = false;
  draft: PolygonVertices = [];
  rois: PolygonVertices[] = [];
  samples: SampleCircle[] = [];
  private dragCenter: [number, number] | null = null;
  private dragRadius = 0;

  get hasImage(): boolean {
    return this.width > 0 && this.height > 0;
  }

  /** Circle being dragged right now, for live preview. */
  get pendingCircle(): SampleCircle | null {
    if (!this.dragCenter) return null;
    return { cx: this.dragCenter[0], cy: this.dragCenter[1], r: this.dragRadius };
  }

  apply(gesture: Gesture): void {
    switch (gesture.type) {
      case "loadImage":
        this.imageName = gesture.name;
        this.width = gesture.width;
        this.height = gesture.height;
        this.reset();
        break;
      case "selectTool":
        this.tool = gesture.tool;
        this.draft = [];
        this.dragCenter = null;
        break;
      case "click":
        this.onClick(gesture.x, gesture.y);
        break;
      case "dblclick":
        this.closeDraft();
        break;
      case "dragStart":
        if (this.tool === "circle") {
          this.dragCenter = [gesture.x, gesture.y];
          this.dragRadius = 0;
        }
        break;
      case "dragMove":
        if (this.dragCenter) {
          this.dragRadius = distance(this.dragCenter[0], this.dragCenter[1], gesture.x, gesture.y);
        }
        break;
      case "dragEnd":
        if (this.dragCenter) {
          const r = distance(this.dragCenter[0], this.dragCenter[1], gesture.x, gesture.y);
          if (r > 0) {
            this.samples.push({ cx: this.dragCenter[0], cy: this.dragCenter[1], r });
          }
          this.dragCenter = null;
          this.dragRadius = 0;
        }
        break;
      case "toggleReverse":
        this.reverse = !this.reverse;
        break;
      case "undo":
        this.undo();
        break;
    }
  }

  applyAll(gestures: Gesture[]): void {
    for (const g of gestures) this.apply(g);
  }

  private onClick(x: number, y: number): void {
    if (this.tool === "polygon") {
      const first = this.draft[0];
      if (this.draft.length >= 3 && first && distance(x, y, first[0], first[1]) <= CLOSE_RADIUS) {
        this.closeDraft();
        return;
      }
      this.draft.push([x, y]);
    } else if (this.tool === "erase") {
      this.eraseAt(x, y);
    }
  }

  private closeDraft(): void {
    if (this.draft.length >= 3) {
      this.rois.push(this.draft);
    }
    this.draft = [];
  }

  private eraseAt(x: number, y: number): void {
    const circleIdx = this.samples.findIndex((c) => distance(x, y, c.cx, c.cy) <= c.r);
    if (circleIdx >= 0) {
      this.samples.splice(circleIdx, 1);
      return;
    }
    const polyIdx = this.rois.findIndex((verts) => pointInPolygon(x, y, verts));
    if (polyIdx >= 0) {
      this.rois.splice(polyIdx, 1);
    }
  }

  private undo(): void {
    if (this.draft.length > 0) {
      this.draft.pop();
    } else if (this.samples.length > 0) {
      this.samples.pop();
    } else if (this.rois.length > 0) {
      this.rois.pop();
    }
  }

  reset(): void {
    this.draft = [];
    this.rois = [];
    this.samples = [];
    this.reverse = false;
    this.dragCenter = null;
  }

  /** Samples must sit inside the certified sketch in both modes. */
  samplePlacementLegal(x: number, y: number): boolean {
    return pointInAnyPolygon(x, y, this.rois);
  }

  issues(): ValidationIssues {
    return validateDocument(this.export(), this.width, this.height);
  }

  get canExport(): boolean {
    return this.hasImage && this.issues().errors.length === 0;
  }

  export(): AnnotationDocument {
    return {
      image: this.imageName,
      reverse: this.reverse,
      rois: this.rois.map((verts) => verts.map(([x, y]) => [x, y] as [number, number])),
      samples: this.samples.map((c) => ({ ...c })),
    };
  }

  /** "duplicate & edit": load a previous document back for the next iteration. */
  importDocument(doc: AnnotationDocument): void {
    this.imageName = doc.image;
    this.reverse = doc.reverse;
    this.rois = doc.rois.map((verts) => verts.map(([x, y]) => [x, y] as [number, number]));
    this.samples = doc.samples.map((c) => ({ ...c }));
    this.draft = [];
  }
}
