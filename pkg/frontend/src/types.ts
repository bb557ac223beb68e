/** Shared wire types: the annotation document schema and the service records. */

export interface SampleCircle {
  cx: number;
  cy: number;
  r: number;
}

/** Polygon as an ordered vertex list [[x, y], ...]; implicitly closed. */
export type PolygonVertices = [number, number][];

/** Exact upload/export schema accepted by the backend parser. */
export interface AnnotationDocument {
  image: string;
  reverse: boolean;
  rois: PolygonVertices[];
  samples: SampleCircle[];
}

export type RunState =
  | "queued"
  | "rendering"
  | "training"
  | "inferring"
  | "done"
  | "failed";

export interface RunRecord {
  run_id: string;
  state: RunState;
  profile: string;
  step: number;
  total_steps: number;
  error: string | null;
  created_at: number;
  updated_at: number;
  artifacts: Record<string, unknown>;
}

export interface ValidationIssues {
  errors: string[];
  warnings: string[];
}

export type ToolMode = "polygon" | "circle" | "pan" | "erase";
