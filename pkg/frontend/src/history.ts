/** Training-history CSV parsing for the loss sparkline. */

export interface HistoryPoint {
  step: number;
  phase: number;
  lr: number;
  total: number;
}

export function parseHistoryCsv(text: string): HistoryPoint[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) return [];
  const header = lines[0].split(",");
  const col = (name: string) => header.indexOf(name);
  const stepI = col("step");
  const phaseI = col("phase");
  const lrI = col("lr");
  const totalI = col("total");
  if (stepI < 0 || totalI < 0) return [];
  const points: HistoryPoint[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const step = Number(cells[stepI]);
    const total = Number(cells[totalI]);
    if (!Number.isFinite(step) || !Number.isFinite(total)) continue;
    points.push({
      step,
      phase: Number(cells[phaseI] ?? 0),
      lr: Number(cells[lrI] ?? 0),
      total,
    });
  }
  return points;
}

/** Scale loss points into an SVG polyline string for a w x h viewport. */
export function sparklinePath(points: HistoryPoint[], w: number, h: number): string {
  if (points.length === 0) return "";
  const xs = points.map((p) => p.step);
  const ys = points.map((p) => p.total);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  return points
    .map((p) => {
      const x = ((p.step - xMin) / xSpan) * w;
      const y = h - ((p.total - yMin) / ySpan) * h;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
