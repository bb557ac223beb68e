/** Typed client for the run service. */
import type { AnnotationDocument, RunRecord } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: string,
  ) {
    super(`HTTP ${status}: ${body}`);
  }
}

export interface ApiClientOptions {
  baseUrl?: string;
  fetchFn?: typeof fetch;
}

export class ApiClient {
  private baseUrl: string;
  private fetchFn: typeof fetch;

  constructor(opts: ApiClientOptions = {}) {
    this.baseUrl = (opts.baseUrl ?? "").replace(/\/$/, "");
    this.fetchFn = opts.fetchFn ?? fetch.bind(globalThis);
  }

  private async checked(resp: Response): Promise<Response> {
    if (!resp.ok) {
      // surface the backend body verbatim so validation details reach the user
      throw new ApiError(resp.status, await resp.text());
    }
    return resp;
  }

  async submitRun(
    image: Blob,
    imageName: string,
    annotation: AnnotationDocument,
    profile: string,
  ): Promise<{ run_id: string; warnings: string[] }> {
    const form = new FormData();
    form.append("image", image, imageName);
    form.append("annotation", JSON.stringify(annotation));
    form.append("profile", profile);
    const resp = await this.checked(
      await this.fetchFn(`${this.baseUrl}/api/runs`, { method: "POST", body: form }),
    );
    return (await resp.json()) as { run_id: string; warnings: string[] };
  }

  async getRun(runId: string): Promise<RunRecord> {
    const resp = await this.checked(await this.fetchFn(`${this.baseUrl}/api/runs/${runId}`));
    return (await resp.json()) as RunRecord;
  }

  async listRuns(): Promise<RunRecord[]> {
    const resp = await this.checked(await this.fetchFn(`${this.baseUrl}/api/runs`));
    return (await resp.json()) as RunRecord[];
  }

  async fetchHistoryCsv(runId: string): Promise<string> {
    const resp = await this.checked(
      await this.fetchFn(`${this.baseUrl}/api/runs/${runId}/history`),
    );
    return await resp.text();
  }

  async fetchMask(runId: string): Promise<Blob> {
    const resp = await this.checked(await this.fetchFn(`${this.baseUrl}/api/runs/${runId}/mask`));
    return await resp.blob();
  }

  maskUrl(runId: string): string {
    return `${this.baseUrl}/api/runs/${runId}/mask`;
  }

  /**
   * Poll a run until it reaches a terminal state. `onUpdate` fires on every
   * poll so the console can show training progress.
   */
  async pollRun(
    runId: string,
    onUpdate: (rec: RunRecord) => void,
    intervalMs = 500,
    timeoutMs = 30 * 60 * 1000,
  ): Promise<RunRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const rec = await this.getRun(runId);
      onUpdate(rec);
      if (rec.state === "done" || rec.state === "failed") return rec;
      if (Date.now() > deadline) throw new Error(`run ${runId} timed out in state ${rec.state}`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
