import type {
  ColumnInfo,
  FieldError,
  QueryStatus,
  ReportDocument,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly detail: unknown = null,
  ) {
    super(message);
  }
}

/** Submission rejected by server-side validation; carries field messages. */
export class SpecRejected extends ApiError {
  constructor(status: number, readonly fieldErrors: FieldError[]) {
    super(status, "query spec rejected", fieldErrors);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the REST endpoints; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const doc = body as { error?: string; detail?: unknown } | null;
      if (response.status === 400 && doc && Array.isArray(doc.detail)) {
        const fields = (doc.detail as string[]).map((message) => ({
          field: guessField(message),
          message,
        }));
        throw new SpecRejected(response.status, fields);
      }
      throw new ApiError(response.status, doc?.error ?? response.statusText, doc?.detail);
    }
    return body;
  }

  async health(): Promise<boolean> {
    const body = (await this.request("/api/health")) as { status: string };
    return body.status === "ok";
  }

  async datasets(): Promise<string[]> {
    const body = (await this.request("/api/datasets")) as { datasets: string[] };
    return body.datasets;
  }

  async schema(datasetId: string): Promise<ColumnInfo[]> {
    const body = (await this.request(
      `/api/datasets/${encodeURIComponent(datasetId)}/schema`,
    )) as { columns: ColumnInfo[] };
    return body.columns;
  }

  async submit(spec: Record<string, unknown>): Promise<string> {
    const body = (await this.request("/api/queries", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    })) as { queryId: string };
    return body.queryId;
  }

  async status(queryId: string): Promise<QueryStatus> {
    return (await this.request(`/api/queries/${queryId}`)) as QueryStatus;
  }

  /** null while the query has not produced a report yet (409). */
  async report(queryId: string): Promise<ReportDocument | null> {
    try {
      return (await this.request(`/api/queries/${queryId}/report`)) as ReportDocument;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) return null;
      throw error;
    }
  }

  async emitNow(queryId: string): Promise<boolean> {
    const body = (await this.request(`/api/queries/${queryId}/emit`, {
      method: "POST",
    })) as { accepted: boolean };
    return body.accepted;
  }

  async cancel(queryId: string): Promise<void> {
    await this.request(`/api/queries/${queryId}`, { method: "DELETE" });
  }
}

/** Best-effort mapping from a server validation message to a form field. */
function guessField(message: string): string {
  const known = [
    "minSupport",
    "minRiskRatio",
    "outlierPercentile",
    "reservoirSize",
    "amcStableSize",
    "decayRate",
    "decayPeriod",
    "batchSize",
    "randomSeed",
    "mode",
  ];
  for (const field of known) {
    if (message.includes(field)) return field;
  }
  return "form";
}
