/** Wire types mirrored from the service's JSON report schema. */

/** Infinite risk ratios travel as the string "inf" (strict JSON). */
export type WireNumber = number | "inf";

export interface ExplanationEntry {
  attributes: Record<string, string>;
  outlierSupport: number;
  riskRatio: WireNumber;
  ao: number;
  ai: number;
  bo: number;
  bi: number;
  ci95: [number, number] | null;
  numTests: number;
  flags: string[];
}

export interface ReportTimings {
  trainMs: number;
  scoreMs: number;
  explainMs: number;
}

export interface ReportDocument {
  schemaVersion: number;
  queryId: string;
  mode: string;
  pointsProcessed: number;
  outlierCount: number;
  cutoff: WireNumber;
  explanations: ExplanationEntry[];
  timings: ReportTimings;
  config: Record<string, unknown>;
  seed: number;
}

export interface ColumnInfo {
  name: string;
  type: "numeric" | "categorical";
}

export interface QueryStatus {
  state: "running" | "done" | "failed";
  progress: number;
  detail?: string;
}

/** The query form; mirrors the engine's query spec field for field. */
export interface QueryFormModel {
  dataset: string;
  metricColumns: string[];
  attributeColumns: string[];
  minSupport: number;
  minRiskRatio: number;
  outlierPercentile: number;
  mode: "oneshot" | "streaming";
  seed: number;
}

export interface FieldError {
  field: string;
  message: string;
}
