import type { FieldError, QueryFormModel } from "./types.js";

/**
 * Client-side mirror of the engine's query-spec validation, so obviously
 * bad forms never leave the browser.  The service re-validates anyway;
 * agreement between the two is covered by tests on both sides.
 */
export function validateForm(form: QueryFormModel): FieldError[] {
  const errors: FieldError[] = [];
  if (!form.dataset) {
    errors.push({ field: "dataset", message: "pick a dataset" });
  }
  if (form.metricColumns.length === 0) {
    errors.push({ field: "metricColumns", message: "pick at least one metric column" });
  }
  if (!(form.minSupport > 0 && form.minSupport <= 1)) {
    errors.push({ field: "minSupport", message: "minSupport must be in (0, 1]" });
  }
  if (!(form.minRiskRatio > 0)) {
    errors.push({ field: "minRiskRatio", message: "minRiskRatio must be > 0" });
  }
  if (!(form.outlierPercentile > 0 && form.outlierPercentile < 1)) {
    errors.push({
      field: "outlierPercentile",
      message: "outlierPercentile must be in (0, 1)",
    });
  }
  if (!Number.isInteger(form.seed)) {
    errors.push({ field: "seed", message: "seed must be an integer" });
  }
  const overlap = form.metricColumns.filter((c) => form.attributeColumns.includes(c));
  for (const column of overlap) {
    errors.push({
      field: "attributeColumns",
      message: `column ${column} is both metric and attribute`,
    });
  }
  return errors;
}

/** Build the query-spec JSON the service expects from a validated form. */
export function formToSpec(form: QueryFormModel): Record<string, unknown> {
  return {
    source: { kind: "csv", dataset: form.dataset },
    metricColumns: form.metricColumns,
    attributeColumns: form.attributeColumns,
    minSupport: form.minSupport,
    minRiskRatio: form.minRiskRatio,
    outlierPercentile: form.outlierPercentile,
    mode: form.mode,
    randomSeed: form.seed,
  };
}
