import {
  attributeChips,
  formatCount,
  formatInterval,
  formatRatio,
  formatSupport,
  wireToNumber,
} from "./format.js";
import type { ExplanationEntry, ReportDocument } from "./types.js";

export const LOWER_CONFIDENCE_FLAG = "inlier_count_lower_confidence";

export interface ExplanationRow {
  chips: string[];
  support: string;
  riskRatio: string;
  interval: string;
  counts: string;
  flags: string[];
  /** raw payload values the row was rendered from, for drilldown/tests */
  entry: ExplanationEntry;
}

/**
 * One row per report explanation, in the report's own ranking.  Client-side
 * re-sorting is a separate, view-only affordance.
 */
export function tableRows(report: ReportDocument): ExplanationRow[] {
  return report.explanations.map((entry) => ({
    chips: attributeChips(entry.attributes),
    support: formatSupport(entry.outlierSupport),
    riskRatio: formatRatio(entry.riskRatio),
    interval: formatInterval(entry.ci95),
    counts: `${formatCount(entry.ao)}/${formatCount(entry.bo)}`,
    flags: [...entry.flags],
    entry,
  }));
}

/** View-only re-sort; never the default order. */
export function sortRows(
  rows: ExplanationRow[],
  key: "support" | "riskRatio",
): ExplanationRow[] {
  const value = (row: ExplanationRow) =>
    key === "support" ? row.entry.outlierSupport : wireToNumber(row.entry.riskRatio);
  return [...rows].sort((a, b) => value(b) - value(a));
}

export interface DrilldownView {
  chips: string[];
  counts: { ao: string; ai: string; bo: string; bi: string };
  support: string;
  riskRatio: string;
  interval: string;
  numTests: number;
  flags: string[];
  notes: string[];
  /** JSON config that reproduces the whole run via the CLI */
  configSnippet: string;
}

export function drilldown(entry: ExplanationEntry, report: ReportDocument): DrilldownView {
  const notes: string[] = [];
  if (entry.riskRatio === "inf") {
    notes.push(
      "Risk ratio is infinite: the combination appears in outliers while no " +
        "other outlier lacks-it baseline exists (its b_o count is zero).",
    );
  }
  if (entry.flags.includes(LOWER_CONFIDENCE_FLAG)) {
    notes.push(
      "Inlier count came from a sketch bound rather than a stored count; " +
        "treat the ratio as a lower-confidence streaming estimate.",
    );
  }
  if (entry.ci95 === null) {
    notes.push("Confidence interval undefined: one of the four counts is zero.");
  }
  return {
    chips: attributeChips(entry.attributes),
    counts: {
      ao: formatCount(entry.ao),
      ai: formatCount(entry.ai),
      bo: formatCount(entry.bo),
      bi: formatCount(entry.bi),
    },
    support: formatSupport(entry.outlierSupport),
    riskRatio: formatRatio(entry.riskRatio),
    interval: formatInterval(entry.ci95),
    numTests: entry.numTests,
    flags: [...entry.flags],
    notes,
    configSnippet: configSnippet(report),
  };
}

/**
 * The exact config echo from the report, pretty-printed: running it through
 * the CLI reproduces this query (same thresholds, seed, and source).
 */
export function configSnippet(report: ReportDocument): string {
  return JSON.stringify(report.config, null, 2);
}
