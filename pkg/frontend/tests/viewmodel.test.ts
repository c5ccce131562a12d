import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import type { ExplanationEntry, ReportDocument } from "../src/types.js";
import { drilldown, sortRows, tableRows } from "../src/viewmodel.js";
import { wireToNumber } from "../src/format.js";

const fixture = (name: string): ReportDocument =>
  JSON.parse(readFileSync(join(__dirname, "fixtures", name), "utf-8"));

const r3 = fixture("report-r3.json");

describe("tableRows", () => {
  it("renders exactly one row per report explanation, in report order", () => {
    const rows = tableRows(r3);
    expect(rows).toHaveLength(r3.explanations.length);
    rows.forEach((row, i) => {
      expect(row.entry).toBe(r3.explanations[i]);
    });
  });

  it("every displayed figure is numerically the payload field", () => {
    for (const row of tableRows(r3)) {
      const entry = row.entry;
      // support: percent rendering of the payload value (2 dp of a percent)
      expect(Number(row.support.replace("%", "")) / 100).toBeCloseTo(
        entry.outlierSupport,
        4,
      );
      // risk ratio: numeric rendering (or the infinity glyph)
      if (entry.riskRatio === "inf") {
        expect(row.riskRatio).toBe("∞");
      } else {
        expect(Number(row.riskRatio)).toBeCloseTo(entry.riskRatio as number, 2);
      }
      if (entry.ci95) {
        const [lo, hi] = row.interval
          .replace(/[()]/g, "")
          .split(",")
          .map(Number);
        expect(lo).toBeCloseTo(entry.ci95[0], 2);
        expect(hi).toBeCloseTo(entry.ci95[1], 2);
      } else {
        expect(row.interval).toBe("—");
      }
      expect(row.flags).toEqual(entry.flags);
    }
  });

  it("re-rendering the same report yields an identical table", () => {
    expect(tableRows(r3)).toEqual(tableRows(r3));
  });

  it("report order is preserved even when not support-sorted client-side", () => {
    const supports = r3.explanations.map((e) => e.outlierSupport);
    const sorted = [...supports].sort((a, b) => b - a);
    expect(supports).toEqual(sorted); // server ranking is support-first
  });

  it("client-side re-sorting is view-only", () => {
    const rows = tableRows(r3);
    const resorted = sortRows(rows, "riskRatio");
    const values = resorted.map((r) => wireToNumber(r.entry.riskRatio));
    expect(values).toEqual([...values].sort((a, b) => b - a));
    expect(tableRows(r3).map((r) => r.entry)).toEqual(rows.map((r) => r.entry));
  });
});

describe("drilldown", () => {
  const infiniteEntry: ExplanationEntry = {
    attributes: { device: "d7" },
    outlierSupport: 1.0,
    riskRatio: "inf",
    ao: 20,
    ai: 0,
    bo: 0,
    bi: 1980,
    ci95: null,
    numTests: 3,
    flags: [],
  };

  it("shows all four counts and the test multiplicity", () => {
    const view = drilldown(r3.explanations[0], r3);
    expect(view.counts).toEqual({
      ao: String(r3.explanations[0].ao),
      ai: String(r3.explanations[0].ai),
      bo: String(r3.explanations[0].bo),
      bi: String(r3.explanations[0].bi),
    });
    expect(view.numTests).toBe(r3.explanations[0].numTests);
  });

  it("explains the infinite-ratio convention", () => {
    const view = drilldown(infiniteEntry, r3);
    expect(view.riskRatio).toBe("∞");
    expect(view.notes.some((n) => n.includes("b_o count is zero"))).toBe(true);
  });

  it("badges lower-confidence streaming records", () => {
    const flagged = {
      ...infiniteEntry,
      flags: ["inlier_count_lower_confidence"],
    };
    const view = drilldown(flagged, r3);
    expect(view.flags).toContain("inlier_count_lower_confidence");
    expect(view.notes.some((n) => n.includes("lower-confidence"))).toBe(true);
  });

  it("notes undefined confidence intervals", () => {
    const view = drilldown(infiniteEntry, r3);
    expect(view.interval).toBe("—");
    expect(view.notes.some((n) => n.includes("undefined"))).toBe(true);
  });
});
