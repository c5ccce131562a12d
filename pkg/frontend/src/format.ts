import type { WireNumber } from "./types.js";

/**
 * Display formatting only: every figure shown in the console is a report
 * field rendered as-is — the client never recomputes statistics.
 */

export function formatRatio(ratio: WireNumber, digits = 2): string {
  if (ratio === "inf") return "∞";
  return ratio.toFixed(digits);
}

export function formatSupport(support: number): string {
  return `${(support * 100).toFixed(2)}%`;
}

export function formatInterval(ci: [number, number] | null): string {
  if (ci === null) return "—";
  return `(${ci[0].toFixed(2)}, ${ci[1].toFixed(2)})`;
}

export function formatCount(count: number): string {
  return Number.isInteger(count) ? String(count) : count.toFixed(2);
}

export function attributeChips(attributes: Record<string, string>): string[] {
  return Object.keys(attributes)
    .sort()
    .map((name) => `${name}=${attributes[name]}`);
}

/** Numeric view of a wire number for filtering/sorting on the client. */
export function wireToNumber(value: WireNumber): number {
  return value === "inf" ? Number.POSITIVE_INFINITY : value;
}
