/**
 * Pure console logic: sweep parsing, card ordering, chart geometry.
 * Nothing here touches the DOM or the network, so it all unit-tests
 * without a browser.
 */

import type { ClusterRow } from "./types.js";

export const SWEEP_BINS = 1024;

export type ParseResult =
  | { ok: true; values: number[] }
  | { ok: false; error: string };

/**
 * Parse a pasted sweep: a JSON array, or numbers separated by any mix of
 * whitespace, commas, and semicolons. Exactly SWEEP_BINS finite values or
 * an error message that says what went wrong.
 */
export function parseSweep(text: string): ParseResult {
  const trimmed = text.trim();
  if (!trimmed) {
    return { ok: false, error: "paste 1024 values first" };
  }
  let values: number[];
  if (trimmed.startsWith("[")) {
    let parsed: unknown;
    try {
      parsed = JSON.parse(trimmed);
    } catch {
      return { ok: false, error: "not valid JSON" };
    }
    if (!Array.isArray(parsed)) {
      return { ok: false, error: "JSON input must be an array" };
    }
    if (!parsed.every((v): v is number => typeof v === "number")) {
      return { ok: false, error: "JSON array must contain only numbers" };
    }
    values = parsed;
  } else {
    const tokens = trimmed.split(/[\s,;]+/);
    values = [];
    for (const token of tokens) {
      const v = Number(token);
      if (!Number.isFinite(v)) {
        return { ok: false, error: `"${token}" is not a number` };
      }
      values.push(v);
    }
  }
  if (values.length !== SWEEP_BINS) {
    return { ok: false, error: `expected ${SWEEP_BINS} values, got ${values.length}` };
  }
  if (!values.every(Number.isFinite)) {
    return { ok: false, error: "values must be finite" };
  }
  return { ok: true, values };
}

/** Cards sort by count descending, cluster id breaking ties. Non-mutating. */
export function sortClusters<T extends { id: number; count: number }>(rows: T[]): T[] {
  return [...rows].sort((a, b) => b.count - a.count || a.id - b.id);
}

export function sumCounts(rows: { count: number }[]): number {
  return rows.reduce((total, row) => total + row.count, 0);
}

/** A cluster with no assigned label renders with the unmapped flag. */
export function isUnmapped(label: string | null): boolean {
  return label === null || label === "unmapped";
}

export interface ValueRange {
  min: number;
  max: number;
}

/** Shared y-range across series so overlaid polylines are comparable. */
export function valueRange(series: number[][]): ValueRange {
  let min = Infinity;
  let max = -Infinity;
  for (const values of series) {
    for (const v of values) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!Number.isFinite(min)) {
    return { min: 0, max: 1 };
  }
  if (min === max) {
    // flat series still needs a nonzero span to land mid-chart
    return { min: min - 1, max: max + 1 };
  }
  return { min, max };
}

/**
 * Map a sweep to an SVG polyline `points` string: bin index spans the full
 * width, dB value the full height (inverted, SVG y grows downward). One
 * point per bin, never downsampled.
 */
export function polylinePoints(
  values: number[],
  width: number,
  height: number,
  range?: ValueRange,
): string {
  const { min, max } = range ?? valueRange([values]);
  const span = max - min;
  const xStep = values.length > 1 ? width / (values.length - 1) : 0;
  const parts: string[] = [];
  for (let i = 0; i < values.length; i++) {
    const x = i * xStep;
    const y = span === 0 ? height / 2 : height - ((values[i] - min) / span) * height;
    parts.push(`${round2(x)},${round2(y)}`);
  }
  return parts.join(" ");
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export interface ScatterPoint {
  id: number;
  label: string | null;
  x: number;
  y: number;
}

/**
 * Normalize 2-D centroids into [0, 1] x [0, 1] for the projection plot.
 * Degenerate extents (single cluster, collinear axis) center at 0.5.
 */
export function scatterPoints(rows: ClusterRow[]): ScatterPoint[] {
  const xs = valueRange([rows.map((r) => r.centroid2d[0])]);
  const ys = valueRange([rows.map((r) => r.centroid2d[1])]);
  return rows.map((row) => ({
    id: row.id,
    label: row.label,
    x: (row.centroid2d[0] - xs.min) / (xs.max - xs.min),
    y: (row.centroid2d[1] - ys.min) / (ys.max - ys.min),
  }));
}

export function formatConfidence(confidence: number): string {
  return `${(confidence * 100).toFixed(1)}%`;
}

export function formatDb(v: number): string {
  return `${v.toFixed(1)} dB`;
}
