import type { ForecastRow } from "./api";

// Accuracy shown in the UI is recomputed from the rows on screen and
// must agree with GET /timeseries/accuracy over the same window. The
// server sums squared errors in row order and divides once, so this
// does exactly that rather than a numerically fancier variant.

export interface PairedRow {
  observed: number;
  forecast: number;
}

export function pairedRows(rows: ForecastRow[]): PairedRow[] {
  const out: PairedRow[] = [];
  for (const r of rows) {
    if (r.observed !== null && r.forecast !== null) {
      out.push({ observed: r.observed, forecast: r.forecast });
    }
  }
  return out;
}

export function rmse(rows: ForecastRow[]): number | null {
  const paired = pairedRows(rows);
  if (paired.length === 0) return null;
  let sum = 0;
  for (const p of paired) {
    const e = p.observed - p.forecast;
    sum += e * e;
  }
  return Math.sqrt(sum / paired.length);
}

export function mae(rows: ForecastRow[]): number | null {
  const paired = pairedRows(rows);
  if (paired.length === 0) return null;
  let sum = 0;
  for (const p of paired) {
    sum += Math.abs(p.observed - p.forecast);
  }
  return sum / paired.length;
}
