import { Table } from "./csv";

export interface SeriesPoint {
  x: number;
  mean: number;
  se: number; // standard error over the aggregated rows (0 for a single row)
  n: number;
}

export interface Series {
  name: string;
  points: SeriesPoint[];
}

/**
 * Group rows by the series column and aggregate the y column per x value:
 * mean with a +/-1 standard-error band over repeated rows (seeds).
 * Series and points are sorted so the output is independent of row order.
 */
export function buildSeries(table: Table, xCol: string, yCol: string,
                            seriesCol: string): Series[] {
  const groups = new Map<string, Map<number, number[]>>();
  table.rows.forEach((row, i) => {
    const name = row[seriesCol] ?? "";
    const x = Number(row[xCol]);
    const y = Number(row[yCol]);
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new Error(
        `non-numeric value in row ${i + 2}: ${xCol}=${row[xCol]} ${yCol}=${row[yCol]}`
      );
    }
    if (!groups.has(name)) groups.set(name, new Map());
    const byX = groups.get(name)!;
    if (!byX.has(x)) byX.set(x, []);
    byX.get(x)!.push(y);
  });

  const out: Series[] = [];
  for (const name of [...groups.keys()].sort()) {
    const byX = groups.get(name)!;
    const points: SeriesPoint[] = [...byX.keys()]
      .sort((a, b) => a - b)
      .map((x) => {
        const ys = byX.get(x)!;
        const mean = ys.reduce((s, v) => s + v, 0) / ys.length;
        const varSum = ys.reduce((s, v) => s + (v - mean) ** 2, 0);
        const se =
          ys.length > 1 ? Math.sqrt(varSum / (ys.length - 1) / ys.length) : 0;
        return { x, mean, se, n: ys.length };
      });
    out.push({ name, points });
  }
  return out;
}
