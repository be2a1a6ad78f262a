import { Series } from "./series";

export interface FigureSpec {
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const MARGIN = { top: 20, right: 24, bottom: 48, left: 64 };

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(2);
  return String(Number(v.toPrecision(6)));
}

/** Round tick positions covering [lo, hi]; deterministic and timezone-free. */
export function ticks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.5 : 1;
    return ticks(lo - pad, lo + pad, count);
  }
  const span = hi - lo;
  const raw = span / count;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

/** Render the series into a standalone SVG document (vector, deterministic). */
export function renderFigure(series: Series[], spec: FigureSpec): string {
  const width = spec.width ?? 720;
  const height = spec.height ?? 480;
  const iw = width - MARGIN.left - MARGIN.right;
  const ih = height - MARGIN.top - MARGIN.bottom;

  const allPoints = series.flatMap((s) => s.points);
  let xLo = 0, xHi = 1, yLo = 0, yHi = 1;
  if (allPoints.length > 0) {
    xLo = Math.min(...allPoints.map((p) => p.x));
    xHi = Math.max(...allPoints.map((p) => p.x));
    yLo = Math.min(...allPoints.map((p) => p.mean - p.se));
    yHi = Math.max(...allPoints.map((p) => p.mean + p.se));
    if (xHi === xLo) { xLo -= 0.5; xHi += 0.5; }
    if (yHi === yLo) { yLo -= 0.5; yHi += 0.5; }
    const yPad = 0.05 * (yHi - yLo);
    yLo -= yPad; yHi += yPad;
  }
  const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * iw;
  const sy = (y: number) => MARGIN.top + ih - ((y - yLo) / (yHi - yLo)) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  for (const t of ticks(xLo, xHi)) {
    const x = sx(t).toFixed(2);
    parts.push(`<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + ih}" stroke="#e0e0e0"/>`);
    parts.push(`<text x="${x}" y="${MARGIN.top + ih + 18}" text-anchor="middle">${fmt(t)}</text>`);
  }
  for (const t of ticks(yLo, yHi)) {
    const y = sy(t).toFixed(2);
    parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + iw}" y2="${y}" stroke="#e0e0e0"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle">${fmt(t)}</text>`);
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" ` +
    `fill="none" stroke="#404040"/>`
  );
  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${height - 10}" text-anchor="middle">` +
    `${escapeXml(spec.xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 16 ${MARGIN.top + ih / 2})">${escapeXml(spec.yLabel)}</text>`
  );

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (s.points.length === 0) return;
    const hasBand = s.points.some((p) => p.se > 0);
    if (hasBand && s.points.length > 1) {
      const upper = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.mean + p.se).toFixed(2)}`);
      const lower = [...s.points].reverse()
        .map((p) => `${sx(p.x).toFixed(2)},${sy(p.mean - p.se).toFixed(2)}`);
      parts.push(
        `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" ` +
        `fill-opacity="0.15" stroke="none"/>`
      );
    }
    const line = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.mean).toFixed(2)}`).join(" ");
    parts.push(`<polyline points="${line}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    for (const p of s.points) {
      parts.push(
        `<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(p.mean).toFixed(2)}" r="2.6" fill="${color}"/>`
      );
    }
  });

  // legend, top-right inside the axes
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const y = MARGIN.top + 14 + i * 16;
    const x = MARGIN.left + iw - 130;
    parts.push(`<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${x + 28}" y="${y + 4}">${escapeXml(s.name)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
