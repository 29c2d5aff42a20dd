/**
 * Minimal deterministic SVG chart builder.
 *
 * Output depends only on the chart spec: fixed layout, fixed decimal
 * formatting, no timestamps, so identical inputs give identical bytes.
 */

export interface Series {
  xs: number[];
  ys: number[];
  color: string;
  label?: string;
  width?: number;
  dash?: string;
  /** Draw as a step function (horizontal-then-vertical), for survival curves. */
  step?: boolean;
  opacity?: number;
}

export interface PointSeries {
  xs: number[];
  ys: number[];
  /** Half-length of the vertical error whisker per point, in data units. */
  err?: number[];
  /** Per-point flag: highlighted points are drawn in the alert color. */
  flagged?: boolean[];
  color: string;
  label?: string;
}

export interface Bar {
  x0: number;
  x1: number;
  y: number;
}

export interface BarSeries {
  bars: Bar[];
  color: string;
  label?: string;
}

export interface HBand {
  lo: number;
  hi: number;
  color: string;
  label?: string;
}

export interface RefLine {
  value: number;
  color: string;
  label?: string;
  dash?: string;
}

export interface ChartSpec {
  title: string;
  subtitle?: string;
  xLabel: string;
  yLabel: string;
  series?: Series[];
  points?: PointSeries[];
  bars?: BarSeries[];
  hBands?: HBand[];
  hLines?: RefLine[];
  vLines?: RefLine[];
  /** Plot y on a log10 scale; all y data must be positive. */
  logY?: boolean;
  xMin?: number;
  xMax?: number;
  yMin?: number;
  yMax?: number;
  /** Extra text lines drawn in the upper right of the plot area. */
  annotations?: string[];
}

const W = 720;
const H = 360;
const ML = 64;
const MR = 18;
const MT = 46;
const MB = 50;
const PW = W - ML - MR;
const PH = H - MT - MB;
const ALERT = "#d62828";

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.001) return v.toExponential(1);
  const s = v.toPrecision(4);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

export function niceTicks(min: number, max: number, count = 5): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough)!;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

/** 1-2-5 ladder covering [min, max], for log-scale axes. */
export function logTicks(min: number, max: number): number[] {
  const ticks: number[] = [];
  let decade = Math.pow(10, Math.floor(Math.log10(min)));
  while (decade <= max) {
    for (const m of [1, 2, 5]) {
      const v = m * decade;
      if (v >= min * (1 - 1e-12) && v <= max * (1 + 1e-12)) ticks.push(v);
    }
    decade *= 10;
  }
  return ticks.length > 0 ? ticks : [min, max];
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function renderChart(spec: ChartSpec): string {
  const series = spec.series ?? [];
  const points = spec.points ?? [];
  const barSets = spec.bars ?? [];

  const xs = [
    ...series.flatMap((s) => s.xs),
    ...points.flatMap((p) => p.xs),
    ...barSets.flatMap((b) => b.bars.flatMap((bar) => [bar.x0, bar.x1])),
    ...(spec.vLines ?? []).map((l) => l.value),
  ];
  const ys = [
    ...series.flatMap((s) => s.ys),
    ...points.flatMap((p) =>
      p.err ? p.ys.flatMap((y, i) => [y - p.err![i]!, y + p.err![i]!]) : p.ys
    ),
    ...barSets.flatMap((b) => b.bars.map((bar) => bar.y)),
    ...(spec.hLines ?? []).map((l) => l.value),
    ...(spec.hBands ?? []).flatMap((b) => [b.lo, b.hi]),
  ];
  if (xs.length === 0 || ys.length === 0) {
    throw new Error(`chart '${spec.title}': no data to plot`);
  }

  let [xMin, xMax] = extent(xs);
  xMin = spec.xMin ?? xMin;
  xMax = spec.xMax ?? xMax;
  if (xMax === xMin) xMax = xMin + 1;

  let [yLo, yHi] = extent(ys);
  let yMin: number;
  let yMax: number;
  if (spec.logY) {
    // data values must be positive; whisker ends merely clamp to the frame
    const core = [
      ...series.flatMap((s) => s.ys),
      ...points.flatMap((p) => p.ys),
      ...barSets.flatMap((b) => b.bars.map((bar) => bar.y)),
    ];
    if (core.some((v) => v <= 0)) {
      throw new Error(
        `chart '${spec.title}': log scale requires positive values`
      );
    }
    [yLo, yHi] = extent(ys.filter((v) => v > 0));
    yMin = spec.yMin ?? yLo / 1.25;
    yMax = spec.yMax ?? yHi * 1.25;
  } else {
    const pad = (yHi - yLo || 1) * 0.08;
    yMin = spec.yMin ?? yLo - pad;
    yMax = spec.yMax ?? yHi + pad;
  }

  const xOf = (v: number) => ML + ((v - xMin) / (xMax - xMin)) * PW;
  const tY = (v: number) => (spec.logY ? Math.log10(v) : v);
  const yOf = (v: number) =>
    MT + PH - ((tY(v) - tY(yMin)) / (tY(yMax) - tY(yMin))) * PH;

  const px = (v: number) => v.toFixed(2);
  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="#ffffff"/>\n`;
  s += `<text x="${ML}" y="20" font-size="13" font-weight="600" fill="#1d1d1d">${esc(spec.title)}</text>\n`;
  if (spec.subtitle) {
    s += `<text x="${ML}" y="34" font-size="9" fill="#777777">${esc(spec.subtitle)}</text>\n`;
  }

  // bands behind everything else
  for (const band of spec.hBands ?? []) {
    const yTop = yOf(Math.min(band.hi, yMax));
    const yBot = yOf(Math.max(band.lo, yMin));
    s += `<rect x="${ML}" y="${px(yTop)}" width="${PW}" height="${px(yBot - yTop)}" fill="${band.color}" opacity="0.25"/>\n`;
  }

  // grid and axes
  const yTicks = spec.logY ? logTicks(yMin, yMax) : niceTicks(yMin, yMax);
  for (const v of yTicks) {
    const y = px(yOf(v));
    s += `<line x1="${ML}" y1="${y}" x2="${ML + PW}" y2="${y}" stroke="#e8e8e8" stroke-width="0.6"/>\n`;
    s += `<text x="${ML - 6}" y="${y}" font-size="9" fill="#555555" text-anchor="end" dominant-baseline="middle">${fmt(v)}</text>\n`;
  }
  const xTicks = niceTicks(xMin, xMax, 7);
  for (const v of xTicks) {
    const x = px(xOf(v));
    s += `<line x1="${x}" y1="${MT}" x2="${x}" y2="${MT + PH}" stroke="#f0f0f0" stroke-width="0.6"/>\n`;
    s += `<text x="${x}" y="${MT + PH + 14}" font-size="9" fill="#555555" text-anchor="middle">${fmt(v)}</text>\n`;
  }
  s += `<rect x="${ML}" y="${MT}" width="${PW}" height="${PH}" fill="none" stroke="#999999" stroke-width="0.8"/>\n`;
  s += `<text x="${ML + PW / 2}" y="${H - 14}" font-size="10" fill="#333333" text-anchor="middle">${esc(spec.xLabel)}</text>\n`;
  s += `<text x="16" y="${MT + PH / 2}" font-size="10" fill="#333333" text-anchor="middle" transform="rotate(-90 16 ${MT + PH / 2})">${esc(spec.yLabel)}</text>\n`;

  for (const line of spec.hLines ?? []) {
    const y = px(yOf(line.value));
    s += `<line x1="${ML}" y1="${y}" x2="${ML + PW}" y2="${y}" stroke="${line.color}" stroke-width="1" stroke-dasharray="${line.dash ?? "6,3"}"/>\n`;
  }
  for (const line of spec.vLines ?? []) {
    const x = px(xOf(line.value));
    s += `<line x1="${x}" y1="${MT}" x2="${x}" y2="${MT + PH}" stroke="${line.color}" stroke-width="1" stroke-dasharray="${line.dash ?? "6,3"}"/>\n`;
  }

  for (const set of barSets) {
    for (const bar of set.bars) {
      const x0 = xOf(bar.x0);
      const x1 = xOf(bar.x1);
      const yTop = yOf(bar.y);
      const yBase = yOf(Math.max(yMin, 0));
      s += `<rect x="${px(x0)}" y="${px(yTop)}" width="${px(x1 - x0)}" height="${px(Math.max(yBase - yTop, 0))}" fill="${set.color}" opacity="0.8" stroke="#ffffff" stroke-width="0.5"/>\n`;
    }
  }

  for (const sr of series) {
    const pts: string[] = [];
    for (let i = 0; i < sr.xs.length; i++) {
      const x = xOf(sr.xs[i]!);
      const y = yOf(sr.ys[i]!);
      if (sr.step && i > 0) {
        pts.push(`${px(x)},${px(yOf(sr.ys[i - 1]!))}`);
      }
      pts.push(`${px(x)},${px(y)}`);
    }
    s += `<polyline points="${pts.join(" ")}" fill="none" stroke="${sr.color}" stroke-width="${sr.width ?? 1.2}"${sr.dash ? ` stroke-dasharray="${sr.dash}"` : ""}${sr.opacity !== undefined ? ` opacity="${sr.opacity}"` : ""}/>\n`;
  }

  for (const ps of points) {
    for (let i = 0; i < ps.xs.length; i++) {
      const x = xOf(ps.xs[i]!);
      const y = yOf(ps.ys[i]!);
      const color = ps.flagged?.[i] ? ALERT : ps.color;
      if (ps.err) {
        const half = ps.err[i]!;
        // clamp whisker ends into the plotted range so a wide error bar
        // cannot leave the frame or cross zero on a log scale
        const yTop = yOf(Math.min(ps.ys[i]! + half, yMax));
        const yBot = yOf(Math.max(ps.ys[i]! - half, yMin));
        s += `<line x1="${px(x)}" y1="${px(yTop)}" x2="${px(x)}" y2="${px(yBot)}" stroke="${color}" stroke-width="1"/>\n`;
      }
      s += `<circle cx="${px(x)}" cy="${px(y)}" r="2.6" fill="${color}"/>\n`;
    }
  }

  // legend: labeled elements, stacked in the upper right of the plot
  const entries: { label: string; color: string; dash?: string }[] = [];
  for (const b of spec.hBands ?? [])
    if (b.label) entries.push({ label: b.label, color: b.color });
  for (const sr of series)
    if (sr.label) entries.push({ label: sr.label, color: sr.color, dash: sr.dash });
  for (const ps of points)
    if (ps.label) entries.push({ label: ps.label, color: ps.color });
  for (const b of barSets)
    if (b.label) entries.push({ label: b.label, color: b.color });
  for (const l of [...(spec.hLines ?? []), ...(spec.vLines ?? [])])
    if (l.label) entries.push({ label: l.label, color: l.color, dash: l.dash ?? "6,3" });
  let ly = MT + 12;
  for (const e of entries) {
    const lx = ML + PW - 170;
    s += `<line x1="${lx}" y1="${ly - 3}" x2="${lx + 16}" y2="${ly - 3}" stroke="${e.color}" stroke-width="2"${e.dash ? ` stroke-dasharray="${e.dash}"` : ""}/>\n`;
    s += `<text x="${lx + 21}" y="${ly}" font-size="9" fill="#333333">${esc(e.label)}</text>\n`;
    ly += 13;
  }
  for (const note of spec.annotations ?? []) {
    s += `<text x="${ML + PW - 170}" y="${ly}" font-size="9" fill="#555555">${esc(note)}</text>\n`;
    ly += 13;
  }

  s += "</svg>\n";
  return s;
}
