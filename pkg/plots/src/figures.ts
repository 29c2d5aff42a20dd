/**
 * The four figure kinds, each computed entirely from files the simulator
 * CLI emitted. Nothing here re-simulates or invents statistics; the one
 * derived quantity is the decay-rate fit the heterozygosity figure
 * annotates, a least-squares slope on exactly the semi-log data it plots.
 */
import { existsSync, mkdirSync, writeFileSync } from "fs";
import path from "path";

import { columnIndex, numericColumn, readMetadata, readTable, Table } from "./csv.js";
import { ChartSpec, fmt, renderChart, Series } from "./svg.js";

export const KINDS = [
  "trajectory_band",
  "heterozygosity_decay",
  "block_count_survival",
  "occupation_histogram",
] as const;

export type FigureKind = (typeof KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  /** Directory holding one CLI run's outputs (tables plus metadata.json). */
  input: string;
  /** Directory the figure file is written into, created if missing. */
  outDir: string;
  format?: "svg" | "png";
  /** Half-width of the equilibrium band for trajectory_band. */
  band?: number;
}

const PALETTE = ["#4361ee", "#e07a1f", "#2d6a4f", "#9d4edd", "#c9184a",
  "#0096c7", "#6a994e", "#b5838d"];

function color(i: number): string {
  return PALETTE[i % PALETTE.length]!;
}

function requireFile(dir: string, name: string): string {
  const file = path.join(dir, name);
  if (!existsSync(file)) {
    throw new Error(`${dir}: expected ${name} (is this the right run directory?)`);
  }
  return file;
}

function groupBy(keys: number[]): Map<number, number[]> {
  const groups = new Map<number, number[]>();
  keys.forEach((k, i) => {
    const rows = groups.get(k);
    if (rows) rows.push(i);
    else groups.set(k, [i]);
  });
  return groups;
}

/** Least-squares slope and intercept of ln(y) against x. */
export function fitLogSlope(
  xs: number[],
  ys: number[]
): { slope: number; intercept: number } {
  if (xs.length < 2) {
    throw new Error(`decay fit needs at least 2 points, got ${xs.length}`);
  }
  ys.forEach((y, i) => {
    if (y <= 0) {
      throw new Error(`decay fit: value ${y} at t=${xs[i]} is not positive`);
    }
  });
  const n = xs.length;
  const logs = ys.map(Math.log);
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = logs.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i]! - mx) ** 2;
    sxy += (xs[i]! - mx) * (logs[i]! - my);
  }
  if (sxx === 0) {
    throw new Error("decay fit: all x values coincide");
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

function trajectoryBand(dir: string, band: number): ChartSpec {
  const meta = readMetadata(dir);
  const nStar = meta.scaling?.n_star ?? meta.n_star;
  if (nStar === undefined) {
    throw new Error(`${dir}/metadata.json: no scaling.n_star`);
  }
  // single-replicate runs only write trajectory.csv
  const file = existsSync(path.join(dir, "replicates.csv"))
    ? path.join(dir, "replicates.csv")
    : requireFile(dir, "trajectory.csv");
  const table = readTable(file);
  const times = numericColumn(table, "scaled_time");
  const sizes = numericColumn(table, "N_bar");
  if (times.length === 0) {
    throw new Error(`${file}: no replicate rows to plot`);
  }
  const byReplicate = table.header.includes("replicate")
    ? groupBy(numericColumn(table, "replicate"))
    : new Map([[0, times.map((_, i) => i)]]);
  const series: Series[] = [...byReplicate.entries()].map(([r, idx], i) => ({
    xs: idx.map((j) => times[j]!),
    ys: idx.map((j) => sizes[j]!),
    color: color(i),
    width: 1,
    opacity: 0.85,
    label: byReplicate.size <= 4
      ? `replicate ${r}`
      : i === 0 ? `${byReplicate.size} replicate paths` : undefined,
  }));
  const model = meta.model;
  return {
    title: "Scaled population size over the equilibrium band",
    subtitle: model
      ? `${model.regime}, K=${model.K}, ${byReplicate.size} replicate(s), band half-width ${fmt(band)}`
      : undefined,
    xLabel: "scaled time",
    yLabel: "N / size factor",
    series,
    hBands: [{ lo: nStar - band, hi: nStar + band, color: "#a7c4bc", label: "equilibrium band" }],
    hLines: [{ value: nStar, color: "#2d6a4f", label: `n* = ${fmt(nStar)}` }],
  };
}

function heterozygosityDecay(dir: string): ChartSpec {
  const meta = readMetadata(dir);
  const lambdaTotal = meta.lambda_total;
  const x0 = meta.x0;
  if (lambdaTotal === undefined || x0 === undefined) {
    throw new Error(`${dir}/metadata.json: needs lambda_total and x0`);
  }
  const table = readTable(requireFile(dir, "duality.csv"));
  const data = heterozygosityData(table, x0);
  const fit = fitLogSlope(data.ts, data.hs);
  const theory = (t: number) => x0 * (1 - x0) * Math.exp(-lambdaTotal * t);
  const tGrid = [0, ...data.ts];
  return {
    title: "Heterozygosity decay against the exact rate",
    subtitle: `measured from pair moments at x0=${fmt(x0)}; log scale`,
    xLabel: "t",
    yLabel: "E[X(1-X)]",
    logY: true,
    series: [
      {
        xs: tGrid,
        ys: tGrid.map(theory),
        color: "#2d6a4f",
        label: `exact rate ${fmt(lambdaTotal)}`,
        width: 1.4,
      },
      {
        xs: tGrid,
        ys: tGrid.map((t) => Math.exp(fit.intercept + fit.slope * t)),
        color: "#e07a1f",
        label: `fitted rate ${fmt(-fit.slope)}`,
        dash: "5,3",
      },
    ],
    points: [
      {
        xs: data.ts,
        ys: data.hs,
        err: data.ses,
        flagged: data.flagged,
        color: "#4361ee",
        label: "observed (|z| > 3 in red)",
      },
    ],
    annotations: [`fit/exact = ${fmt(-fit.slope / lambdaTotal)}`],
  };
}

/** Pair-moment rows (n = 2) turned into heterozygosity points. */
export function heterozygosityData(
  table: Table,
  x0: number
): { ts: number[]; hs: number[]; ses: number[]; flagged: boolean[] } {
  columnIndex(table, ["t", "n", "forward_mean", "forward_se", "z"]);
  const ns = numericColumn(table, "n");
  const pick = ns.map((n, i) => (n === 2 ? i : -1)).filter((i) => i >= 0);
  if (pick.length === 0) {
    throw new Error(`${table.source}: no n=2 rows, cannot form heterozygosity`);
  }
  const ts = numericColumn(table, "t");
  const means = numericColumn(table, "forward_mean");
  const ses = numericColumn(table, "forward_se");
  const zs = numericColumn(table, "z");
  const order = [...pick].sort((a, b) => ts[a]! - ts[b]!);
  return {
    ts: order.map((i) => ts[i]!),
    // E[X] stays at x0 for a neutral pair of types, so x0 - E[X^2] is the
    // heterozygosity with the same standard error as the second moment
    hs: order.map((i) => x0 - means[i]!),
    ses: order.map((i) => ses[i]!),
    flagged: order.map((i) => Math.abs(zs[i]!) > 3),
  };
}

/** One survival curve P(block count > j) per observation time, time-sorted. */
export function survivalCurves(
  table: Table
): { t: number; xs: number[]; ys: number[] }[] {
  const ts = numericColumn(table, "t");
  const states = numericColumn(table, "state");
  const probs = numericColumn(table, "prob");
  const nMax = Math.max(...states);
  const groups = [...groupBy(ts).entries()].sort((a, b) => a[0] - b[0]);
  return groups.map(([t, idx]) => {
    const byState = new Map(idx.map((j) => [states[j]!, probs[j]!]));
    // survival P(count > j): cumulative sum of the law from the top
    const xs: number[] = [];
    const ys: number[] = [];
    let tail = 0;
    for (let j = nMax; j >= 0; j--) {
      xs.unshift(j);
      ys.unshift(tail);
      tail += byState.get(j) ?? 0;
    }
    return { t, xs, ys };
  });
}

function blockSurvival(dir: string): ChartSpec {
  const meta = readMetadata(dir);
  const table = readTable(requireFile(dir, "blocks.csv"));
  const curves = survivalCurves(table);
  const nMax = Math.max(...numericColumn(table, "state"));
  const series: Series[] = curves.map((curve, i) => ({
    xs: curve.xs,
    ys: curve.ys,
    color: color(i),
    label: `t = ${fmt(curve.t)}`,
    step: true,
    width: 1.4,
  }));
  return {
    title: "Ancestral block count survival",
    subtitle: `P(block count > j) under the dual coalescent, n_max=${meta.n_max ?? nMax}`,
    xLabel: "j (number of blocks)",
    yLabel: "P(count > j)",
    yMin: 0,
    series,
  };
}

function occupationHistogram(dir: string): ChartSpec {
  const meta = readMetadata(dir);
  const table = readTable(requireFile(dir, "occupation.csv"));
  const sups = numericColumn(table, "sup_dev");
  const fracs = numericColumn(table, "frac_outside");
  if (sups.length === 0) {
    throw new Error(`${table.source}: no replicate rows`);
  }
  const epsBand = meta.eps_band;
  const hi = Math.max(...sups, epsBand ?? 0) * 1.05;
  const bins = 14;
  const width = hi / bins || 1;
  const counts = new Array<number>(bins).fill(0);
  for (const v of sups) {
    counts[Math.min(Math.floor(v / width), bins - 1)]! += 1;
  }
  const within = epsBand === undefined
    ? undefined
    : sups.filter((v) => v <= epsBand).length / sups.length;
  const settled = epsBand === undefined
    ? undefined
    : fracs.filter((v) => v < 0.05).length / fracs.length;
  const annotations: string[] = [];
  if (within !== undefined) annotations.push(`sup within band: ${fmt(within * 100)}%`);
  if (settled !== undefined) annotations.push(`time outside < 5%: ${fmt(settled * 100)}%`);
  return {
    title: "Worst size deviation per replicate",
    subtitle: `sup |N_bar - n*| over ${sups.length} replicates` +
      (meta.n_star !== undefined ? `, n* = ${fmt(meta.n_star)}` : ""),
    xLabel: "sup deviation",
    yLabel: "replicates",
    xMin: 0,
    yMin: 0,
    bars: [{
      bars: counts.map((c, i) => ({ x0: i * width, x1: (i + 1) * width, y: c })),
      color: "#4361ee",
      label: "replicate count",
    }],
    vLines: epsBand === undefined ? []
      : [{ value: epsBand, color: ALERT_COLOR, label: `band edge ${fmt(epsBand)}` }],
    annotations,
  };
}

const ALERT_COLOR = "#d62828";

export function buildFigure(spec: FigureSpec): string {
  if (!KINDS.includes(spec.kind)) {
    throw new Error(
      `unknown figure kind '${spec.kind}' (expected one of: ${KINDS.join(", ")})`
    );
  }
  const format = spec.format ?? "svg";
  if (format !== "svg" && format !== "png") {
    throw new Error(`output format must be svg or png, got '${format}'`);
  }
  if (format === "png") {
    throw new Error(
      "png output is declared but not implemented; render svg and rasterize externally"
    );
  }
  if (!existsSync(spec.input)) {
    throw new Error(`input directory does not exist: ${spec.input}`);
  }
  let chart: ChartSpec;
  switch (spec.kind) {
    case "trajectory_band":
      chart = trajectoryBand(spec.input, spec.band ?? 0.2);
      break;
    case "heterozygosity_decay":
      chart = heterozygosityDecay(spec.input);
      break;
    case "block_count_survival":
      chart = blockSurvival(spec.input);
      break;
    case "occupation_histogram":
      chart = occupationHistogram(spec.input);
      break;
  }
  return renderChart(chart);
}

/** Render and write <kind>.svg into spec.outDir; returns the file path. */
export function renderFigure(spec: FigureSpec): string {
  const svg = buildFigure(spec);
  mkdirSync(spec.outDir, { recursive: true });
  const file = path.join(spec.outDir, `${spec.kind}.svg`);
  writeFileSync(file, svg);
  return file;
}
