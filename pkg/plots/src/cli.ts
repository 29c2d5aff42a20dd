#!/usr/bin/env node
/**
 * Batch figure renderer over the simulator CLI's run directories.
 * Exit codes: 0 rendered, 1 usage or flag error, 2 input or render failure.
 */
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { FigureKind, KINDS, renderFigure } from "./figures.js";

const USAGE = `usage: logifv-plots render --kind KIND --input DIR --out DIR [--band F] [--format svg]

Reads one run directory written by the simulator CLI and renders one figure.

kinds:
  trajectory_band        scaled size paths over the equilibrium band (simulate run)
  heterozygosity_decay   semi-log pair-moment decay with the exact-rate line (duality run)
  block_count_survival   P(block count > j) per observation time (coalescent run)
  occupation_histogram   worst per-replicate size deviation (occupation run)

options:
  --band F     half-width of the drawn equilibrium band (trajectory_band, default 0.2)
  --format F   svg (png is declared but not implemented)
  -h, --help   show this message
`;

function message(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

function parse(argv: string[]) {
  return parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      kind: { type: "string" },
      input: { type: "string" },
      out: { type: "string" },
      band: { type: "string" },
      format: { type: "string" },
      help: { type: "boolean", short: "h" },
    },
  } as const);
}

export function main(argv: string[]): number {
  let parsed: ReturnType<typeof parse>;
  try {
    parsed = parse(argv);
  } catch (err) {
    process.stderr.write(`${message(err)}\n${USAGE}`);
    return 1;
  }
  if (parsed.values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  const [command, ...rest] = parsed.positionals;
  if (command === undefined) {
    process.stderr.write(USAGE);
    return 1;
  }
  if (command !== "render" || rest.length > 0) {
    process.stderr.write(`unknown command '${[command, ...rest].join(" ")}'\n${USAGE}`);
    return 1;
  }
  const { kind, input, out, band, format } = parsed.values;
  if (kind === undefined || input === undefined || out === undefined) {
    process.stderr.write(`render needs --kind, --input and --out\n${USAGE}`);
    return 1;
  }
  if (!(KINDS as readonly string[]).includes(kind)) {
    process.stderr.write(
      `unknown figure kind '${kind}' (expected one of: ${KINDS.join(", ")})\n`
    );
    return 1;
  }
  let bandWidth: number | undefined;
  if (band !== undefined) {
    bandWidth = Number(band);
    if (!Number.isFinite(bandWidth) || bandWidth <= 0) {
      process.stderr.write(`--band must be a positive number, got '${band}'\n`);
      return 1;
    }
  }
  if (format !== undefined && format !== "svg" && format !== "png") {
    process.stderr.write(`--format must be svg or png, got '${format}'\n`);
    return 1;
  }
  try {
    const file = renderFigure({
      kind: kind as FigureKind,
      input,
      outDir: out,
      format,
      band: bandWidth,
    });
    process.stdout.write(`wrote ${file}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`${message(err)}\n`);
    return 2;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
