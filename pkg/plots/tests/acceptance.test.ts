/**
 * Figure-layer acceptance: every figure kind renders from the demo outputs
 * shipped in the repository, and the decay rate refitted from exactly the
 * semi-log data the heterozygosity figure plots matches the exact total
 * coalescence rate recorded in the run metadata within 20%.
 */
import { mkdtempSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { readMetadata, readTable } from "../src/csv.js";
import {
  FigureKind,
  fitLogSlope,
  heterozygosityData,
  KINDS,
  renderFigure,
} from "../src/figures.js";

const DEMO = fileURLToPath(new URL("../../demo_outputs", import.meta.url));

const RUN_FOR: Record<FigureKind, string> = {
  trajectory_band: "simulate",
  heterozygosity_decay: "duality",
  block_count_survival: "coalescent",
  occupation_histogram: "occupation",
};

describe("acceptance: shipped demo outputs", () => {
  for (const kind of KINDS) {
    it(`${kind} renders without error`, () => {
      const out = mkdtempSync(path.join(tmpdir(), "plots-acceptance-"));
      const file = renderFigure({
        kind,
        input: path.join(DEMO, RUN_FOR[kind]),
        outDir: out,
      });
      expect(statSync(file).size).toBeGreaterThan(0);
      console.log(`figure acceptance, render ${kind}: PASS`);
    });
  }

  it("refitted heterozygosity decay rate is within 20% of the exact rate", () => {
    const run = path.join(DEMO, "duality");
    const meta = readMetadata(run);
    expect(meta.lambda_total).toBeDefined();
    expect(meta.x0).toBeDefined();
    const table = readTable(path.join(run, "duality.csv"));
    const data = heterozygosityData(table, meta.x0!);
    const fit = fitLogSlope(data.ts, data.hs);
    const ratio = -fit.slope / meta.lambda_total!;
    console.log(
      `figure acceptance, decay refit: ${(-fit.slope).toFixed(4)} ` +
        `against exact ${meta.lambda_total}, ratio ${ratio.toFixed(4)}: ` +
        (Math.abs(ratio - 1) < 0.2 ? "PASS" : "FAIL")
    );
    expect(Math.abs(ratio - 1)).toBeLessThan(0.2);
  });
});
