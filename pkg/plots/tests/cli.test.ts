import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";

let stderr: ReturnType<typeof vi.spyOn>;
let stdout: ReturnType<typeof vi.spyOn>;

beforeEach(() => {
  stderr = vi.spyOn(process.stderr, "write").mockImplementation(() => true);
  stdout = vi.spyOn(process.stdout, "write").mockImplementation(() => true);
});

afterEach(() => {
  stderr.mockRestore();
  stdout.mockRestore();
});

function written(spy: ReturnType<typeof vi.spyOn>): string {
  return spy.mock.calls.map((c) => String(c[0])).join("");
}

function simulateDir(): string {
  const dir = mkdtempSync(path.join(tmpdir(), "plots-cli-"));
  writeFileSync(
    path.join(dir, "metadata.json"),
    JSON.stringify({
      command: "simulate",
      scaling: { n_star: 1.0, time_factor: 10, size_factor: 10 },
    })
  );
  writeFileSync(
    path.join(dir, "replicates.csv"),
    "replicate,scaled_time,N_bar,freq_0,freq_1\n0,0.0,1.0,0.5,0.5\n0,0.1,1.1,0.5,0.5\n"
  );
  return dir;
}

describe("argument handling", () => {
  it("prints usage and fails with no arguments", () => {
    expect(main([])).toBe(1);
    expect(written(stderr)).toContain("usage:");
  });

  it("rejects an unknown command", () => {
    expect(main(["summarize"])).toBe(1);
    expect(written(stderr)).toContain("unknown command 'summarize'");
  });

  it("rejects an unknown flag", () => {
    expect(main(["render", "--frame", "x"])).toBe(1);
  });

  it("requires kind, input and out", () => {
    expect(main(["render", "--kind", "trajectory_band"])).toBe(1);
    expect(written(stderr)).toContain("render needs --kind, --input and --out");
  });

  it("rejects an unknown kind with the valid list", () => {
    expect(main(["render", "--kind", "pie", "--input", "a", "--out", "b"])).toBe(1);
    expect(written(stderr)).toContain("unknown figure kind 'pie'");
    expect(written(stderr)).toContain("occupation_histogram");
  });

  it("rejects a non-positive band", () => {
    expect(
      main([
        "render", "--kind", "trajectory_band", "--input", "a", "--out", "b",
        "--band", "0",
      ])
    ).toBe(1);
    expect(written(stderr)).toContain("--band must be a positive number");
  });

  it("rejects a negative band given in equals form", () => {
    expect(
      main([
        "render", "--kind", "trajectory_band", "--input", "a", "--out", "b",
        "--band=-0.1",
      ])
    ).toBe(1);
    expect(written(stderr)).toContain("--band must be a positive number");
  });

  it("rejects an unknown format", () => {
    expect(
      main([
        "render", "--kind", "trajectory_band", "--input", "a", "--out", "b",
        "--format", "pdf",
      ])
    ).toBe(1);
    expect(written(stderr)).toContain("--format must be svg or png");
  });

  it("prints usage on --help and succeeds", () => {
    expect(main(["--help"])).toBe(0);
    expect(written(stdout)).toContain("usage:");
  });
});

describe("render command", () => {
  it("renders a figure and reports the output path", () => {
    const out = mkdtempSync(path.join(tmpdir(), "plots-cli-out-"));
    const code = main([
      "render", "--kind", "trajectory_band",
      "--input", simulateDir(), "--out", out, "--band", "0.25",
    ]);
    expect(code).toBe(0);
    expect(written(stdout)).toContain("wrote ");
    expect(existsSync(path.join(out, "trajectory_band.svg"))).toBe(true);
  });

  it("fails with exit code 2 when the input directory is missing", () => {
    const code = main([
      "render", "--kind", "trajectory_band",
      "--input", "/nonexistent/run", "--out", ".",
    ]);
    expect(code).toBe(2);
    expect(written(stderr)).toContain("input directory does not exist");
  });

  it("fails with exit code 2 for the declared-but-unimplemented png format", () => {
    const code = main([
      "render", "--kind", "trajectory_band",
      "--input", simulateDir(), "--out", ".", "--format", "png",
    ]);
    expect(code).toBe(2);
    expect(written(stderr)).toContain("png output is declared but not implemented");
  });
});
