import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { buildFigure } from "../src/figures.js";
import { renderSpecFile } from "../src/main.js";
import { parseFigureSpec, SchemaError, FigureSpec } from "../src/types.js";
import { column, readCsv, readJson } from "../src/csv.js";

const ROOT = join(__dirname, "..");
const SPECS = [
  "quench_family",
  "saturation_scaling",
  "crossover_collapse",
  "parametric_relation",
  "theory_overlay",
] as const;

function loadSpec(name: string): FigureSpec {
  const spec = parseFigureSpec(readJson(join(ROOT, "specs", `${name}.json`)));
  // re-anchor relative paths at the frontend root
  const anchor = (p: string) => (p.startsWith("/") ? p : join(ROOT, p));
  const inputs: Record<string, string | string[]> = {};
  for (const [k, v] of Object.entries(spec.inputs)) {
    inputs[k] = Array.isArray(v) ? v.map(anchor) : anchor(v);
  }
  return { ...spec, inputs, output: anchor(spec.output) };
}

describe("all five figure kinds render from the shipped sample data", () => {
  for (const name of SPECS) {
    it(`renders ${name}`, () => {
      const spec = loadSpec(name);
      const { svg, result } = buildFigure(spec);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain("</svg>");
      expect(svg).toContain("<polyline");
      expect(result.width).toBeGreaterThan(0);
    });
  }

  it("writes SVG files through the CLI entry point", () => {
    const dir = mkdtempSync(join(tmpdir(), "figkit-"));
    for (const name of SPECS) {
      const spec = loadSpec(name);
      const specPath = join(dir, `${name}.json`);
      const outPath = join(dir, `${name}.svg`);
      writeFileSync(specPath, JSON.stringify({ ...spec, output: outPath }));
      const rendered = renderSpecFile(specPath);
      expect(rendered).toBe(outPath);
      expect(existsSync(outPath)).toBe(true);
      expect(readFileSync(outPath, "utf-8")).toContain("</svg>");
    }
  });

  it("repeated renders are byte-identical", () => {
    const spec = loadSpec("crossover_collapse");
    const a = buildFigure(spec).svg;
    const b = buildFigure(spec).svg;
    expect(a).toBe(b);
  });
});

describe("collapse inset abscissa", () => {
  it("matches (F - F_c) * L^(1/nu) recomputed from the JSON to 1e-12", () => {
    const spec = loadSpec("crossover_collapse");
    const { result } = buildFigure(spec);
    expect(result.insetAbscissa).toBeDefined();
    const fit = (readJson(spec.inputs.collapse as string) as any).delta_m2;
    const table = readCsv(spec.inputs.csv as string);
    const L = column(table, "L");
    const F = column(table, "F");
    const byKey = new Map(result.insetAbscissa!.map((a) => [`${a.L}|${a.F}`, a.x]));
    expect(byKey.size).toBe(L.length);
    for (let k = 0; k < L.length; k++) {
      const expected = (F[k] - fit.F_c) * L[k] ** (1.0 / fit.nu);
      const got = byKey.get(`${L[k]}|${F[k]}`);
      expect(got).toBeDefined();
      expect(Math.abs(got! - expected)).toBeLessThanOrEqual(1e-12 * Math.max(1, Math.abs(expected)));
    }
  });
});

describe("schema errors", () => {
  it("names a missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "figkit-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "a,b\n1,2\n");
    const spec: FigureSpec = {
      kind: "parametric_relation",
      inputs: { csv: bad },
      output: join(dir, "o.svg"),
    };
    expect(() => buildFigure(spec)).toThrowError(/missing column 'F'/);
  });

  it("rejects an empty CSV gracefully", () => {
    const dir = mkdtempSync(join(tmpdir(), "figkit-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "");
    const spec: FigureSpec = {
      kind: "saturation_scaling",
      inputs: { csv: empty },
      output: join(dir, "o.svg"),
    };
    expect(() => buildFigure(spec)).toThrowError(SchemaError);
  });

  it("rejects a header-only sweep CSV", () => {
    const dir = mkdtempSync(join(tmpdir(), "figkit-"));
    const headerOnly = join(dir, "h.csv");
    writeFileSync(headerOnly, "L,F,init,value,stderr,window_lo,window_hi,run_id\n");
    const spec: FigureSpec = {
      kind: "crossover_collapse",
      inputs: { csv: headerOnly, collapse: join(ROOT, "specs", "crossover_collapse.json") },
      output: join(dir, "o.svg"),
    };
    expect(() => buildFigure(spec)).toThrowError(/no data rows/);
  });

  it("rejects unknown figure kinds", () => {
    expect(() => parseFigureSpec({ kind: "pie_chart", inputs: {}, output: "x.svg" })).toThrowError(
      SchemaError,
    );
  });

  it("CLI exits 2 on schema errors", async () => {
    const { main } = await import("../src/main.js");
    const dir = mkdtempSync(join(tmpdir(), "figkit-"));
    const specPath = join(dir, "bad.json");
    writeFileSync(specPath, JSON.stringify({ kind: "nope", inputs: {}, output: "x.svg" }));
    expect(main(["--spec", specPath])).toBe(2);
    expect(main([])).toBe(2);
  });
});
