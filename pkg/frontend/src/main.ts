/** CLI: render one figure from a JSON spec.
 *
 * Usage: tsx src/main.ts --spec path/to/figure.json
 * Exit codes: 0 rendered, 2 spec/schema error, 1 anything else.
 */

import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";
import { buildFigure } from "./figures.js";
import { parseFigureSpec, SchemaError } from "./types.js";
import { readJson } from "./csv.js";

export function renderSpecFile(specPath: string): string {
  const spec = parseFigureSpec(readJson(specPath));
  const { svg, result } = buildFigure(spec);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, svg, "utf-8");
  return result.output;
}

function main(argv: string[]): number {
  const flag = argv.indexOf("--spec");
  if (flag < 0 || flag + 1 >= argv.length) {
    console.error("usage: main.ts --spec FIGURE_SPEC.json");
    return 2;
  }
  try {
    const out = renderSpecFile(argv[flag + 1]);
    console.log(`rendered ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.ts")) {
  process.exit(main(process.argv.slice(2)));
}

export { main };
