/** Figure-spec schema: what to draw, from which files, to where. */

export type FigureKind =
  | "quench_family"
  | "saturation_scaling"
  | "crossover_collapse"
  | "parametric_relation"
  | "theory_overlay";

export interface FigureSpec {
  kind: FigureKind;
  /** input file paths, keyed by role (see per-kind docs in figures.ts) */
  inputs: Record<string, string | string[]>;
  /** output SVG path */
  output: string;
  style?: StyleOptions;
}

export interface StyleOptions {
  title?: string;
  logX?: boolean;
  logY?: boolean;
  width?: number;
  height?: number;
  /** horizontal reference lines, e.g. the Haar benchmark */
  referenceLines?: { value: number; label: string }[];
}

/** Metadata a renderer reports back for verification (never re-derived physics). */
export interface RenderResult {
  output: string;
  width: number;
  height: number;
  /** crossover_collapse only: the inset abscissa values actually drawn */
  insetAbscissa?: { L: number; F: number; x: number }[];
}

export class SchemaError extends Error {}

export function parseFigureSpec(raw: unknown): FigureSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new SchemaError("figure spec must be a JSON object");
  }
  const spec = raw as Record<string, unknown>;
  const kinds: FigureKind[] = [
    "quench_family",
    "saturation_scaling",
    "crossover_collapse",
    "parametric_relation",
    "theory_overlay",
  ];
  if (!kinds.includes(spec.kind as FigureKind)) {
    throw new SchemaError(`kind must be one of ${kinds.join(", ")}; got ${String(spec.kind)}`);
  }
  if (typeof spec.output !== "string" || spec.output.length === 0) {
    throw new SchemaError("output must be a nonempty path");
  }
  if (typeof spec.inputs !== "object" || spec.inputs === null) {
    throw new SchemaError("inputs must be an object of file paths");
  }
  return spec as unknown as FigureSpec;
}
