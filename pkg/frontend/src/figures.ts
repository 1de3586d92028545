/** The five figure renderers.
 *
 * Every renderer plots persisted values only; the single computation allowed
 * here is the collapse-inset abscissa (F - F_c) * L^(1/nu) from the fitted
 * JSON, which the result object also reports for verification.
 *
 * Input roles per kind:
 *   quench_family:       traces: string[] of trace CSVs; meta: trace_meta.json
 *   saturation_scaling:  csv: sweep_m2_sat.csv; meta: sweep_meta.json
 *   crossover_collapse:  csv: sweep_delta_m2.csv; collapse: collapse.json
 *   parametric_relation: csv: parametric_L*.csv
 *   theory_overlay:      trace: trace CSV; curves: closure_curves.csv
 */

import { basename } from "path";
import { column, readCsv, readJson, requireColumns, stringColumn } from "./csv.js";
import {
  axes,
  finiteExtent,
  Frame,
  legend,
  linearScale,
  makeFrame,
  PALETTE,
  polyline,
  referenceLine,
  render,
  scatter,
} from "./svg.js";
import { FigureSpec, RenderResult, SchemaError, StyleOptions } from "./types.js";

function asPathList(value: string | string[] | undefined, role: string): string[] {
  if (value === undefined) throw new SchemaError(`inputs.${role} is required`);
  return Array.isArray(value) ? value : [value];
}

function asPath(value: string | string[] | undefined, role: string): string {
  const list = asPathList(value, role);
  if (list.length !== 1) throw new SchemaError(`inputs.${role} must be a single path`);
  return list[0];
}

function styleOr(style: StyleOptions | undefined, width = 640, height = 420) {
  return {
    title: style?.title ?? "",
    logX: style?.logX ?? false,
    logY: style?.logY ?? false,
    width: style?.width ?? width,
    height: style?.height ?? height,
    referenceLines: style?.referenceLines ?? [],
  };
}

// ---------------------------------------------------------------------------

function quenchFamily(spec: FigureSpec): { svg: string; result: Partial<RenderResult> } {
  const paths = asPathList(spec.inputs.traces, "traces");
  const st = styleOr(spec.style);
  const series = paths.map((p) => {
    const table = readCsv(p);
    requireColumns(table, ["t", "M2"], p);
    return { name: basename(p).replace(/\.csv$/, ""), t: column(table, "t", p), m2: column(table, "M2", p) };
  });

  let haar: number | undefined;
  if (spec.inputs.meta !== undefined) {
    const meta = readJson(asPath(spec.inputs.meta, "meta")) as { m_haar?: number };
    if (typeof meta.m_haar !== "number") {
      throw new SchemaError("trace meta sidecar lacks m_haar");
    }
    haar = meta.m_haar;
  }

  const allT = series.flatMap((s) => s.t);
  const allY = series.flatMap((s) => s.m2).concat(haar !== undefined ? [haar] : []);
  const f = makeFrame(st.width, st.height, finiteExtent(allT, 0), finiteExtent(allY), st.logX !== false, st.logY);
  axes(f, "t (units of 1/J)", "M2 (bits)", st.title || "Magic growth under the quench");
  series.forEach((s, i) => polyline(f, s.t, s.m2, PALETTE[i % PALETTE.length], { width: 1.6 }));
  if (haar !== undefined) referenceLine(f, haar, "Haar benchmark");
  for (const line of st.referenceLines) referenceLine(f, line.value, line.label);
  legend(f, series.map((s, i) => ({ label: s.name, color: PALETTE[i % PALETTE.length] })));
  return { svg: render(f), result: {} };
}

// ---------------------------------------------------------------------------

function saturationScaling(spec: FigureSpec): { svg: string; result: Partial<RenderResult> } {
  const path = asPath(spec.inputs.csv, "csv");
  const table = readCsv(path);
  requireColumns(table, ["L", "F", "value"], path);
  const L = column(table, "L", path);
  const F = column(table, "F", path);
  const value = column(table, "value", path);
  const st = styleOr(spec.style);

  const fValues = [...new Set(F)].sort((a, b) => a - b);
  const sizes = [...new Set(L)].sort((a, b) => a - b);

  let haarByL: Record<string, number> | undefined;
  if (spec.inputs.meta !== undefined) {
    const meta = readJson(asPath(spec.inputs.meta, "meta")) as { m_haar?: Record<string, number> };
    if (!meta.m_haar) throw new SchemaError("sweep meta sidecar lacks m_haar");
    haarByL = meta.m_haar;
  }

  const yAll = value.concat(haarByL ? Object.values(haarByL) : []);
  const f = makeFrame(st.width, st.height, [sizes[0] - 0.5, sizes[sizes.length - 1] + 0.5], finiteExtent(yAll), false, false);
  axes(f, "L (sites)", "saturation M2 (bits)", st.title || "Saturation scaling with system size");
  fValues.forEach((fv, i) => {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let k = 0; k < L.length; k++) {
      if (F[k] === fv) {
        xs.push(L[k]);
        ys.push(value[k]);
      }
    }
    const color = PALETTE[i % PALETTE.length];
    polyline(f, xs, ys, color, { width: 1.4 });
    scatter(f, xs, ys, color);
  });
  if (haarByL) {
    const xs = sizes;
    const ys = sizes.map((l) => haarByL![String(l)]).filter((v) => v !== undefined);
    if (ys.length === xs.length) polyline(f, xs, ys, "#000", { dash: "6,3", width: 1.2 });
  }
  legend(f, fValues.map((fv, i) => ({ label: `F = ${fv}`, color: PALETTE[i % PALETTE.length] })));
  return { svg: render(f), result: {} };
}

// ---------------------------------------------------------------------------

interface CollapseJson {
  [observable: string]: { F_c: number; nu: number; cost: number };
}

function crossoverCollapse(spec: FigureSpec): { svg: string; result: Partial<RenderResult> } {
  const path = asPath(spec.inputs.csv, "csv");
  const table = readCsv(path);
  requireColumns(table, ["L", "F", "value"], path);
  const L = column(table, "L", path);
  const F = column(table, "F", path);
  const value = column(table, "value", path);

  const collapsePath = asPath(spec.inputs.collapse, "collapse");
  const collapse = readJson(collapsePath) as CollapseJson;
  const fit = collapse["delta_m2"] ?? Object.values(collapse)[0];
  if (!fit || typeof fit.F_c !== "number" || typeof fit.nu !== "number") {
    throw new SchemaError(`collapse JSON lacks F_c / nu in ${collapsePath}`);
  }

  const st = styleOr(spec.style, 680, 440);
  const sizes = [...new Set(L)].sort((a, b) => a - b);
  const f = makeFrame(st.width, st.height, finiteExtent(F, 0.02), finiteExtent(value), false, false);
  axes(f, "F (tilt)", "delta M2 (bits)", st.title || "Ergodic-to-localized crossover");

  const abscissa: { L: number; F: number; x: number }[] = [];
  sizes.forEach((sz, i) => {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let k = 0; k < L.length; k++) {
      if (L[k] === sz) {
        xs.push(F[k]);
        ys.push(value[k]);
        abscissa.push({ L: sz, F: F[k], x: (F[k] - fit.F_c) * sz ** (1.0 / fit.nu) });
      }
    }
    const color = PALETTE[i % PALETTE.length];
    polyline(f, xs, ys, color, { width: 1.4 });
    scatter(f, xs, ys, color);
  });
  legend(f, sizes.map((sz, i) => ({ label: `L = ${sz}`, color: PALETTE[i % PALETTE.length] })));

  // inset: rescaled abscissa (F - F_c) L^(1/nu)
  const ix0 = st.width - 250;
  const iy0 = st.height - 215;
  const inset: Frame = {
    width: st.width,
    height: st.height,
    margin: { top: iy0, right: 26, bottom: 55, left: ix0 },
    x: linearScale(finiteExtent(abscissa.map((a) => a.x), 0.03), [ix0, st.width - 26]),
    y: linearScale(finiteExtent(value), [st.height - 55, iy0]),
    body: f.body,
  };
  f.body.push(
    `<rect x="${ix0 - 6}" y="${iy0 - 14}" width="${st.width - 26 - ix0 + 12}" height="${st.height - 55 - iy0 + 24}" fill="#fff" stroke="#888"/>`,
    `<text x="${(ix0 + st.width - 26) / 2}" y="${iy0 - 2}" font-size="10" text-anchor="middle" fill="#333">collapse: (F - ${fit.F_c.toFixed(3)}) L^(1/${fit.nu.toFixed(3)})</text>`,
  );
  sizes.forEach((sz, i) => {
    const pts = abscissa.filter((a) => a.L === sz);
    const color = PALETTE[i % PALETTE.length];
    for (const p of pts) {
      const k = abscissa.indexOf(p);
      const vy = value[L.findIndex((lv, idx) => lv === sz && F[idx] === p.F)];
      inset.body.push(
        `<circle cx="${inset.x(p.x).toFixed(2)}" cy="${inset.y(vy).toFixed(2)}" r="2.2" fill="${color}"/>`,
      );
    }
  });
  return { svg: render(f), result: { insetAbscissa: abscissa } };
}

// ---------------------------------------------------------------------------

function parametricRelation(spec: FigureSpec): { svg: string; result: Partial<RenderResult> } {
  const path = asPath(spec.inputs.csv, "csv");
  const table = readCsv(path);
  requireColumns(table, ["F", "s_half", "m2"], path);
  const F = column(table, "F", path);
  const s = column(table, "s_half", path);
  const m2 = column(table, "m2", path);
  const st = styleOr(spec.style);

  const fValues = [...new Set(F)].sort((a, b) => a - b);
  const f = makeFrame(st.width, st.height, finiteExtent(s), finiteExtent(m2), false, false);
  axes(f, "S_half (bits)", "M2 (bits)", st.title || "Magic versus entanglement");
  fValues.forEach((fv, i) => {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let k = 0; k < F.length; k++) {
      if (F[k] === fv) {
        xs.push(s[k]);
        ys.push(m2[k]);
      }
    }
    polyline(f, xs, ys, PALETTE[i % PALETTE.length], { width: 1.4, opacity: 0.9 });
  });
  for (const line of st.referenceLines) referenceLine(f, line.value, line.label);
  legend(f, fValues.map((fv, i) => ({ label: `F = ${fv}`, color: PALETTE[i % PALETTE.length] })));
  return { svg: render(f), result: {} };
}

// ---------------------------------------------------------------------------

function theoryOverlay(spec: FigureSpec): { svg: string; result: Partial<RenderResult> } {
  const tracePath = asPath(spec.inputs.trace, "trace");
  const traceTable = readCsv(tracePath);
  requireColumns(traceTable, ["t", "M2"], tracePath);
  const t = column(traceTable, "t", tracePath);
  const m2 = column(traceTable, "M2", tracePath);

  const curvesPath = asPath(spec.inputs.curves, "curves");
  const curvesTable = readCsv(curvesPath);
  requireColumns(curvesTable, ["trace", "t", "m2_model"], curvesPath);
  const names = stringColumn(curvesTable, "trace", curvesPath);
  const ct = column(curvesTable, "t", curvesPath);
  const cm = column(curvesTable, "m2_model", curvesPath);
  const wanted = basename(tracePath);
  const mt: number[] = [];
  const mm: number[] = [];
  for (let k = 0; k < names.length; k++) {
    if (names[k] === wanted) {
      mt.push(ct[k]);
      mm.push(cm[k]);
    }
  }
  if (mt.length === 0) {
    throw new SchemaError(`closure curves carry no rows for trace '${wanted}' in ${curvesPath}`);
  }

  const st = styleOr(spec.style);
  const f = makeFrame(st.width, st.height, finiteExtent(t, 0), finiteExtent(m2.concat(mm)), st.logX !== false, st.logY);
  axes(f, "t (units of 1/J)", "M2 (bits)", st.title || "Saturating-growth model over data");
  scatter(f, t, m2, PALETTE[0], 2.2);
  polyline(f, mt, mm, "#000", { dash: "6,3", width: 1.6 });
  for (const line of st.referenceLines) referenceLine(f, line.value, line.label);
  legend(f, [
    { label: wanted, color: PALETTE[0] },
    { label: "model fit", color: "#000" },
  ]);
  return { svg: render(f), result: {} };
}

// ---------------------------------------------------------------------------

export function buildFigure(spec: FigureSpec): { svg: string; result: RenderResult } {
  const table = {
    quench_family: quenchFamily,
    saturation_scaling: saturationScaling,
    crossover_collapse: crossoverCollapse,
    parametric_relation: parametricRelation,
    theory_overlay: theoryOverlay,
  } as const;
  const fn = table[spec.kind];
  if (!fn) throw new SchemaError(`unknown figure kind ${spec.kind}`);
  const { svg, result } = fn(spec);
  const st = styleOr(spec.style);
  return {
    svg,
    result: { output: spec.output, width: st.width, height: st.height, ...result },
  };
}
