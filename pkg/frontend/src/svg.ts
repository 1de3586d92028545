/** Minimal SVG chart toolkit: scales, ticks, axes, series. Pure string building,
 * fixed style constants, so repeated renders are byte-identical. */

export interface Scale {
  (v: number): number;
  ticks(): number[];
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = [d0, d1];
  fn.ticks = () => linearTicks(d0, d1, 6);
  return fn;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const d0 = Math.log10(Math.max(domain[0], 1e-300));
  const d1 = Math.log10(Math.max(domain[1], 1e-300));
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) =>
    r0 + ((Math.log10(Math.max(v, 1e-300)) - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = [domain[0], domain[1]];
  fn.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(d0); e <= Math.floor(d1); e++) out.push(10 ** e);
    return out.length >= 2 ? out : [domain[0], domain[1]];
  };
  return fn;
}

function linearTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const step0 = (hi - lo) / count;
  const mag = 10 ** Math.floor(Math.log10(step0));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * step; v += step) out.push(Number(v.toPrecision(12)));
  return out;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.01) {
    const e = Math.floor(Math.log10(a));
    const m = v / 10 ** e;
    const ms = Math.abs(m - 1) < 1e-9 ? "" : `${Number(m.toPrecision(3))}x`;
    return `${ms}1e${e}`;
  }
  return String(Number(v.toPrecision(4)));
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
  x: Scale;
  y: Scale;
  body: string[];
}

export function makeFrame(
  width: number,
  height: number,
  xDomain: [number, number],
  yDomain: [number, number],
  logX: boolean,
  logY: boolean,
  margin = { top: 34, right: 16, bottom: 42, left: 56 },
): Frame {
  const x = (logX ? logScale : linearScale)(xDomain, [margin.left, width - margin.right]);
  const y = (logY ? logScale : linearScale)(yDomain, [height - margin.bottom, margin.top]);
  return { width, height, margin, x, y, body: [] };
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function axes(f: Frame, xLabel: string, yLabel: string, title: string): void {
  const { x, y, width, height, margin } = f;
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  for (const t of x.ticks()) {
    const px = x(t);
    f.body.push(
      `<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y1}" stroke="#eee"/>`,
      `<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 4}" stroke="#333"/>`,
      `<text x="${px.toFixed(2)}" y="${y0 + 16}" font-size="10" text-anchor="middle" fill="#333">${fmtTick(t)}</text>`,
    );
  }
  for (const t of y.ticks()) {
    const py = y(t);
    f.body.push(
      `<line x1="${x0}" y1="${py.toFixed(2)}" x2="${x1}" y2="${py.toFixed(2)}" stroke="#eee"/>`,
      `<line x1="${x0 - 4}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#333"/>`,
      `<text x="${x0 - 7}" y="${(py + 3).toFixed(2)}" font-size="10" text-anchor="end" fill="#333">${fmtTick(t)}</text>`,
    );
  }
  f.body.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#333"/>`,
    `<text x="${(x0 + x1) / 2}" y="${height - 8}" font-size="12" text-anchor="middle" fill="#000">${esc(xLabel)}</text>`,
    `<text x="14" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" fill="#000" transform="rotate(-90 14 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
    `<text x="${(x0 + x1) / 2}" y="20" font-size="13" text-anchor="middle" font-weight="bold" fill="#000">${esc(title)}</text>`,
  );
}

export function polyline(
  f: Frame,
  xs: number[],
  ys: number[],
  color: string,
  opts: { width?: number; dash?: string; opacity?: number } = {},
): void {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
    pts.push(`${f.x(xs[i]).toFixed(2)},${f.y(ys[i]).toFixed(2)}`);
  }
  if (pts.length === 0) return;
  const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
  const op = opts.opacity !== undefined ? ` stroke-opacity="${opts.opacity}"` : "";
  f.body.push(
    `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="${opts.width ?? 1.5}"${dash}${op}/>`,
  );
}

export function scatter(f: Frame, xs: number[], ys: number[], color: string, r = 2.6): void {
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
    f.body.push(
      `<circle cx="${f.x(xs[i]).toFixed(2)}" cy="${f.y(ys[i]).toFixed(2)}" r="${r}" fill="${color}"/>`,
    );
  }
}

export function referenceLine(f: Frame, value: number, label: string): void {
  const py = f.y(value);
  const x0 = f.margin.left;
  const x1 = f.width - f.margin.right;
  f.body.push(
    `<line x1="${x0}" y1="${py.toFixed(2)}" x2="${x1}" y2="${py.toFixed(2)}" stroke="#000" stroke-dasharray="6,3,1,3"/>`,
    `<text x="${x1 - 4}" y="${(py - 4).toFixed(2)}" font-size="10" text-anchor="end" fill="#000">${esc(label)}</text>`,
  );
}

export function legend(f: Frame, entries: { label: string; color: string }[]): void {
  const x0 = f.margin.left + 8;
  let yy = f.margin.top + 12;
  for (const { label, color } of entries) {
    f.body.push(
      `<line x1="${x0}" y1="${yy - 3}" x2="${x0 + 18}" y2="${yy - 3}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${x0 + 23}" y="${yy}" font-size="10" fill="#222">${esc(label)}</text>`,
    );
    yy += 14;
  }
}

export function render(f: Frame): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${f.width}" height="${f.height}" viewBox="0 0 ${f.width} ${f.height}">`,
    `<rect width="${f.width}" height="${f.height}" fill="#fff"/>`,
    ...f.body,
    `</svg>`,
    ``,
  ].join("\n");
}

export function finiteExtent(values: number[], padFrac = 0.05): [number, number] {
  const finite = values.filter((v) => Number.isFinite(v));
  if (finite.length === 0) return [0, 1];
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = (hi - lo) * padFrac;
  return [lo - pad, hi + pad];
}
