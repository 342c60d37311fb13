/** Pure plotting math: log/linear axis mapping, tick generation, SVG path
 * construction, and engineering-unit formatting.  No physics happens here;
 * every plotted number comes from the service. */

export interface Span {
  min: number;
  max: number;
}

/** Map a value onto [x0, x1] with a log10 input scale. */
export function logScale(value: number, span: Span, x0: number, x1: number): number {
  const t = (Math.log10(value) - Math.log10(span.min)) / (Math.log10(span.max) - Math.log10(span.min));
  return x0 + t * (x1 - x0);
}

/** Map a value onto [y0, y1] linearly (y0 may exceed y1 for SVG's
 * downward-growing axis). */
export function linScale(value: number, span: Span, y0: number, y1: number): number {
  const t = (value - span.min) / (span.max - span.min);
  return y0 + t * (y1 - y0);
}

/** Inverse of logScale: slider/pixel position back to a value. */
export function logUnscale(x: number, span: Span, x0: number, x1: number): number {
  const t = (x - x0) / (x1 - x0);
  return 10 ** (Math.log10(span.min) + t * (Math.log10(span.max) - Math.log10(span.min)));
}

/** Decade tick positions covering a span. */
export function decadeTicks(span: Span): number[] {
  const out: number[] = [];
  const lo = Math.ceil(Math.log10(span.min) - 1e-9);
  const hi = Math.floor(Math.log10(span.max) + 1e-9);
  for (let e = lo; e <= hi; e++) out.push(10 ** e);
  return out;
}

/** Evenly spaced linear ticks (about n of them) with round steps. */
export function linearTicks(span: Span, n = 6): number[] {
  const raw = (span.max - span.min) / Math.max(n, 2);
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(span.min / step) * step; v <= span.max + 1e-12 * step; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

/** Bounds of an array padded a little for plotting. */
export function paddedSpan(values: readonly number[], pad = 0.05): Span {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!Number.isFinite(min)) return { min: 0, max: 1 };
  const width = max - min || 1;
  return { min: min - pad * width, max: max + pad * width };
}

/** SVG path string for (freqs, values) on a log-x / linear-y panel. */
export function tracePath(
  freqs: readonly number[],
  values: readonly number[],
  xSpan: Span,
  ySpan: Span,
  width: number,
  height: number,
): string {
  const parts: string[] = [];
  for (let i = 0; i < freqs.length; i++) {
    const f = freqs[i]!;
    const v = values[i]!;
    if (!Number.isFinite(v)) continue;
    const x = logScale(f, xSpan, 0, width);
    const y = linScale(v, ySpan, height, 0);
    parts.push(`${parts.length === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return parts.join(" ");
}

const SI_PREFIXES: Array<[number, string]> = [
  [1e9, "G"],
  [1e6, "M"],
  [1e3, "k"],
  [1, ""],
  [1e-3, "m"],
  [1e-6, "u"],
  [1e-9, "n"],
];

/** 1.06e6, "Hz" -> "1.06 MHz". */
export function formatSI(value: number | null | undefined, unit: string, digits = 3): string {
  if (value === null || value === undefined || !Number.isFinite(value)) return "n/a";
  if (value === 0) return `0 ${unit}`;
  const mag = Math.abs(value);
  for (const [scale, prefix] of SI_PREFIXES) {
    if (mag >= scale) {
      return `${(value / scale).toPrecision(digits)} ${prefix}${unit}`;
    }
  }
  return `${value.toExponential(Math.max(digits - 1, 0))} ${unit}`;
}
