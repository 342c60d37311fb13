/** SVG rendering of the Bode, closed-loop, and noise panels.
 *
 * Pure DOM construction from service-provided arrays; marker positions come
 * straight out of the margins report. */

import { decadeTicks, formatSI, linearTicks, linScale, logScale, paddedSpan, Span, tracePath } from "./scales.js";
import type { BodeTraceDoc, MarginsReport, PsdDoc } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const PLOT_W = 560;
export const PLOT_H = 180;
const MARGIN = { left: 54, right: 16, top: 14, bottom: 26 };

function el(name: string, attrs: Record<string, string | number> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

interface Marker {
  f: number | null;
  label: string;
  cls: string;
}

function panel(
  freqs: readonly number[],
  values: readonly number[],
  yLabel: string,
  markers: Marker[],
  opts: { ySpan?: Span; logY?: boolean } = {},
): SVGSVGElement {
  const width = PLOT_W - MARGIN.left - MARGIN.right;
  const height = PLOT_H - MARGIN.top - MARGIN.bottom;
  const xSpan: Span = { min: freqs[0] ?? 1, max: freqs[freqs.length - 1] ?? 10 };
  const plotted = opts.logY ? values.map((v) => (v > 0 ? Math.log10(v) : NaN)) : values;
  const ySpan = opts.ySpan ?? paddedSpan(plotted);

  const svg = el("svg", {
    viewBox: `0 0 ${PLOT_W} ${PLOT_H}`,
    width: PLOT_W,
    height: PLOT_H,
    class: "plot",
  }) as SVGSVGElement;
  const inner = el("g", { transform: `translate(${MARGIN.left},${MARGIN.top})` });
  svg.appendChild(inner);

  for (const tick of decadeTicks(xSpan)) {
    const x = logScale(tick, xSpan, 0, width);
    inner.appendChild(el("line", { x1: x, x2: x, y1: 0, y2: height, class: "grid" }));
    const text = el("text", { x, y: height + 16, class: "tick", "text-anchor": "middle" });
    text.textContent = formatSI(tick, "Hz", 1);
    inner.appendChild(text);
  }
  const yTicks = opts.logY
    ? linearTicks(ySpan, 4).map((v) => v)
    : linearTicks(ySpan, 5);
  for (const tick of yTicks) {
    const y = linScale(tick, ySpan, height, 0);
    inner.appendChild(el("line", { x1: 0, x2: width, y1: y, y2: y, class: "grid" }));
    const text = el("text", { x: -6, y: y + 3, class: "tick", "text-anchor": "end" });
    text.textContent = opts.logY ? `1e${tick}` : String(Math.round(tick * 100) / 100);
    inner.appendChild(text);
  }

  inner.appendChild(
    el("path", { d: tracePath(freqs, plotted, xSpan, ySpan, width, height), class: "trace" }),
  );

  for (const marker of markers) {
    if (marker.f === null || marker.f < xSpan.min || marker.f > xSpan.max) continue;
    const x = logScale(marker.f, xSpan, 0, width);
    inner.appendChild(
      el("line", { x1: x, x2: x, y1: 0, y2: height, class: `marker ${marker.cls}` }),
    );
    const text = el("text", { x: x + 3, y: 11, class: `marker-label ${marker.cls}` });
    text.textContent = marker.label;
    inner.appendChild(text);
  }

  const label = el("text", {
    x: -MARGIN.left + 12,
    y: height / 2,
    class: "axis-label",
    transform: `rotate(-90 ${-MARGIN.left + 12} ${height / 2})`,
    "text-anchor": "middle",
  });
  label.textContent = yLabel;
  inner.appendChild(label);
  return svg;
}

export function marginMarkers(margins: MarginsReport): Marker[] {
  return [
    { f: margins.f_ug_Hz, label: "f_UG", cls: "m-ug" },
    { f: margins.f_180_Hz, label: "f_180", cls: "m-180" },
    { f: margins.f_bump_Hz, label: "f_bump", cls: "m-bump" },
  ];
}

/** Gain + phase panels of an open-loop trace with margin markers. */
export function renderBode(trace: BodeTraceDoc, margins: MarginsReport): DocumentFragment {
  const frag = document.createDocumentFragment();
  frag.appendChild(panel(trace.freqs_Hz, trace.gain_dB, "gain (dB)", marginMarkers(margins)));
  frag.appendChild(
    panel(trace.freqs_Hz, trace.phase_deg, "phase (deg)", marginMarkers(margins)),
  );
  return frag;
}

/** Closed-loop y5/m6 gain panel. */
export function renderClosedLoop(trace: BodeTraceDoc): SVGSVGElement {
  return panel(trace.freqs_Hz, trace.gain_dB, "|y5/m6| (dB)", []);
}

/** Predicted locked-laser noise PSD, log-log, with the servo bump marked. */
export function renderPsd(psd: PsdDoc, margins: MarginsReport): SVGSVGElement {
  return panel(psd.freqs_Hz, psd.psd_Hz2_per_Hz, "S_y1 (Hz^2/Hz)", marginMarkers(margins), {
    logY: true,
  });
}

/** "not in range" badges for crossings the analysis could not locate. */
export function missingCrossingBadges(margins: MarginsReport): string[] {
  const out: string[] = [];
  if (margins.f_ug_Hz === null) out.push("f_UG not in range");
  if (margins.f_180_Hz === null) out.push("f_180 not in range");
  return out;
}

/** CSV export of the currently displayed trace (service data verbatim). */
export function traceToCsv(trace: BodeTraceDoc): string {
  const lines = ["frequency_Hz,gain_dB,phase_deg"];
  for (let i = 0; i < trace.freqs_Hz.length; i++) {
    lines.push(`${trace.freqs_Hz[i]},${trace.gain_dB[i]},${trace.phase_deg[i]}`);
  }
  return lines.join("\n") + "\n";
}
