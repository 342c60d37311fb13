/** DOM wiring of the tuning panel: sliders in, plots and readouts out.
 *
 * Every adjustment debounces into POST /evaluate (latest wins); responses
 * drive the display, and the service staying silent leaves the last good
 * numbers on screen behind a stale badge. */

import { ApiClient, ApiError, debounce } from "./api.js";
import { getParam, PARAMS, ParamSpec, setParam } from "./params.js";
import { missingCrossingBadges, renderBode, renderClosedLoop, renderPsd, traceToCsv } from "./plots.js";
import { formatSI, logScale, logUnscale } from "./scales.js";
import { SessionState } from "./state.js";
import type { ProjectConfig } from "./types.js";

export const DEBOUNCE_MS = 150;
const SLIDER_STEPS = 400;

export interface PanelOptions {
  evaluateDebounceMs?: number;
  session?: string;
}

export class Panel {
  readonly state: SessionState;
  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly requestEvaluate: () => void;
  private readonly session: string | undefined;
  private sliders = new Map<string, HTMLInputElement>();
  private readouts = new Map<string, HTMLElement>();

  constructor(root: HTMLElement, api: ApiClient, config: ProjectConfig, opts: PanelOptions = {}) {
    this.root = root;
    this.api = api;
    this.session = opts.session;
    this.state = new SessionState(config);
    this.requestEvaluate = debounce(
      () => void this.evaluateNow(),
      opts.evaluateDebounceMs ?? DEBOUNCE_MS,
    );
    this.build();
    this.state.subscribe(() => this.render());
    this.render();
  }

  async evaluateNow(): Promise<void> {
    try {
      const { doc, raw } = await this.api.evaluate(this.state.config, this.session);
      this.state.applyEvaluate(doc, raw);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return; // superseded
      this.state.markStale(err instanceof Error ? err.message : String(err));
      if (err instanceof ApiError && err.field) this.showFieldError(err.field, err.message);
    }
  }

  async autotune(): Promise<void> {
    const button = this.root.querySelector<HTMLButtonElement>("#autotune");
    if (button) button.disabled = true;
    try {
      const { doc, raw } = await this.api.tune(this.state.config);
      this.state.applyTune(doc, raw);
      let next = this.state.config;
      const apply: Array<[string, number | null]> = [
        ["loop.k_fast.k_p", doc.k_p],
        ["loop.k_fast.f_i_Hz", doc.f_i_Hz],
        ["loop.k_fast.f_d_Hz", doc.f_d_Hz],
        ["loop.f_i_slow_Hz", doc.f_i_slow_Hz],
      ];
      for (const [path, value] of apply) {
        if (value !== null) next = setParam(next, path, value);
      }
      this.state.setConfig(next);
      await this.evaluateNow();
    } catch (err) {
      this.state.markStale(err instanceof Error ? err.message : String(err));
    } finally {
      if (button) button.disabled = false;
    }
  }

  private build(): void {
    this.root.innerHTML = `
      <div class="toolbar">
        <span id="stale-badge" class="badge stale hidden">stale &mdash; service unreachable</span>
        <span id="echo-warning" class="badge warn hidden"></span>
        <button id="undo">undo</button>
        <button id="autotune">autotune</button>
        <button id="download-csv">trace CSV</button>
        <button id="download-tune">tune JSON</button>
        <button id="download-png">plot PNG</button>
      </div>
      <div class="columns">
        <div id="controls"></div>
        <div id="plots">
          <div id="bode"></div>
          <div id="closed"></div>
          <div id="psd"></div>
        </div>
        <div id="readouts">
          <div id="margins"></div>
          <div id="goals"></div>
          <div id="linewidth"></div>
          <div id="badges"></div>
        </div>
      </div>`;

    const controls = this.root.querySelector("#controls")!;
    for (const spec of PARAMS) {
      controls.appendChild(this.buildSlider(spec));
    }
    this.root.querySelector("#undo")!.addEventListener("click", () => {
      this.state.undo();
    });
    this.root.querySelector("#autotune")!.addEventListener("click", () => void this.autotune());
    this.root.querySelector("#download-csv")!.addEventListener("click", () => {
      const trace = this.state.response?.open_loop;
      if (trace) this.download("open_loop.csv", traceToCsv(trace), "text/csv");
    });
    this.root.querySelector("#download-tune")!.addEventListener("click", () => {
      if (this.state.lastTuneRaw !== null) {
        this.download("tune_result.json", this.state.lastTuneRaw, "application/json");
      }
    });
    this.root.querySelector("#download-png")!.addEventListener("click", () => void this.downloadPng());
  }

  private buildSlider(spec: ParamSpec): HTMLElement {
    const row = document.createElement("label");
    row.className = "param-row";
    row.dataset.param = spec.id;
    const title = document.createElement("span");
    title.textContent = spec.label;
    const value = document.createElement("span");
    value.className = "param-value";
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = String(SLIDER_STEPS);
    slider.step = "1";
    slider.addEventListener("input", () => {
      const v = logUnscale(Number(slider.value), { min: spec.min, max: spec.max }, 0, SLIDER_STEPS);
      this.state.setParam(spec.path, v);
      this.requestEvaluate();
    });
    this.sliders.set(spec.id, slider);
    this.readouts.set(spec.id, value);
    row.append(title, slider, value);
    return row;
  }

  private showFieldError(field: string, message: string): void {
    for (const spec of PARAMS) {
      if (field.includes(spec.path.split(".").pop()!)) {
        const row = this.root.querySelector(`[data-param="${spec.id}"]`);
        row?.setAttribute("data-error", message);
      }
    }
  }

  /** What the sliders display comes from the config (the service echoes it
   * back; mismatches raise the echo warning). */
  private render(): void {
    const s = this.state;
    for (const spec of PARAMS) {
      const value = getParam(s.config, spec.path);
      const slider = this.sliders.get(spec.id)!;
      const readout = this.readouts.get(spec.id)!;
      if (value === null) {
        slider.disabled = true;
        readout.textContent = "off";
        continue;
      }
      slider.disabled = false;
      slider.value = String(
        Math.round(logScale(value, { min: spec.min, max: spec.max }, 0, SLIDER_STEPS)),
      );
      readout.textContent = formatSI(value, spec.unit);
    }

    this.root.querySelector("#stale-badge")!.classList.toggle("hidden", !s.stale);
    const echo = this.root.querySelector("#echo-warning")!;
    echo.classList.toggle("hidden", s.echoMismatch === null);
    if (s.echoMismatch !== null) {
      echo.textContent = `service echo differs at ${s.echoMismatch}`;
    }
    (this.root.querySelector("#undo") as HTMLButtonElement).disabled = !s.canUndo;

    const r = s.response;
    if (!r) return;
    const bode = this.root.querySelector("#bode")!;
    bode.replaceChildren(renderBode(r.open_loop, r.margins));
    this.root.querySelector("#closed")!.replaceChildren(renderClosedLoop(r.closed_loop));
    const psdBox = this.root.querySelector("#psd")!;
    psdBox.replaceChildren();
    if (r.psd) psdBox.appendChild(renderPsd(r.psd, r.margins));

    const m = r.margins;
    this.root.querySelector("#margins")!.innerHTML = `
      <table class="margins">
        <tr><td>f_UG</td><td id="v-fug">${formatSI(m.f_ug_Hz, "Hz")}</td></tr>
        <tr><td>phi_m</td><td id="v-phim">${m.phi_m_deg === null ? "n/a" : m.phi_m_deg.toFixed(1) + " deg"}</td></tr>
        <tr><td>f_180</td><td id="v-f180">${formatSI(m.f_180_Hz, "Hz")}</td></tr>
        <tr><td>g_m</td><td id="v-gm">${m.g_m === null ? "n/a" : m.g_m.toFixed(2)}</td></tr>
        <tr><td>f_bump</td><td id="v-fbump">${formatSI(m.f_bump_Hz, "Hz")}</td></tr>
      </table>`;
    const goals = this.root.querySelector("#goals")!;
    goals.replaceChildren();
    for (const [goal, ok] of Object.entries(m.goal_flags)) {
      const badge = document.createElement("span");
      badge.className = `badge goal ${ok ? "pass" : "fail"}`;
      badge.dataset.goal = goal;
      badge.textContent = `${goal}: ${ok ? "pass" : "fail"}`;
      goals.appendChild(badge);
    }
    const lw = this.root.querySelector("#linewidth")!;
    lw.innerHTML = r.linewidth
      ? `locked linewidth <b id="v-lw">${formatSI(r.linewidth.locked_fwhm_Hz, "Hz")}</b>
         (free-running ${formatSI(r.linewidth.free_running_fwhm_Hz, "Hz")})`
      : "";
    const badges = this.root.querySelector("#badges")!;
    badges.replaceChildren();
    for (const text of missingCrossingBadges(m)) {
      const badge = document.createElement("span");
      badge.className = "badge warn";
      badge.textContent = text;
      badges.appendChild(badge);
    }
  }

  private download(name: string, content: string, mime: string): void {
    const blob = new Blob([content], { type: mime });
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = name;
    a.click();
    URL.revokeObjectURL(url);
  }

  private async downloadPng(): Promise<void> {
    const svg = this.root.querySelector("#bode svg");
    if (!svg) return;
    const xml = new XMLSerializer().serializeToString(svg);
    const img = new Image();
    const done = new Promise<void>((resolve, reject) => {
      img.onload = () => resolve();
      img.onerror = () => reject(new Error("SVG rasterization failed"));
    });
    img.src = `data:image/svg+xml;charset=utf-8,${encodeURIComponent(xml)}`;
    await done;
    const canvas = document.createElement("canvas");
    canvas.width = img.width || 560;
    canvas.height = img.height || 180;
    canvas.getContext("2d")?.drawImage(img, 0, 0);
    const a = document.createElement("a");
    a.href = canvas.toDataURL("image/png");
    a.download = "bode.png";
    a.click();
  }
}
