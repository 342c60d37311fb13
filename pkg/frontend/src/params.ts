/** The parameters the operator can adjust, with their location inside the
 * config document and their slider ranges. */

import type { ProjectConfig } from "./types.js";

export interface ParamSpec {
  id: string;
  label: string;
  /** dotted path into the ProjectConfig document */
  path: string;
  min: number;
  max: number;
  unit: string;
  log: boolean;
}

export const PARAMS: ParamSpec[] = [
  { id: "k_p", label: "K_P", path: "loop.k_fast.k_p", min: 1e3, max: 1e9, unit: "", log: true },
  { id: "f_i", label: "f_I", path: "loop.k_fast.f_i_Hz", min: 10, max: 1e6, unit: "Hz", log: true },
  { id: "f_d", label: "f_D", path: "loop.k_fast.f_d_Hz", min: 1e4, max: 1e8, unit: "Hz", log: true },
  { id: "f_i_slow", label: "f_I slow", path: "loop.f_i_slow_Hz", min: 1, max: 1e4, unit: "Hz", log: true },
  { id: "delta_nu_c", label: "cavity linewidth", path: "loop.discriminator.delta_nu_c_Hz", min: 1e3, max: 1e6, unit: "Hz", log: true },
  { id: "omega", label: "RF drive", path: "loop.discriminator.modulation.omega_over_2pi_Hz", min: 5e6, max: 1e8, unit: "Hz", log: true },
  { id: "tau_l", label: "loop delay", path: "loop.tau_l_s", min: 1e-9, max: 1e-6, unit: "s", log: true },
  { id: "p_pd", label: "optical power", path: "loop.discriminator.p_pd_W", min: 1e-6, max: 5e-3, unit: "W", log: true },
];

export function getParam(config: ProjectConfig, path: string): number | null {
  let node: unknown = config;
  for (const key of path.split(".")) {
    if (typeof node !== "object" || node === null || !(key in node)) return null;
    node = (node as Record<string, unknown>)[key];
  }
  return typeof node === "number" ? node : null;
}

/** Returns a structurally shared copy with one leaf replaced. */
export function setParam(config: ProjectConfig, path: string, value: number): ProjectConfig {
  const keys = path.split(".");
  const clone = (node: unknown, depth: number): unknown => {
    if (depth === keys.length) return value;
    const key = keys[depth]!;
    const obj = (node ?? {}) as Record<string, unknown>;
    return { ...obj, [key]: clone(obj[key], depth + 1) };
  };
  return clone(config, 0) as ProjectConfig;
}

/** First dotted path (among the adjustable ones) where two configs differ,
 * used for the request/echo consistency check. */
export function firstEchoMismatch(sent: ProjectConfig, echo: ProjectConfig): string | null {
  for (const spec of PARAMS) {
    const a = getParam(sent, spec.path);
    const b = getParam(echo, spec.path);
    if (a === null && b === null) continue;
    if (a === null || b === null || Math.abs(a - b) > Math.abs(a) * 1e-12) return spec.path;
  }
  return null;
}
