/** JSON document shapes exchanged with the analysis service. */

export interface MarginsReport {
  f_ug_Hz: number | null;
  phi_m_deg: number | null;
  f_180_Hz: number | null;
  g_m: number | null;
  f_bump_Hz: number | null;
  stable: boolean;
  goal_flags: Record<string, boolean>;
  warnings: string[];
}

export interface BodeTraceDoc {
  label?: string;
  freqs_Hz: number[];
  gain_dB: number[];
  phase_deg: number[];
}

export interface PsdDoc {
  label?: string;
  freqs_Hz: number[];
  psd_Hz2_per_Hz: number[];
  rbw_Hz?: number | null;
}

export interface LinewidthDoc {
  locked_fwhm_Hz: number;
  free_running_fwhm_Hz: number;
}

/** The loop configuration document; only the fields the panel edits are
 * typed individually, everything else passes through untouched. */
export type ProjectConfig = Record<string, unknown>;

export interface EvaluateResponse {
  schema_version: number;
  label: string;
  branch: string;
  margins: MarginsReport;
  open_loop: BodeTraceDoc;
  closed_loop: BodeTraceDoc;
  psd: PsdDoc | null;
  linewidth: LinewidthDoc | null;
  config_echo: ProjectConfig;
}

export interface TuneResult {
  k_p: number;
  f_i_Hz: number;
  f_d_Hz: number | null;
  f_i_slow_Hz: number;
  margins: MarginsReport;
  iterations: number;
  infeasible: boolean;
  binding_constraint: string;
  trace: unknown[];
}

export interface ApiErrorBody {
  error: { message: string; field?: string };
}
