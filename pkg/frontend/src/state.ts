/** Session state: the working config, the last service response, and an
 * undo stack.
 *
 * Displayed numbers only ever come from stored service responses; when the
 * service is unreachable the previous response stays on screen and the
 * session is flagged stale instead of recomputing anything locally. */

import { firstEchoMismatch, setParam } from "./params.js";
import type { EvaluateResponse, ProjectConfig, TuneResult } from "./types.js";

export interface Snapshot {
  config: ProjectConfig;
  response: EvaluateResponse | null;
  responseRaw: string | null;
}

export type Listener = (state: SessionState) => void;

const HISTORY_LIMIT = 200;

export class SessionState {
  config: ProjectConfig;
  response: EvaluateResponse | null = null;
  responseRaw: string | null = null;
  stale = false;
  lastError = "";
  echoMismatch: string | null = null;
  pending = false;
  lastTune: TuneResult | null = null;
  lastTuneRaw: string | null = null;

  private history: Snapshot[] = [];
  private listeners: Listener[] = [];

  constructor(config: ProjectConfig) {
    this.config = config;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const l of this.listeners) l(this);
  }

  private snapshot(): Snapshot {
    return { config: this.config, response: this.response, responseRaw: this.responseRaw };
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  /** Record the current state, then move to the new config value. */
  setParam(path: string, value: number): void {
    this.history.push(this.snapshot());
    if (this.history.length > HISTORY_LIMIT) this.history.shift();
    this.config = setParam(this.config, path, value);
    this.pending = true;
    this.notify();
  }

  /** Adopt a whole new config (e.g. a tune result applied). */
  setConfig(config: ProjectConfig): void {
    this.history.push(this.snapshot());
    if (this.history.length > HISTORY_LIMIT) this.history.shift();
    this.config = config;
    this.pending = true;
    this.notify();
  }

  applyEvaluate(doc: EvaluateResponse, raw: string): void {
    this.response = doc;
    this.responseRaw = raw;
    this.stale = false;
    this.pending = false;
    this.lastError = "";
    this.echoMismatch = firstEchoMismatch(this.config, doc.config_echo);
    this.notify();
  }

  applyTune(doc: TuneResult, raw: string): void {
    this.lastTune = doc;
    this.lastTuneRaw = raw;
    this.notify();
  }

  /** Service unreachable or errored: keep showing the last good response. */
  markStale(message: string): void {
    this.stale = true;
    this.pending = false;
    this.lastError = message;
    this.notify();
  }

  /** Restore the exact previous config and its stored display, without
   * asking the service to recompute anything. */
  undo(): boolean {
    const prev = this.history.pop();
    if (!prev) return false;
    this.config = prev.config;
    this.response = prev.response;
    this.responseRaw = prev.responseRaw;
    this.pending = false;
    this.echoMismatch =
      prev.response === null ? null : firstEchoMismatch(prev.config, prev.response.config_echo);
    this.notify();
    return true;
  }
}
