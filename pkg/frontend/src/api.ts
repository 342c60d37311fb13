/** HTTP client for the analysis service.
 *
 * Evaluate requests are latest-wins: firing a new one aborts the previous
 * in-flight call so slider drags can't deliver stale results out of order.
 * Raw response text is preserved alongside the parsed document so exports
 * stay byte-identical to what the service produced. */

import type { ApiErrorBody, EvaluateResponse, ProjectConfig, TuneResult } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly field: string = "",
  ) {
    super(message);
  }
}

export interface Reply<T> {
  doc: T;
  raw: string;
}

async function parseReply<T>(response: Response): Promise<Reply<T>> {
  const raw = await response.text();
  if (!response.ok) {
    let message = `${response.status}`;
    let field = "";
    try {
      const body = JSON.parse(raw) as ApiErrorBody;
      message = body.error.message;
      field = body.error.field ?? "";
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(message, response.status, field);
  }
  return { doc: JSON.parse(raw) as T, raw };
}

export class ApiClient {
  private evaluateAbort: AbortController | null = null;

  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async health(): Promise<boolean> {
    try {
      const r = await this.fetchFn(`${this.baseUrl}/health`);
      return r.ok;
    } catch {
      return false;
    }
  }

  /** POST /evaluate; aborts any in-flight evaluate (latest wins). */
  async evaluate(config: ProjectConfig, session?: string): Promise<Reply<EvaluateResponse>> {
    this.evaluateAbort?.abort();
    const controller = new AbortController();
    this.evaluateAbort = controller;
    const body: Record<string, unknown> = { config };
    if (session) body.session = session;
    const response = await this.fetchFn(`${this.baseUrl}/evaluate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal: controller.signal,
    });
    return parseReply<EvaluateResponse>(response);
  }

  /** POST /tune with the service's default schedule policy. */
  async tune(config: ProjectConfig): Promise<Reply<TuneResult>> {
    const response = await this.fetchFn(`${this.baseUrl}/tune`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ config }),
    });
    return parseReply<TuneResult>(response);
  }
}

/** Trailing-edge debounce; the returned function keeps only the last call
 * made within the wait window. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
}
