import { readFileSync } from "node:fs";

import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, debounce } from "../src/api.js";
import type { ProjectConfig } from "../src/types.js";

const CONFIG = JSON.parse(
  readFileSync(new URL("../fixtures/config3.json", import.meta.url), "utf-8"),
) as ProjectConfig;
const EVALUATE_RAW = readFileSync(
  new URL("../fixtures/evaluate_config3.json", import.meta.url),
  "utf-8",
);

function jsonResponse(raw: string, status = 200): Response {
  return new Response(raw, { status, headers: { "content-type": "application/json" } });
}

describe("api client", () => {
  it("returns the parsed document and the exact raw bytes", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(EVALUATE_RAW));
    const api = new ApiClient("", fetchFn as unknown as typeof fetch);
    const { doc, raw } = await api.evaluate(CONFIG);
    expect(raw).toBe(EVALUATE_RAW);
    expect(doc.margins.f_ug_Hz).toBeCloseTo(1.06e6, -4);
    expect(fetchFn).toHaveBeenCalledOnce();
  });

  it("aborts the in-flight evaluate when a newer one starts", async () => {
    let firstSignal: AbortSignal | undefined;
    const fetchFn = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      const signal = init?.signal ?? undefined;
      if (!firstSignal) {
        firstSignal = signal as AbortSignal;
        await new Promise((resolve) => setTimeout(resolve, 30));
        if (firstSignal.aborted) throw new DOMException("aborted", "AbortError");
      }
      return jsonResponse(EVALUATE_RAW);
    });
    const api = new ApiClient("", fetchFn as unknown as typeof fetch);
    const first = api.evaluate(CONFIG);
    const second = api.evaluate(CONFIG);
    await expect(first).rejects.toThrow(/abort/i);
    await expect(second).resolves.toBeTruthy();
    expect(firstSignal?.aborted).toBe(true);
  });

  it("maps service errors to typed failures with the field path", async () => {
    const body = JSON.stringify({
      error: { message: "0 is not valid", field: "$.config.loop.discriminator.delta_nu_c_Hz" },
    });
    const api = new ApiClient("", (async () => jsonResponse(body, 400)) as unknown as typeof fetch);
    try {
      await api.evaluate(CONFIG);
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(400);
      expect((err as ApiError).field).toContain("delta_nu_c_Hz");
    }
  });

  it("health() is false when fetch rejects", async () => {
    const api = new ApiClient("", (async () => {
      throw new TypeError("net down");
    }) as unknown as typeof fetch);
    expect(await api.health()).toBe(false);
  });
});

describe("debounce", () => {
  it("coalesces a slider drag into one trailing call", () => {
    vi.useFakeTimers();
    const fn = vi.fn();
    const d = debounce(fn, 150);
    d(1);
    vi.advanceTimersByTime(60);
    d(2);
    vi.advanceTimersByTime(60);
    d(3);
    vi.advanceTimersByTime(149);
    expect(fn).not.toHaveBeenCalled();
    vi.advanceTimersByTime(1);
    expect(fn).toHaveBeenCalledExactlyOnceWith(3);
    vi.useRealTimers();
  });
});
