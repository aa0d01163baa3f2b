/** Thin HTTP client for the monitoring API.
 *
 * The fetch function is injected: tests script responses, the browser
 * passes window.fetch.  Only the structural bits of fetch are required
 * so no DOM lib types leak into callers.
 */

import type {
  AckReceipt, AnalyticsDoc, DispatchReceipt, StationsDoc, TimeWindow,
} from "./types.js";

export interface FetchInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export interface FetchResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}

export type FetchLike = (url: string, init?: FetchInit) => Promise<FetchResponse>;

/** Non-2xx reply; `detail` is the server's JSON detail verbatim. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed (${status})`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    readonly base: string,
    readonly token: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request<T>(path: string, init: FetchInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
      ...(init.body !== undefined ? { "Content-Type": "application/json" } : {}),
      ...init.headers,
    };
    const resp = await this.fetchFn(this.base + path, { ...init, headers });
    if (!resp.ok) {
      let detail: unknown = null;
      try {
        detail = (asObject(await resp.json()) as { detail?: unknown }).detail ?? null;
      } catch {
        detail = null;
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; t: number; depot: number }> {
    return this.request("/health");
  }

  stations(): Promise<StationsDoc> {
    return this.request("/stations");
  }

  analytics(window?: TimeWindow): Promise<AnalyticsDoc> {
    return this.analyticsRaw(window).then((r) => r.doc);
  }

  /** Analytics body both parsed and as served.  The charts render from
   * `doc` without transforming values, and tests compare `text` against
   * the offline report byte-for-byte. */
  async analyticsRaw(window?: TimeWindow): Promise<{ text: string; doc: AnalyticsDoc }> {
    let path = "/analytics";
    if (window) {
      const q = new URLSearchParams({
        start: String(window.start),
        end: String(window.end),
      });
      path += `?${q.toString()}`;
    }
    const resp = await this.fetchFn(this.base + path, {
      headers: { Authorization: `Bearer ${this.token}` },
    });
    const text = await resp.text();
    if (!resp.ok) {
      let detail: unknown = null;
      try {
        detail = (asObject(JSON.parse(text)) as { detail?: unknown }).detail ?? null;
      } catch {
        detail = null;
      }
      throw new ApiError(resp.status, detail);
    }
    return { text, doc: JSON.parse(text) as AnalyticsDoc };
  }

  replenish(stationId: string, qty: number): Promise<DispatchReceipt> {
    return this.request("/replenish", {
      method: "POST",
      body: JSON.stringify({ station_id: stationId, qty }),
    });
  }

  ack(alertId: string, operator: string): Promise<AckReceipt> {
    return this.request("/ack", {
      method: "POST",
      body: JSON.stringify({ alert_id: alertId, operator }),
    });
  }

  /** Stream URL with the ?token= form (EventSource-style clients cannot
   * set Authorization headers). */
  eventsUrl(since?: number): string {
    const q = new URLSearchParams({ token: this.token });
    if (since !== undefined) q.set("since", String(since));
    return `${this.base}/events?${q.toString()}`;
  }
}

function asObject(doc: unknown): object {
  if (typeof doc !== "object" || doc === null) return {};
  return doc;
}
