/** Thin typed client for the review API. */

import type { FileRecord, Machine, Reminder, Summary, ErrorBody } from "./types.js";
import { type FilterState, toQuery } from "./filters.js";

/** Non-2xx response carrying the server's {detail, field} error body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
    readonly field?: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface FilePage {
  rows: FileRecord[];
  total: number;
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base = "",
    fetchFn?: FetchLike,
  ) {
    // Wrap rather than alias: calling a detached window.fetch throws in browsers.
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    path: string,
    init?: RequestInit,
  ): Promise<{ body: T; headers: Headers }> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      let field: string | undefined;
      try {
        const body = (await response.json()) as ErrorBody;
        if (body.detail) detail = body.detail;
        field = body.field;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail, field);
    }
    return { body: (await response.json()) as T, headers: response.headers };
  }

  async machines(staleOnly?: boolean): Promise<Machine[]> {
    const suffix = staleOnly === undefined ? "" : `?stale=${staleOnly}`;
    const { body } = await this.request<Machine[]>(`/api/machines${suffix}`);
    return body;
  }

  /** Page of file records plus the unpaged match count from X-Total-Count. */
  async files(filter: FilterState, limit = 100, offset = 0): Promise<FilePage> {
    const query = toQuery(filter);
    query.delete("stale_only"); // a machines-view dimension, not a file column
    query.set("limit", String(limit));
    query.set("offset", String(offset));
    const { body, headers } = await this.request<FileRecord[]>(`/api/files?${query}`);
    const total = Number(headers.get("X-Total-Count") ?? body.length);
    return { rows: body, total };
  }

  async history(mac: string, path: string): Promise<FileRecord[]> {
    const query = new URLSearchParams({ mac, path });
    const { body } = await this.request<FileRecord[]>(`/api/files/history?${query}`);
    return body;
  }

  async summary(): Promise<Summary> {
    const { body } = await this.request<Summary>("/api/summary");
    return body;
  }

  async remind(username: string, mac: string, note = ""): Promise<Reminder> {
    const { body } = await this.request<Reminder>("/api/reminders", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ username, mac, note }),
    });
    return body;
  }

  async reminders(): Promise<Reminder[]> {
    const { body } = await this.request<Reminder[]>("/api/reminders");
    return body;
  }
}
