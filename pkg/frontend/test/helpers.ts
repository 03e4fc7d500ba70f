import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { FetchLike } from "../src/api.js";

const fixtureDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

/** Load a recorded API payload from test/fixtures/. */
export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(fixtureDir, name), "utf8")) as T;
}

export interface StubResponse {
  status?: number;
  body: unknown;
  headers?: Record<string, string>;
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

/** A fetch stand-in that answers from a handler and records every call. */
export function stubFetch(handler: (url: string, init?: RequestInit) => StubResponse): {
  fetchFn: FetchLike;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = (url, init) => {
    calls.push({ url, init });
    const { status = 200, body, headers = {} } = handler(url, init);
    return Promise.resolve(
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json", ...headers },
      }),
    );
  };
  return { fetchFn, calls };
}
