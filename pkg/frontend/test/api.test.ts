import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";
import type { ErrorBody, FileRecord, Machine, Reminder, Summary } from "../src/types.js";
import { fixture, stubFetch } from "./helpers.js";

const FILES = fixture<FileRecord[]>("files.json");
const HEADERS = fixture<Record<string, Record<string, string>>>("headers.json");

describe("request construction", () => {
  it("prefixes the configured base URL", async () => {
    const { fetchFn, calls } = stubFetch(() => ({ body: [] }));
    await new ApiClient("http://127.0.0.1:9999", fetchFn).machines();
    expect(calls[0]?.url).toBe("http://127.0.0.1:9999/api/machines");
  });

  it("asks for stale machines only when requested", async () => {
    const { fetchFn, calls } = stubFetch(() => ({ body: [] }));
    const api = new ApiClient("", fetchFn);
    await api.machines();
    await api.machines(true);
    await api.machines(false);
    expect(calls.map((c) => c.url)).toEqual([
      "/api/machines",
      "/api/machines?stale=true",
      "/api/machines?stale=false",
    ]);
  });

  it("maps every filter dimension except stale_only onto /api/files", async () => {
    const { fetchFn, calls } = stubFetch(() => ({ body: [] }));
    await new ApiClient("", fetchFn).files(
      {
        format: "DICOM",
        mac: "aabbccddeeff",
        status: "OLD",
        scanned_after: "2026-04-01T08:00:00Z",
        scanned_before: "2026-05-01",
        version: 2,
        stale_only: true,
      },
      25,
      50,
    );
    const url = new URL(calls[0]?.url ?? "", "http://x");
    expect(url.pathname).toBe("/api/files");
    expect(Object.fromEntries(url.searchParams)).toEqual({
      format: "DICOM",
      mac: "aabbccddeeff",
      status: "OLD",
      scanned_after: "2026-04-01T08:00:00Z",
      scanned_before: "2026-05-01",
      version: "2",
      limit: "25",
      offset: "50",
    });
  });

  it("builds the history query from mac and path", async () => {
    const { fetchFn, calls } = stubFetch(() => ({ body: [] }));
    await new ApiClient("", fetchFn).history("aabbccddeeff", "/data/a b!c.dcm");
    const url = new URL(calls[0]?.url ?? "", "http://x");
    expect(url.pathname).toBe("/api/files/history");
    expect(url.searchParams.get("mac")).toBe("aabbccddeeff");
    expect(url.searchParams.get("path")).toBe("/data/a b!c.dcm");
  });

  it("posts reminders as JSON", async () => {
    const reminder = fixture<Reminder>("reminder.json");
    const { fetchFn, calls } = stubFetch(() => ({ status: 201, body: reminder }));
    const created = await new ApiClient("", fetchFn).remind("alice", "aabbccddeeff", "rescan");
    expect(created).toEqual(reminder);
    expect(calls[0]?.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      username: "alice",
      mac: "aabbccddeeff",
      note: "rescan",
    });
  });
});

describe("responses from recorded payloads", () => {
  it("returns machine rows as recorded", async () => {
    const machines = fixture<Machine[]>("machines.json");
    const { fetchFn } = stubFetch(() => ({ body: machines }));
    expect(await new ApiClient("", fetchFn).machines()).toEqual(machines);
  });

  it("pairs file rows with the X-Total-Count header", async () => {
    const { fetchFn } = stubFetch(() => ({
      body: FILES,
      headers: HEADERS["files.json"],
    }));
    const page = await new ApiClient("", fetchFn).files({});
    expect(page.rows).toEqual(FILES);
    expect(page.total).toBe(6);
  });

  it("falls back to the row count when the total header is missing", async () => {
    const { fetchFn } = stubFetch(() => ({ body: FILES.slice(0, 2) }));
    const page = await new ApiClient("", fetchFn).files({});
    expect(page.total).toBe(2);
  });

  it("returns the summary as recorded", async () => {
    const summary = fixture<Summary>("summary.json");
    const { fetchFn } = stubFetch(() => ({ body: summary }));
    expect(await new ApiClient("", fetchFn).summary()).toEqual(summary);
  });
});

describe("error handling", () => {
  it("raises ApiError carrying the recorded field-level detail", async () => {
    const body = fixture<ErrorBody>("error_bad_format.json");
    const { fetchFn } = stubFetch(() => ({ status: 400, body }));
    const failure = await new ApiClient("", fetchFn)
      .files({ format: "BMP" })
      .then(() => null, (e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    const apiError = failure as ApiError;
    expect(apiError.status).toBe(400);
    expect(apiError.field).toBe("format");
    expect(apiError.message).toBe(body.detail);
  });

  it("keeps the HTTP status line when the error body is not JSON", async () => {
    const fetchFn = () =>
      Promise.resolve(new Response("<html>boom</html>", { status: 502 }));
    const failure = await new ApiClient("", fetchFn)
      .summary()
      .then(() => null, (e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(502);
    expect((failure as ApiError).message).toBe("HTTP 502");
    expect((failure as ApiError).field).toBeUndefined();
  });

  it("propagates network failures untouched for the outage banner", async () => {
    const fetchFn = () => Promise.reject(new TypeError("fetch failed"));
    await expect(new ApiClient("", fetchFn).summary()).rejects.toThrow(TypeError);
  });
});
