/** HTML renderers for the dashboard.
 *
 * Every view is a pure string builder over API payloads, so rendering is
 * testable without a browser. All dynamic text passes through esc().
 */

import type { FileRecord, Machine, Summary } from "./types.js";
import { FILE_FORMATS, FILE_STATUSES } from "./types.js";
import type { FilterState } from "./filters.js";

export function esc(text: string): string {
  return text.replace(
    /[&<>"']/g,
    (ch) =>
      ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" })[ch] as string,
  );
}

function fmtTime(iso: string | null): string {
  return iso === null ? "never" : iso.replace("T", " ").replace("Z", " UTC");
}

function fmtFrequency(seconds: number): string {
  if (seconds % 86400 === 0) return `${seconds / 86400}d`;
  if (seconds % 3600 === 0) return `${seconds / 3600}h`;
  if (seconds % 60 === 0) return `${seconds / 60}m`;
  return `${seconds}s`;
}

export interface FieldError {
  field: string;
  detail: string;
}

/** Summary counters; when the API is unreachable the last-known numbers stay
 * up, marked as a stale view with the time they were fetched. */
export function renderSummaryHeader(
  summary: Summary | null,
  fetchedAt: string | null,
  unreachable: boolean,
): string {
  if (summary === null) {
    return `<div class="summary" id="summary">loading…</div>`;
  }
  const staleBadge =
    unreachable && fetchedAt !== null
      ? `<span class="badge badge-stale" data-role="stale-view">stale view — as of ${esc(fetchedAt)}</span>`
      : "";
  const cells = [
    ["machines", summary.machines],
    ["stale machines", summary.stale_machines],
    ["current files", summary.files_latest],
    ["deleted files", summary.files_deleted],
  ]
    .map(
      ([label, value]) =>
        `<div class="summary-cell"><span class="summary-value">${value}</span>` +
        `<span class="summary-label">${label}</span></div>`,
    )
    .join("");
  return (
    `<div class="summary" id="summary">${cells}` +
    `<div class="summary-cell"><span class="summary-value">${esc(fmtTime(summary.last_scan_time))}</span>` +
    `<span class="summary-label">last scan</span></div>${staleBadge}</div>`
  );
}

/** Non-blocking banner shown while the API cannot be reached. */
export function renderBanner(unreachable: boolean): string {
  if (!unreachable) return "";
  return (
    `<div class="banner" role="alert" data-role="api-down">` +
    `API unreachable — showing the last data received. Retrying…</div>`
  );
}

/** Filter controls. One input per query dimension, named after it, so the
 * form state and the URL state are the same seven fields. */
export function renderFilterForm(state: FilterState, fieldError: FieldError | null): string {
  const err = (field: string): string =>
    fieldError !== null && fieldError.field === field
      ? `<span class="field-error" data-role="field-error">${esc(fieldError.detail)}</span>`
      : "";
  const option = (value: string, selected: string | undefined): string =>
    `<option value="${value}"${value === (selected ?? "") ? " selected" : ""}>${value || "any"}</option>`;
  const formatOptions = ["", ...FILE_FORMATS].map((f) => option(f, state.format)).join("");
  const statusOptions = ["", ...FILE_STATUSES].map((s) => option(s, state.status)).join("");
  return `
<form class="filters" id="filter-form">
  <label>format
    <select name="format" data-filter-field="format">${formatOptions}</select>${err("format")}
  </label>
  <label>machine
    <input name="mac" data-filter-field="mac" value="${esc(state.mac ?? "")}"
           placeholder="aabbccddeeff" />${err("mac")}
  </label>
  <label>status
    <select name="status" data-filter-field="status">${statusOptions}</select>${err("status")}
  </label>
  <label>scanned after
    <input name="scanned_after" data-filter-field="scanned_after"
           value="${esc(state.scanned_after ?? "")}" placeholder="2026-01-31" />${err("scanned_after")}
  </label>
  <label>scanned before
    <input name="scanned_before" data-filter-field="scanned_before"
           value="${esc(state.scanned_before ?? "")}" placeholder="2026-01-31" />${err("scanned_before")}
  </label>
  <label>version
    <input name="version" data-filter-field="version" type="number" min="1"
           value="${state.version ?? ""}" />${err("version")}
  </label>
  <label class="checkbox">stale machines only
    <input name="stale_only" data-filter-field="stale_only" type="checkbox"
           ${state.stale_only === true ? "checked" : ""} />
  </label>
  <button type="submit">apply</button>
  <button type="button" data-action="clear-filters">clear</button>
</form>`;
}

export function renderMachines(machines: Machine[]): string {
  if (machines.length === 0) {
    return `<p class="empty" data-role="empty">No machines match this filter.</p>`;
  }
  const rows = machines
    .map((m) => {
      const staleBadge = m.stale ? `<span class="badge badge-stale">stale</span>` : "";
      return (
        `<tr class="${m.stale ? "stale" : "fresh"}" data-mac="${esc(m.mac)}">` +
        `<td>${esc(m.username)}</td>` +
        `<td class="mono">${esc(m.mac)}</td>` +
        `<td>${m.paths.map(esc).join("<br>")}</td>` +
        `<td>${m.formats.map(esc).join(", ")}</td>` +
        `<td>${fmtFrequency(m.scan_frequency)}</td>` +
        `<td>${esc(fmtTime(m.last_scanned))} ${staleBadge}</td>` +
        `<td><button data-action="remind" data-user="${esc(m.username)}" ` +
        `data-mac="${esc(m.mac)}">remind</button></td></tr>`
      );
    })
    .join("");
  return `
<table class="machines" id="machines">
  <thead><tr><th>user</th><th>machine</th><th>paths</th><th>formats</th>
  <th>every</th><th>last scanned</th><th></th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

export function renderFiles(rows: FileRecord[], total: number, offset: number, limit: number): string {
  if (rows.length === 0) {
    return `<p class="empty" data-role="empty">No files match this filter.</p>`;
  }
  const body = rows
    .map(
      (r) =>
        `<tr class="status-${r.status.toLowerCase()}" data-action="history" ` +
        `data-mac="${esc(r.mac)}" data-path="${esc(r.filepath)}">` +
        `<td class="mono path">${esc(r.filepath)}</td>` +
        `<td>${esc(r.format)}</td>` +
        `<td class="mono">${esc(r.mac)}</td>` +
        `<td>v${r.version}</td>` +
        `<td><span class="badge badge-${r.status.toLowerCase()}">${r.status}</span></td>` +
        `<td class="mono hash" title="${esc(r.file_hash)}">${esc(r.file_hash.slice(0, 12))}…</td>` +
        `<td>${esc(fmtTime(r.last_scanned))}</td></tr>`,
    )
    .join("");
  const shownTo = offset + rows.length;
  const pager =
    `<div class="pager">showing ${offset + 1}–${shownTo} of ${total}` +
    (offset > 0
      ? ` <button data-action="page" data-offset="${Math.max(0, offset - limit)}">prev</button>`
      : "") +
    (shownTo < total
      ? ` <button data-action="page" data-offset="${offset + limit}">next</button>`
      : "") +
    `</div>`;
  return `
<table class="files" id="files">
  <thead><tr><th>path</th><th>format</th><th>machine</th><th>version</th>
  <th>status</th><th>content hash</th><th>last scanned</th></tr></thead>
  <tbody>${body}</tbody>
</table>${pager}`;
}

/** Version timeline for one path on one machine, oldest first. */
export function renderHistory(mac: string, path: string, rows: FileRecord[]): string {
  const items = rows
    .map(
      (r) =>
        `<li class="status-${r.status.toLowerCase()}">` +
        `<span class="badge badge-${r.status.toLowerCase()}">${r.status}</span> ` +
        `v${r.version} — modified ${esc(fmtTime(r.last_modified))}, ` +
        `seen ${esc(fmtTime(r.last_scanned))} ` +
        `<span class="mono hash" title="${esc(r.file_hash)}">${esc(r.file_hash.slice(0, 12))}…</span></li>`,
    )
    .join("");
  return `
<div class="history" id="history">
  <h3>history of <span class="mono">${esc(path)}</span> on <span class="mono">${esc(mac)}</span>
  <button data-action="close-history">close</button></h3>
  <ol>${items || "<li>no recorded versions</li>"}</ol>
</div>`;
}

export function renderToast(kind: "ok" | "error", message: string): string {
  return `<div class="toast toast-${kind}" data-role="toast">${esc(message)}</div>`;
}
