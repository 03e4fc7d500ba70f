/** Dashboard filter state and its lossless mapping onto URL query strings.
 *
 * Every filter the API accepts appears here and nowhere else, so the URL is
 * the complete description of what the dashboard is showing: reloading or
 * sharing a link reproduces the view exactly.
 */

export interface FilterState {
  format?: string;
  mac?: string;
  status?: string;
  scanned_after?: string;
  scanned_before?: string;
  version?: number;
  stale_only?: boolean;
}

export const STRING_FIELDS = [
  "format",
  "mac",
  "status",
  "scanned_after",
  "scanned_before",
] as const;

export const FILTER_FIELDS = [...STRING_FIELDS, "version", "stale_only"] as const;

export type FilterField = (typeof FILTER_FIELDS)[number];

/** Drop unset dimensions: empty strings, NaN versions, undefineds. */
export function normalize(state: FilterState): FilterState {
  const out: FilterState = {};
  for (const field of STRING_FIELDS) {
    const value = state[field];
    if (value) out[field] = value;
  }
  if (state.version !== undefined && Number.isInteger(state.version) && state.version >= 1) {
    out.version = state.version;
  }
  if (state.stale_only !== undefined) out.stale_only = state.stale_only;
  return out;
}

/** Encode a filter state as query parameters. Unset dimensions are omitted. */
export function toQuery(state: FilterState): URLSearchParams {
  const clean = normalize(state);
  const query = new URLSearchParams();
  for (const field of STRING_FIELDS) {
    const value = clean[field];
    if (value !== undefined) query.set(field, value);
  }
  if (clean.version !== undefined) query.set("version", String(clean.version));
  if (clean.stale_only !== undefined) query.set("stale_only", String(clean.stale_only));
  return query;
}

/** Decode query parameters back into a filter state (inverse of toQuery). */
export function fromQuery(query: URLSearchParams): FilterState {
  const state: FilterState = {};
  for (const field of STRING_FIELDS) {
    const value = query.get(field);
    if (value) state[field] = value;
  }
  const version = query.get("version");
  if (version !== null) {
    const parsed = Number(version);
    if (Number.isInteger(parsed) && parsed >= 1) state.version = parsed;
  }
  const staleOnly = query.get("stale_only");
  if (staleOnly === "true") state.stale_only = true;
  else if (staleOnly === "false") state.stale_only = false;
  return state;
}

export function isEmpty(state: FilterState): boolean {
  return Object.keys(normalize(state)).length === 0;
}

export function equal(a: FilterState, b: FilterState): boolean {
  return toQuery(a).toString() === toQuery(b).toString();
}
