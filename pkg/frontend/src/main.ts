/** Entry point: read runtime configuration and boot the dashboard.
 *
 * The API base defaults to same-origin (the scanner's serve command mounts
 * this bundle next to /api). Both it and the poll interval can be overridden
 * at build time via the meta tags in index.html or at runtime via the
 * ?api= and ?poll= query parameters.
 */

import { ApiClient } from "./api.js";
import { App, DEFAULT_POLL_MS } from "./app.js";

function meta(name: string): string | null {
  return document.querySelector(`meta[name="${name}"]`)?.getAttribute("content") ?? null;
}

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? meta("phitrack-api-base") ?? "";
const pollSeconds = Number(params.get("poll") ?? meta("phitrack-poll-seconds") ?? "");
const pollIntervalMs =
  Number.isFinite(pollSeconds) && pollSeconds >= 1 ? pollSeconds * 1000 : DEFAULT_POLL_MS;

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
new App(root, new ApiClient(base), { pollIntervalMs }).start();
