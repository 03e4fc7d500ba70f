/** Dashboard controller: owns the filter state, keeps it mirrored in the URL,
 * polls the API, and re-renders the pure views into the page. */

import { ApiClient, ApiError } from "./api.js";
import { type FilterState, fromQuery, toQuery, equal, normalize } from "./filters.js";
import type { FileRecord, Machine, Summary } from "./types.js";
import {
  type FieldError,
  renderBanner,
  renderFiles,
  renderFilterForm,
  renderHistory,
  renderMachines,
  renderSummaryHeader,
  renderToast,
} from "./views.js";

export const DEFAULT_POLL_MS = 30_000;
const PAGE_SIZE = 100;

export interface AppOptions {
  pollIntervalMs?: number;
}

interface HistoryTarget {
  mac: string;
  path: string;
}

export class App {
  private filter: FilterState = {};
  private offset = 0;
  private summary: Summary | null = null;
  private summaryFetchedAt: string | null = null;
  private machines: Machine[] = [];
  private fileRows: FileRecord[] = [];
  private fileTotal = 0;
  private historyTarget: HistoryTarget | null = null;
  private historyRows: FileRecord[] = [];
  private unreachable = false;
  private fieldError: FieldError | null = null;
  private inFlight = new Set<string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly options: AppOptions = {},
  ) {}

  start(): void {
    this.filter = fromQuery(new URLSearchParams(window.location.search));
    this.root.innerHTML = this.shell();
    this.wireEvents();
    void this.refresh();
    const interval = this.options.pollIntervalMs ?? DEFAULT_POLL_MS;
    window.setInterval(() => void this.refresh(), interval);
  }

  private shell(): string {
    return `
<header id="slot-banner"></header>
<div id="slot-summary"></div>
<div id="slot-filters"></div>
<section><h2>machines</h2><div id="slot-machines">loading…</div></section>
<section><h2>files</h2><div id="slot-files">loading…</div></section>
<div id="slot-history"></div>
<div id="slot-toast"></div>`;
  }

  private slot(name: string): HTMLElement {
    return this.root.querySelector(`#slot-${name}`) as HTMLElement;
  }

  /** Fetch all three views; each failure flips the unreachable banner but
   * leaves the previously rendered data in place. */
  private async refresh(): Promise<void> {
    await Promise.all([this.loadSummary(), this.loadMachines(), this.loadFiles()]);
  }

  /** Run one keyed request, skipping it if the previous poll is still going. */
  private async guarded(key: string, work: () => Promise<void>): Promise<void> {
    if (this.inFlight.has(key)) return;
    this.inFlight.add(key);
    try {
      await work();
      this.unreachable = false;
    } catch (error) {
      if (error instanceof ApiError) {
        // The server answered: not an outage, surface it per-request instead.
        this.handleApiError(error);
      } else {
        this.unreachable = true;
      }
    } finally {
      this.inFlight.delete(key);
      this.renderChrome();
    }
  }

  private handleApiError(error: ApiError): void {
    if (error.field !== undefined) {
      this.fieldError = { field: error.field, detail: error.message };
      this.renderFilters();
    } else {
      this.toast("error", error.message);
    }
  }

  private async loadSummary(): Promise<void> {
    await this.guarded("summary", async () => {
      this.summary = await this.api.summary();
      this.summaryFetchedAt = new Date().toISOString().replace(/\.\d+Z$/, "Z");
    });
  }

  private async loadMachines(): Promise<void> {
    await this.guarded("machines", async () => {
      this.machines = await this.api.machines(this.filter.stale_only ? true : undefined);
      this.slot("machines").innerHTML = renderMachines(this.machines);
    });
  }

  private async loadFiles(): Promise<void> {
    await this.guarded("files", async () => {
      const page = await this.api.files(this.filter, PAGE_SIZE, this.offset);
      this.fileRows = page.rows;
      this.fileTotal = page.total;
      this.fieldError = null;
      this.slot("files").innerHTML = renderFiles(page.rows, page.total, this.offset, PAGE_SIZE);
      this.renderFilters();
    });
  }

  private async loadHistory(target: HistoryTarget): Promise<void> {
    await this.guarded("history", async () => {
      this.historyRows = await this.api.history(target.mac, target.path);
      this.historyTarget = target;
      this.slot("history").innerHTML = renderHistory(target.mac, target.path, this.historyRows);
    });
  }

  private renderChrome(): void {
    this.slot("banner").innerHTML = renderBanner(this.unreachable);
    this.slot("summary").innerHTML = renderSummaryHeader(
      this.summary,
      this.summaryFetchedAt,
      this.unreachable,
    );
  }

  private renderFilters(): void {
    this.slot("filters").innerHTML = renderFilterForm(this.filter, this.fieldError);
  }

  private toast(kind: "ok" | "error", message: string): void {
    const slot = this.slot("toast");
    slot.innerHTML = renderToast(kind, message);
    window.setTimeout(() => {
      slot.innerHTML = "";
    }, 4000);
  }

  /** Push the current filter into the address bar so the view is shareable. */
  private syncUrl(): void {
    const query = toQuery(this.filter);
    if (this.offset > 0) query.set("offset", String(this.offset));
    const suffix = query.toString();
    window.history.replaceState(null, "", suffix ? `?${suffix}` : window.location.pathname);
  }

  private applyFilter(next: FilterState): void {
    const clean = normalize(next);
    if (!equal(clean, this.filter)) this.offset = 0;
    this.filter = clean;
    this.fieldError = null;
    this.syncUrl();
    void this.refresh();
  }

  private readFilterForm(form: HTMLFormElement): FilterState {
    const data = new FormData(form);
    const text = (name: string): string | undefined => {
      const value = data.get(name);
      return typeof value === "string" && value.trim() !== "" ? value.trim() : undefined;
    };
    const version = text("version");
    return {
      format: text("format"),
      mac: text("mac"),
      status: text("status"),
      scanned_after: text("scanned_after"),
      scanned_before: text("scanned_before"),
      version: version === undefined ? undefined : Number(version),
      stale_only: data.get("stale_only") === "on" ? true : undefined,
    };
  }

  private wireEvents(): void {
    this.root.addEventListener("submit", (event) => {
      const form = event.target as HTMLElement;
      if (form.id !== "filter-form") return;
      event.preventDefault();
      this.applyFilter(this.readFilterForm(form as HTMLFormElement));
    });

    this.root.addEventListener("click", (event) => {
      const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
      if (target === null) return;
      const action = target.dataset["action"];
      if (action === "remind") {
        event.stopPropagation();
        void this.sendReminder(target.dataset["user"] ?? "", target.dataset["mac"] ?? "");
      } else if (action === "history") {
        void this.loadHistory({
          mac: target.dataset["mac"] ?? "",
          path: target.dataset["path"] ?? "",
        });
      } else if (action === "close-history") {
        this.historyTarget = null;
        this.slot("history").innerHTML = "";
      } else if (action === "page") {
        this.offset = Number(target.dataset["offset"] ?? "0");
        this.syncUrl();
        void this.loadFiles();
      } else if (action === "clear-filters") {
        this.applyFilter({});
      }
    });
  }

  private async sendReminder(username: string, mac: string): Promise<void> {
    try {
      const reminder = await this.api.remind(username, mac);
      this.toast("ok", `reminder sent to ${reminder.username} (${reminder.mac})`);
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.toast("error", `reminder failed: ${message}`);
    }
  }
}
