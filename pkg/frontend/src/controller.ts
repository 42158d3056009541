/** Debounced inference loop between the evidence store and the service. */

import { ApiClient, ApiError } from "./api.js";
import type { InferRequest, InferResult } from "./api.js";
import type { EvidenceStore } from "./store.js";

export const DEBOUNCE_MS = 250;

/** Injected clock so tests can drive the debounce deterministically. */
export interface TimerHost {
  set(fn: () => void, ms: number): number;
  clear(id: number): void;
}

export interface SavedPoint {
  label: string;
  evidence: Record<string, boolean>;
  projection: [number, number];
}

export interface CompareRow {
  id: number;
  name: string;
  baseline: number;
  current: number;
  delta: number;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.detail}`;
  return String(err);
}

/**
 * Fires at most one request at a time.  Store edits during the debounce
 * window collapse into a single request; edits during flight mark the
 * controller dirty and trigger one follow-up.  Each request is stamped
 * with the store version at issue time, and a reply whose stamp no longer
 * matches the store is dropped unseen, so the display only ever shows
 * numbers for the evidence it claims to show.
 */
export class InferController {
  result: InferResult | null = null;
  /** Request the current result answers; null until the first reply lands. */
  applied: InferRequest | null = null;
  error: string | null = null;
  pending = false;
  baseline: { request: InferRequest; result: InferResult } | null = null;
  saved: SavedPoint[] = [];
  /** Projection of the current evidence set, when fetched. */
  current: [number, number] | null = null;
  requestsIssued = 0;

  private timer: number | null = null;
  private inFlight = false;
  private dirty = false;

  constructor(
    private store: EvidenceStore,
    private api: ApiClient,
    private timers: TimerHost,
    private onUpdate: () => void = () => {},
  ) {
    store.subscribe(() => this.schedule());
  }

  /** Debounced fire; every store edit lands here. */
  schedule(): void {
    if (this.timer !== null) this.timers.clear(this.timer);
    this.pending = true;
    this.timer = this.timers.set(() => {
      this.timer = null;
      void this.fire();
    }, DEBOUNCE_MS);
    this.onUpdate();
  }

  /** Fire now, cancelling any pending debounce.  Used for the initial load. */
  flush(): void {
    if (this.timer !== null) {
      this.timers.clear(this.timer);
      this.timer = null;
    }
    void this.fire();
  }

  /** Explicit sampling pass over the current evidence. */
  refine(): void {
    this.store.setMethod("um-seq");
    this.flush();
  }

  pinBaseline(): void {
    if (this.result === null || this.applied === null) return;
    this.baseline = { request: this.applied, result: this.result };
    this.onUpdate();
  }

  clearBaseline(): void {
    this.baseline = null;
    this.onUpdate();
  }

  /** Marginal deltas against the pinned baseline, biggest movers first. */
  compare(): CompareRow[] {
    if (this.baseline === null || this.result === null) return [];
    const rows = this.store.graph.nodes.map((nd) => {
      const base = this.baseline!.result.marginals[nd.id];
      const cur = this.result!.marginals[nd.id];
      return { id: nd.id, name: nd.name, baseline: base, current: cur, delta: cur - base };
    });
    rows.sort((a, b) => Math.abs(b.delta) - Math.abs(a.delta));
    return rows;
  }

  /** Project the current evidence and keep it as a named scatter point. */
  async saveCurrent(label?: string): Promise<void> {
    const evidence = this.store.toRequest().evidence;
    try {
      const res = await this.api.embed(evidence);
      this.saved.push({
        label: label ?? `set ${this.saved.length + 1}`,
        evidence,
        projection: res.projection,
      });
      this.current = res.projection;
    } catch (err) {
      this.error = describe(err);
    }
    this.onUpdate();
  }

  /** Refresh the highlighted projection without saving a point. */
  async locateCurrent(): Promise<void> {
    const evidence = this.store.toRequest().evidence;
    try {
      const res = await this.api.embed(evidence);
      this.current = res.projection;
    } catch (err) {
      this.error = describe(err);
    }
    this.onUpdate();
  }

  private async fire(): Promise<void> {
    if (this.inFlight) {
      this.dirty = true;
      return;
    }
    this.inFlight = true;
    this.pending = false;
    const stamp = this.store.version;
    const request = this.store.toRequest();
    this.requestsIssued += 1;
    let result: InferResult | null = null;
    let failure: string | null = null;
    try {
      result = await this.api.infer(request);
    } catch (err) {
      failure = describe(err);
    }
    this.inFlight = false;
    if (this.store.version === stamp) {
      if (result !== null) {
        this.result = result;
        this.applied = request;
        this.error = null;
      } else {
        this.error = failure ?? "request failed";
      }
    }
    // superseded replies are dropped here without touching the display;
    // the edit that superseded them has its own timer or dirty flag
    if (this.dirty) {
      this.dirty = false;
      void this.fire();
    }
    this.onUpdate();
  }
}
