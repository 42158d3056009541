/** Client-side source of truth for the query being posed. */

import type { GraphDoc, InferRequest, Method } from "./api.js";
import { METHODS } from "./api.js";

export type Tri = "unset" | "true" | "false";

const CYCLE: Tri[] = ["unset", "true", "false"];

// matches the service default cap on sample count
export const MAX_M = 1_000_000;

/**
 * Tri-state evidence per node plus the sampling knobs.  Every mutation is
 * sanitised so the state always serialises to a request the service will
 * accept; the controller can fire at any moment without re-validating.
 *
 * Mutations bump `version`, which the controller stamps onto outgoing
 * requests to recognise stale replies.
 */
export class EvidenceStore {
  private tri: Tri[];
  private methodValue: Method = "um";
  private betaValue = 0;
  private mValue = 1000;
  private seedValue = 0;
  private versionCounter = 0;
  private listeners: Array<() => void> = [];

  constructor(readonly graph: GraphDoc) {
    this.tri = graph.nodes.map(() => "unset");
  }

  get version(): number {
    return this.versionCounter;
  }

  get method(): Method {
    return this.methodValue;
  }

  get beta(): number {
    return this.betaValue;
  }

  get m(): number {
    return this.mValue;
  }

  get seed(): number {
    return this.seedValue;
  }

  state(id: number): Tri {
    return this.tri[id] ?? "unset";
  }

  /** Count of nodes with evidence set. */
  evidenceSize(): number {
    return this.tri.filter((t) => t !== "unset").length;
  }

  /** unset -> true -> false -> unset */
  cycle(id: number): void {
    if (id < 0 || id >= this.tri.length) return;
    const next = CYCLE[(CYCLE.indexOf(this.tri[id]) + 1) % CYCLE.length];
    this.tri[id] = next;
    this.touch();
  }

  set(id: number, value: Tri): void {
    if (id < 0 || id >= this.tri.length) return;
    if (this.tri[id] === value) return;
    this.tri[id] = value;
    this.touch();
  }

  clearAll(): void {
    if (this.tri.every((t) => t === "unset")) return;
    this.tri = this.tri.map(() => "unset");
    this.touch();
  }

  setMethod(method: string): void {
    if (!(METHODS as string[]).includes(method)) return;
    if (method === this.methodValue) return;
    this.methodValue = method as Method;
    this.touch();
  }

  setBeta(beta: number): void {
    if (!Number.isFinite(beta)) return;
    const clamped = Math.min(1, Math.max(0, beta));
    if (clamped === this.betaValue) return;
    this.betaValue = clamped;
    this.touch();
  }

  setM(m: number): void {
    if (!Number.isFinite(m)) return;
    const clamped = Math.min(MAX_M, Math.max(1, Math.floor(m)));
    if (clamped === this.mValue) return;
    this.mValue = clamped;
    this.touch();
  }

  setSeed(seed: number): void {
    if (!Number.isFinite(seed)) return;
    const truncated = Math.trunc(seed);
    if (truncated === this.seedValue) return;
    this.seedValue = truncated;
    this.touch();
  }

  /** The one request body this state stands for. */
  toRequest(): InferRequest {
    const evidence: Record<string, boolean> = {};
    this.tri.forEach((t, id) => {
      if (t !== "unset") evidence[String(id)] = t === "true";
    });
    return {
      evidence,
      method: this.methodValue,
      beta: this.betaValue,
      m: this.mValue,
      seed: this.seedValue,
    };
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((fn) => fn !== listener);
    };
  }

  private touch(): void {
    this.versionCounter += 1;
    for (const fn of this.listeners) fn();
  }
}
