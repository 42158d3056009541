/** Deterministic stand-ins for the browser clock and the service. */

import type { FetchLike, GraphDoc, InferResult } from "../src/api.js";
import type { TimerHost } from "../src/controller.js";

interface Scheduled {
  id: number;
  at: number;
  fn: () => void;
}

export class FakeTimers implements TimerHost {
  now = 0;
  private queue: Scheduled[] = [];
  private nextId = 1;

  set(fn: () => void, ms: number): number {
    const id = this.nextId++;
    this.queue.push({ id, at: this.now + ms, fn });
    return id;
  }

  clear(id: number): void {
    this.queue = this.queue.filter((t) => t.id !== id);
  }

  /** Advance the clock, firing due callbacks in order. */
  advance(ms: number): void {
    const target = this.now + ms;
    for (;;) {
      const due = [...this.queue].filter((t) => t.at <= target).sort((a, b) => a.at - b.at)[0];
      if (!due) break;
      this.queue = this.queue.filter((t) => t.id !== due.id);
      this.now = due.at;
      due.fn();
    }
    this.now = target;
  }
}

export interface ParkedCall {
  url: string;
  body: any;
  respond: (status: number, doc: unknown) => void;
}

/** Fetch stub that parks every request until the test answers it. */
export function parkingFetch(): { fetcher: FetchLike; calls: ParkedCall[] } {
  const calls: ParkedCall[] = [];
  const fetcher: FetchLike = (url, init) =>
    new Promise<Response>((resolve) => {
      calls.push({
        url,
        body: init?.body ? JSON.parse(String(init.body)) : null,
        respond: (status, doc) =>
          resolve(
            new Response(JSON.stringify(doc), {
              status,
              headers: { "content-type": "application/json" },
            }),
          ),
      });
    });
  return { fetcher, calls };
}

/** Let parked promise chains run to completion. */
export function tick(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

/** Two-layer graph: ceil(n/2) roots, the rest children of nodes 0 and 1. */
export function makeGraph(n: number): GraphDoc {
  const roots = Math.ceil(n / 2);
  return {
    name: "test-graph",
    nodes: Array.from({ length: n }, (_, id) => ({
      id,
      name: `n${id}`,
      parents: id < roots ? [] : [0, 1],
      depth_type: id < roots ? 1 : 2,
    })),
  };
}

export function umResult(marginals: number[]): InferResult {
  return {
    method: "um",
    beta: null,
    m: 0,
    ess: null,
    marginals,
    seed: null,
    floor: null,
  };
}

/** Small deterministic PRNG for fuzzing op sequences. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
