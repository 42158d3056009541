/** Wire types and a thin client for the inference service.
 *
 * Field names mirror the HTTP API exactly; nothing here invents or
 * reshapes numbers, it only moves JSON in and out.
 */

export interface GraphNode {
  id: number;
  name: string;
  parents: number[];
  depth_type: number;
}

export interface GraphDoc {
  name: string;
  nodes: GraphNode[];
}

export type Method = "prior" | "um" | "um-naive" | "um-seq";

export const METHODS: Method[] = ["prior", "um", "um-naive", "um-seq"];

export interface InferRequest {
  evidence: Record<string, boolean>;
  method: Method;
  beta: number;
  m: number;
  seed: number;
}

export interface InferResult {
  method: string;
  beta: number | null;
  m: number;
  ess: number | null;
  marginals: number[];
  seed: number | null;
  floor: number | null;
}

export interface EmbedResult {
  embedding: number[];
  projection: [number, number];
}

export interface HealthDoc {
  status: string;
  version: string;
  net_digest: string;
  ckpt_digest: string;
  n_nodes: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx reply, carrying the status and the server's detail message. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function readDetail(res: Response): Promise<string> {
  try {
    const doc = await res.json();
    if (doc && typeof doc.detail === "string") return doc.detail;
    // 422 validation replies carry a structured detail list
    if (doc && doc.detail !== undefined) return JSON.stringify(doc.detail);
    return JSON.stringify(doc);
  } catch {
    return res.statusText || "request failed";
  }
}

export class ApiClient {
  constructor(private fetcher: FetchLike, private base = "") {}

  graph(): Promise<GraphDoc> {
    return this.get("/api/graph");
  }

  health(): Promise<HealthDoc> {
    return this.get("/api/health");
  }

  infer(req: InferRequest): Promise<InferResult> {
    return this.post("/api/infer", req);
  }

  embed(evidence: Record<string, boolean>): Promise<EmbedResult> {
    return this.post("/api/embed", { evidence });
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetcher(this.base + path);
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetcher(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as T;
  }
}
