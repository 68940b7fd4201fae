// Typed client for the castorette HTTP API. The dashboard owns no
// business logic; everything here is a thin, faithful mapping of the
// server's endpoints and payloads.

export interface EntityRow {
  id: number;
  name: string;
  type_id: number;
  geo: [number, number] | null;
}

export interface SignalRow {
  id: number;
  name: string;
  type_id: number;
  unit: string;
}

export type NodeKind = "entity" | "signal" | "series" | "model";

export interface GraphNode {
  id: string;
  kind: NodeKind;
  label: string;
  geo?: { lat: number; lon: number };
}

export interface GraphEdge {
  from: string;
  to: string;
  kind: string;
}

export interface ContextGraph {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface SeriesPoint {
  ts: number;
  time: string;
  value: number;
  producer?: string;
}

export interface ForecastRow {
  ts: number;
  time: string;
  observed: number | null;
  forecast: number | null;
  lower: number | null;
  upper: number | null;
  producer: string | null;
}

export interface Accuracy {
  n: number;
  rmse: number | null;
  mae: number | null;
}

export interface VersionRow {
  id: number;
  trained_at: number | string;
  created_at: number | string;
  metrics: Record<string, number>;
  active: boolean;
}

export interface HierarchyModel {
  id: number;
  name: string;
  target: { entity: string; signal: string };
  train_schedule: Record<string, unknown>;
  versions: VersionRow[];
}

export interface TaskRow {
  kind: string;
  subject: number;
  model_id: number;
  due: string;
}

export interface QueueSnapshot {
  train: { now: TaskRow[]; later: TaskRow[] };
  score: { now: TaskRow[]; later: TaskRow[] };
}

export interface JobRecord {
  topic: string;
  job: TaskRow;
  status: "completed" | "failed";
  produced: Record<string, unknown> | null;
  duration: number;
  error: string | null;
  error_log: string | null;
}

export interface SeriesWindow {
  entity: string;
  signal: string;
  from: number | string;
  to: number | string;
  model?: number;
  version?: number | "latest" | "all";
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public type: string,
    message: string,
    public diagnostics?: { step: string; message: string }[],
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function windowQuery(w: SeriesWindow): URLSearchParams {
  const q = new URLSearchParams({
    entity: w.entity,
    signal: w.signal,
    from: String(w.from),
    to: String(w.to),
  });
  if (w.model !== undefined) q.set("model", String(w.model));
  if (w.version !== undefined) q.set("version", String(w.version));
  return q;
}

export class ApiClient {
  constructor(
    private base = "/api",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const res = await this.fetchFn(this.base + path, init);
    const doc = await res.json();
    if (!res.ok) {
      const err = doc?.error ?? {};
      throw new ApiError(
        res.status,
        err.type ?? "InternalError",
        err.message ?? `HTTP ${res.status}`,
        err.diagnostics,
      );
    }
    return doc as T;
  }

  health(): Promise<{ status: string; time: string }> {
    return this.call("GET", "/health");
  }

  contextGraph(): Promise<ContextGraph> {
    return this.call("GET", "/context/graph");
  }

  entities(): Promise<EntityRow[]> {
    return this.call<{ entities: EntityRow[] }>("GET", "/context/entities")
      .then((d) => d.entities);
  }

  signals(): Promise<SignalRow[]> {
    return this.call<{ signals: SignalRow[] }>("GET", "/context/signals")
      .then((d) => d.signals);
  }

  series(w: SeriesWindow, kind = "OBSERVED"): Promise<SeriesPoint[]> {
    const q = windowQuery(w);
    q.set("kind", kind);
    return this.call<{ points: SeriesPoint[] }>("GET", `/timeseries?${q}`)
      .then((d) => d.points);
  }

  forecast(w: SeriesWindow): Promise<ForecastRow[]> {
    return this.call<{ rows: ForecastRow[] }>("GET", `/timeseries/forecast?${windowQuery(w)}`)
      .then((d) => d.rows);
  }

  accuracy(w: SeriesWindow): Promise<Accuracy> {
    return this.call("GET", `/timeseries/accuracy?${windowQuery(w)}`);
  }

  hierarchy(entity?: string, signal?: string): Promise<HierarchyModel[]> {
    const q = new URLSearchParams();
    if (entity) q.set("entity", entity);
    if (signal) q.set("signal", signal);
    const suffix = q.size ? `?${q}` : "";
    return this.call<{ models: HierarchyModel[] }>("GET", `/models/hierarchy${suffix}`)
      .then((d) => d.models);
  }

  activateVersion(modelId: number, versionId: number): Promise<{ model_id: number; active_version: number }> {
    return this.call("POST", `/models/${modelId}/activate-version`, { version: versionId });
  }

  runNow(modelId: number, task: "train" | "score", version?: number): Promise<{ task: TaskRow }> {
    const body: Record<string, unknown> = { task };
    if (version !== undefined) body.version = version;
    return this.call("POST", `/models/${modelId}/run`, body);
  }

  queues(): Promise<QueueSnapshot> {
    return this.call("GET", "/scheduler/queues");
  }

  schedulerPoll(): Promise<{ dispatched: TaskRow[] }> {
    return this.call("POST", "/scheduler/poll", {});
  }

  recentJobs(): Promise<JobRecord[]> {
    return this.call<{ jobs: JobRecord[] }>("GET", "/jobs/recent")
      .then((d) => d.jobs);
  }
}
