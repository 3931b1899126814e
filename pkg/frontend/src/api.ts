/** Thin typed client over the HTTP API. The dashboard holds no business
 * logic: everything it shows comes from these calls, and every legality
 * check it makes client-side is re-enforced by the server. */

import type {
  Alert,
  NdviGrid,
  Sensor,
  SeriesPoint,
  SnapshotMeta,
  Task,
  WeatherStation,
  ZoneFeature,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async call<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(body.code ?? "error", body.message ?? response.statusText, response.status);
    }
    return body as T;
  }

  health() {
    return this.call<{ status: string; tick: number; demo_mode: boolean }>("/api/health");
  }

  async sensors(): Promise<Sensor[]> {
    return (await this.call<{ sensors: Sensor[] }>("/api/sensors")).sensors;
  }

  async zones(): Promise<ZoneFeature[]> {
    return (await this.call<{ zones: ZoneFeature[] }>("/api/zones")).zones;
  }

  async series(
    deviceId: number,
    kind: string,
    channel: string,
    opts: { agg?: string; bucketMinutes?: number; days?: number } = {},
  ): Promise<SeriesPoint[]> {
    const params = new URLSearchParams({
      device_id: String(deviceId),
      kind,
      channel,
    });
    if (opts.agg) params.set("agg", opts.agg);
    if (opts.bucketMinutes) params.set("bucket_minutes", String(opts.bucketMinutes));
    if (opts.days) params.set("days", String(opts.days));
    return (await this.call<{ points: SeriesPoint[] }>(`/api/series?${params}`)).points;
  }

  async alerts(): Promise<Alert[]> {
    return (await this.call<{ alerts: Alert[] }>("/api/alerts")).alerts;
  }

  ackAlert(alertId: string) {
    return this.call<{ alert: Alert }>(`/api/alerts/${alertId}/ack`, { method: "POST" });
  }

  async tasks(): Promise<Task[]> {
    return (await this.call<{ tasks: Task[] }>("/api/tasks")).tasks;
  }

  async transitionTask(taskId: string, event: string, operator?: string): Promise<Task> {
    const body = operator ? { event, operator } : { event };
    const result = await this.call<{ task: Task }>(`/api/tasks/${taskId}/transition`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return result.task;
  }

  async snapshots(): Promise<SnapshotMeta[]> {
    return (await this.call<{ snapshots: SnapshotMeta[] }>("/api/ndvi/snapshots")).snapshots;
  }

  ndviGrid(snapshotId: string) {
    return this.call<NdviGrid>(`/api/ndvi/snapshots/${snapshotId}`);
  }

  async weatherLatest(): Promise<WeatherStation[]> {
    return (await this.call<{ stations: WeatherStation[] }>("/api/weather/latest")).stations;
  }

  advance(ticks: number) {
    return this.call<{ tick: number }>("/api/sim/advance", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ticks }),
    });
  }
}

/** Subscribe to the line-delimited event stream; returns a stop function. */
export function subscribeEvents(
  base: string,
  onEvent: (event: Record<string, unknown>) => void,
  onError?: () => void,
): () => void {
  const source = new EventSource(`${base}/api/events`);
  source.onmessage = (msg) => {
    try {
      onEvent(JSON.parse(msg.data));
    } catch {
      // malformed event payloads are dropped, never rendered
    }
  };
  if (onError) source.onerror = onError;
  return () => source.close();
}
