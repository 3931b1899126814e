/** Page assembly: map, alert inbox, task board, weather panel, demo controls.
 * Pure API client; on connection failure it shows a banner and disables
 * actions rather than fabricating data. */

import { ApiClient, subscribeEvents } from "./api.js";
import { renderInbox } from "./alerts.js";
import { renderLineChart } from "./charts.js";
import { dragEvent, renderBoard } from "./kanban.js";
import { renderMap } from "./map.js";
import {
  applyTickEvent,
  initialState,
  mergeAlertEvent,
  select,
  setConnected,
  setLayer,
  setRangeDays,
  type MapLayer,
  type ViewState,
} from "./state.js";
import type { Alert, NdviGrid, Sensor, Task, ZoneFeature, StreamEvent } from "./types.js";

interface AppData {
  sensors: Sensor[];
  zones: ZoneFeature[];
  alerts: Alert[];
  tasks: Task[];
  ndvi: NdviGrid | null;
}

export class DashboardApp {
  state: ViewState = initialState();
  data: AppData = { sensors: [], zones: [], alerts: [], tasks: [], ndvi: null };
  private stopEvents: (() => void) | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private base = "",
  ) {}

  notify(message: string): void {
    const box = this.root.querySelector(".notices") as HTMLElement | null;
    if (!box) return;
    const note = document.createElement("div");
    note.className = "notice";
    note.textContent = message;
    box.appendChild(note);
    setTimeout(() => note.remove(), 6000);
  }

  skeleton(): void {
    this.root.innerHTML = `
      <header class="topbar">
        <h1>canopy operations</h1>
        <span class="tick-badge"></span>
        <nav class="layer-switch">
          <button data-layer="sensors">sensors</button>
          <button data-layer="ndvi">vegetation</button>
          <button data-layer="zones">zones</button>
        </nav>
        <span class="demo-controls"></span>
      </header>
      <div class="banner connectivity-banner" hidden>API unreachable — actions disabled</div>
      <div class="notices"></div>
      <main class="grid">
        <section class="panel map-panel"><div class="map-root"></div></section>
        <section class="panel side-panel"><h2>selection</h2><div class="side-root"></div></section>
        <section class="panel alerts-panel"><h2>alerts</h2><div class="inbox-root"></div></section>
        <section class="panel tasks-panel"><h2>tasks</h2><div class="board-root"></div></section>
        <section class="panel weather-panel"><h2>weather</h2>
          <label>history days <input type="number" class="range-days" min="1" max="90" value="7"></label>
          <div class="weather-root"></div>
        </section>
      </main>`;
    this.root.querySelectorAll<HTMLButtonElement>(".layer-switch button").forEach((button) => {
      button.addEventListener("click", () => {
        this.state = setLayer(this.state, button.dataset.layer as MapLayer);
        void this.renderAll();
      });
    });
    const range = this.root.querySelector<HTMLInputElement>(".range-days");
    range?.addEventListener("change", () => {
      this.state = setRangeDays(this.state, Number(range.value));
      range.value = String(this.state.rangeDays);
      void this.renderWeather();
    });
  }

  async start(): Promise<void> {
    this.skeleton();
    try {
      const health = await this.api.health();
      this.state = { ...this.state, demoMode: health.demo_mode, tick: health.tick };
    } catch {
      this.state = setConnected(this.state, false);
      this.renderBanner();
      return;
    }
    await this.refreshData();
    this.renderDemoControls();
    this.stopEvents = subscribeEvents(
      this.base,
      (event) => this.onEvent(event as StreamEvent),
      () => {
        this.state = setConnected(this.state, false);
        this.renderBanner();
      },
    );
    await this.renderAll();
  }

  stop(): void {
    this.stopEvents?.();
  }

  async refreshData(): Promise<void> {
    try {
      const [sensors, zones, alerts, tasks, snapshots] = await Promise.all([
        this.api.sensors(), this.api.zones(), this.api.alerts(), this.api.tasks(),
        this.api.snapshots(),
      ]);
      const latest = snapshots.at(-1);
      this.data = {
        sensors, zones, alerts, tasks,
        ndvi: latest ? await this.api.ndviGrid(latest.snapshot_id) : null,
      };
      this.state = setConnected(this.state, true);
    } catch {
      this.state = setConnected(this.state, false);
    }
    this.renderBanner();
  }

  onEvent(event: StreamEvent): void {
    this.state = applyTickEvent(this.state, event);
    const merged = mergeAlertEvent(this.data.alerts, event);
    const alertsChanged = merged !== this.data.alerts;
    this.data.alerts = merged;
    const badge = this.root.querySelector(".tick-badge");
    if (badge) badge.textContent = `tick ${this.state.tick}`;
    if (alertsChanged) {
      void this.api.tasks().then((tasks) => {
        this.data.tasks = tasks;
        this.renderAlerts();
        this.renderTasks();
      }).catch(() => this.renderAlerts());
    }
    if (event.type === "snapshot") {
      void this.refreshData().then(() => this.renderAll());
    }
  }

  renderBanner(): void {
    const banner = this.root.querySelector<HTMLElement>(".connectivity-banner");
    if (banner) banner.hidden = this.state.connected;
  }

  renderDemoControls(): void {
    const host = this.root.querySelector<HTMLElement>(".demo-controls");
    if (!host || !this.state.demoMode) return;
    const button = document.createElement("button");
    button.className = "advance-button";
    button.textContent = "advance 1 day";
    button.addEventListener("click", async () => {
      try {
        await this.api.advance(48);
        await this.refreshData();
        await this.renderAll();
      } catch (err) {
        this.notify(`advance failed: ${(err as Error).message}`);
      }
    });
    host.appendChild(button);
  }

  async renderAll(): Promise<void> {
    this.renderMapPanel();
    this.renderAlerts();
    this.renderTasks();
    await this.renderWeather();
    await this.renderSidePanel();
  }

  renderMapPanel(): void {
    const host = this.root.querySelector<HTMLElement>(".map-root");
    if (!host) return;
    renderMap(host, {
      sensors: this.data.sensors,
      zones: this.data.zones,
      ndvi: this.data.ndvi,
      layer: this.state.layer,
    }, {
      onSelect: (selection) => {
        this.state = select(this.state, selection);
        void this.renderSidePanel();
      },
    });
  }

  renderAlerts(): void {
    const host = this.root.querySelector<HTMLElement>(".inbox-root");
    if (!host) return;
    renderInbox(host, this.data.alerts, this.data.tasks, this.api, {
      onChanged: () => {
        void this.refreshData().then(() => {
          this.renderAlerts();
          this.renderTasks();
        });
      },
      notify: (m) => this.notify(m),
    }, this.state.connected);
  }

  renderTasks(): void {
    const host = this.root.querySelector<HTMLElement>(".board-root");
    if (!host) return;
    renderBoard(host, this.data.tasks, {
      onDrop: async (taskId, _from, _to, event) => {
        try {
          const operator = event === "assign" ? "operator" : undefined;
          await this.api.transitionTask(taskId, event, operator);
          this.data.tasks = await this.api.tasks();
          this.renderTasks();
        } catch (err) {
          this.notify(`transition failed: ${(err as Error).message}`);
          this.renderTasks(); // roll back the optimistic move
        }
      },
      onIllegalDrop: (_taskId, from, to) => {
        this.notify(`illegal move ${from} → ${to}`);
      },
    });
  }

  async renderWeather(): Promise<void> {
    const host = this.root.querySelector<HTMLElement>(".weather-root");
    if (!host) return;
    host.replaceChildren();
    let stations;
    try {
      stations = await this.api.weatherLatest();
    } catch {
      host.textContent = "weather unavailable";
      return;
    }
    for (const station of stations) {
      const caption = document.createElement("h4");
      const temp = station.channels["temp_dry_c"];
      const rain = station.channels["rain_mm_30min"];
      caption.textContent = `${station.label} · ${temp ? temp.value.toFixed(1) : "–"} °C · ` +
        `${rain ? rain.value.toFixed(1) : "–"} mm/30min` +
        (rain?.flag === "suspect" ? " (suspect)" : "");
      host.appendChild(caption);
      try {
        const rainSeries = await this.api.series(
          station.device_id, "weather-station", "rain_mm_30min",
          { days: this.state.rangeDays });
        renderLineChart(host, rainSeries, { label: `rain ${station.label}`, height: 70 });
      } catch {
        // a station with no data yet simply shows no chart
      }
    }
  }

  async renderSidePanel(): Promise<void> {
    const host = this.root.querySelector<HTMLElement>(".side-root");
    if (!host) return;
    host.replaceChildren();
    const selection = this.state.selected;
    if (!selection) {
      host.textContent = "click a marker or zone";
      return;
    }
    if (selection.type === "sensor") {
      const sensor = this.data.sensors.find((s) => String(s.device_id) === selection.id);
      if (!sensor) return;
      const heading = document.createElement("h3");
      heading.textContent = `${sensor.label} · ${sensor.kind}`
        + (sensor.attached_tree ? ` · ${sensor.attached_tree}` : "");
      host.appendChild(heading);
      if (sensor.kind === "tree-talker") {
        for (const channel of ["sap_flow_lh", "radial_growth_um", "tilt_deg"]) {
          try {
            const points = await this.api.series(sensor.device_id, sensor.kind, channel);
            const caption = document.createElement("h4");
            caption.textContent = channel;
            host.appendChild(caption);
            renderLineChart(host, points, { label: channel });
          } catch {
            this.notify(`series ${channel} unavailable`);
          }
        }
      }
    } else if (selection.type === "zone") {
      const zone = this.data.zones.find((z) => z.zone_id === selection.id);
      if (zone) {
        host.textContent = `${zone.name}: ${Math.round(zone.area_m2)} m²`;
      }
    }
  }
}

export function canDropCard(from: Task["state"], to: Task["state"]): boolean {
  return dragEvent(from, to) !== null;
}

export function mount(root: HTMLElement, base = ""): DashboardApp {
  const app = new DashboardApp(root, new ApiClient(base), base);
  void app.start();
  return app;
}

declare global {
  interface Window {
    canopyDashboard?: DashboardApp;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.canopyDashboard = mount(document.getElementById("app") as HTMLElement);
}
