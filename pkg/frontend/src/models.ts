import type { ApiClient, ForecastRow, HierarchyModel } from "./api";
import { SeriesChart } from "./chart";
import { mae, rmse } from "./metrics";

const DAY = 86400;
const MATCH_TOL = 1e-9;

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(v: number | null | undefined): string {
  return v === null || v === undefined ? "-" : v.toFixed(4);
}

interface Selection {
  model: HierarchyModel;
  version: number | "latest";
}

export class ModelsView {
  private models: HierarchyModel[] = [];
  private selected?: Selection;
  private daysBack = 3;
  private tree!: HTMLElement;
  private detail!: HTMLElement;
  private activity!: HTMLElement;
  private chart!: SeriesChart;
  private chartHost!: HTMLElement;
  private accuracyHost!: HTMLElement;
  private status!: HTMLElement;

  constructor(private client: ApiClient) {}

  async mount(root: HTMLElement): Promise<void> {
    root.replaceChildren();
    this.tree = h("div", "panel tree");
    this.detail = h("div", "panel wide");
    this.activity = h("div", "panel");
    root.append(this.tree, this.detail, this.activity);

    this.status = h("p", "status", " ");
    const controls = h("div", "controls");
    const windowSelect = h("select") as HTMLSelectElement;
    for (const days of [1, 3, 7, 30]) {
      const opt = h("option", undefined, `last ${days}d`) as HTMLOptionElement;
      opt.value = String(days);
      if (days === this.daysBack) opt.selected = true;
      windowSelect.append(opt);
    }
    windowSelect.addEventListener("change", () => {
      this.daysBack = Number(windowSelect.value);
      void this.refreshDetail();
    });
    controls.append(h("span", "muted", "window "), windowSelect);

    this.chartHost = h("div");
    this.chart = new SeriesChart(this.chartHost);
    this.accuracyHost = h("div", "accuracy");
    this.detail.append(
      h("h3", undefined, "Forecast vs observed"),
      controls,
      this.chartHost,
      this.accuracyHost,
      this.status,
    );

    this.activity.append(h("h3", undefined, "Activity"));
    await this.refreshTree();
    await this.refreshActivity();
  }

  private async refreshTree(): Promise<void> {
    this.models = await this.client.hierarchy();
    this.tree.replaceChildren(h("h3", undefined, "Models"));
    if (this.models.length === 0) {
      this.tree.append(h("p", "muted", "no models stored"));
      return;
    }
    for (const model of this.models) {
      const box = h("div", "model-node");
      const head = h("div", "model-head");
      head.append(h("strong", undefined, `${model.name} (#${model.id})`));
      head.append(h("span", "muted", ` ${model.target.entity}/${model.target.signal}`));
      const trainBtn = h("button", undefined, "train now");
      trainBtn.addEventListener("click", () => void this.runNow(model.id, "train"));
      head.append(trainBtn);
      box.append(head);

      const list = h("ul", "versions");
      for (const v of model.versions) {
        const item = h("li", v.active ? "version active" : "version");
        const pick = h("a", undefined, `v${v.id}`) as HTMLAnchorElement;
        pick.href = "#";
        pick.addEventListener("click", (ev) => {
          ev.preventDefault();
          this.selected = { model, version: v.id };
          void this.refreshDetail();
        });
        item.append(pick);
        const trainedAt = typeof v.trained_at === "number"
          ? new Date(v.trained_at * 1000).toISOString()
          : String(v.trained_at);
        item.append(h("span", "muted", ` trained ${trainedAt}`));
        if (v.metrics && v.metrics.rmse !== undefined) {
          item.append(h("span", "muted", ` rmse ${v.metrics.rmse.toFixed(3)}`));
        }
        if (v.active) item.append(h("span", "badge", "active"));
        const activate = h("button", undefined, "activate");
        activate.addEventListener("click", () => void this.activate(model.id, v.id));
        const scoreBtn = h("button", undefined, "score now");
        scoreBtn.addEventListener("click", () => void this.runNow(model.id, "score", v.id));
        item.append(activate, scoreBtn);
        list.append(item);
      }
      box.append(list);
      this.tree.append(box);
    }
    if (!this.selected && this.models.length > 0) {
      this.selected = { model: this.models[0], version: "latest" };
      await this.refreshDetail();
    }
  }

  private async refreshDetail(): Promise<void> {
    if (!this.selected) return;
    const { model, version } = this.selected;
    const { time } = await this.client.health();
    const now = Math.floor(Date.parse(time) / 1000);
    const win = {
      entity: model.target.entity,
      signal: model.target.signal,
      from: now - this.daysBack * DAY,
      to: now + DAY,
      model: model.id,
      version,
    };
    let rows: ForecastRow[];
    let server;
    try {
      [rows, server] = await Promise.all([
        this.client.forecast(win),
        this.client.accuracy(win),
      ]);
    } catch (err) {
      this.say(String(err));
      return;
    }
    this.chart.setData({
      series: [
        {
          label: "observed",
          xs: rows.map((r) => r.ts),
          ys: rows.map((r) => r.observed),
          color: "var(--fg)",
        },
        {
          label: "forecast",
          xs: rows.map((r) => r.ts),
          ys: rows.map((r) => r.forecast),
          color: "var(--accent)",
          dash: "5 3",
        },
      ],
      band: {
        xs: rows.map((r) => r.ts),
        lower: rows.map((r) => r.lower),
        upper: rows.map((r) => r.upper),
      },
    });

    // display math recomputed from the rows on screen, cross-checked
    // against the server's number for the identical window
    const clientRmse = rmse(rows);
    const clientMae = mae(rows);
    const agree =
      clientRmse === null || server.rmse === null
        ? clientRmse === server.rmse
        : Math.abs(clientRmse - server.rmse) <= MATCH_TOL;
    this.accuracyHost.replaceChildren(
      h("span", undefined, `RMSE ${fmt(clientRmse)}`),
      h("span", undefined, `MAE ${fmt(clientMae)}`),
      h("span", "muted", `n=${server.n}`),
      h("span", agree ? "badge" : "badge bad",
        agree ? "matches server" : `server says ${fmt(server.rmse)}`),
    );
    const producers = [...new Set(rows.map((r) => r.producer).filter((p) => p !== null))];
    this.say(`model #${model.id}, version ${version}; layers on screen: ${
      producers.length ? producers.join(", ") : "none"}`);
  }

  private async activate(modelId: number, versionId: number): Promise<void> {
    // no optimistic update: the tree repaints only after the ack
    try {
      await this.client.activateVersion(modelId, versionId);
    } catch (err) {
      this.say(String(err));
      return;
    }
    this.say(`activated v${versionId}`);
    this.selected = {
      model: this.models.find((m) => m.id === modelId) ?? this.selected!.model,
      version: "latest",
    };
    await this.refreshTree();
    await this.refreshDetail();
  }

  private async runNow(modelId: number, task: "train" | "score", version?: number): Promise<void> {
    try {
      const { task: queued } = await this.client.runNow(modelId, task, version);
      this.say(`queued ${queued.kind} (subject ${queued.subject}) due ${queued.due}`);
    } catch (err) {
      this.say(String(err));
      return;
    }
    await this.refreshActivity();
  }

  private async refreshActivity(): Promise<void> {
    const [queues, jobs] = await Promise.all([
      this.client.queues(),
      this.client.recentJobs(),
    ]);
    this.activity.replaceChildren(h("h3", undefined, "Activity"));
    const refresh = h("button", undefined, "refresh");
    refresh.addEventListener("click", () => void this.refreshActivity());
    this.activity.append(refresh);

    const queueList = h("ul", "queue");
    for (const kind of ["train", "score"] as const) {
      for (const bucket of ["now", "later"] as const) {
        for (const t of queues[kind][bucket].slice(0, 8)) {
          queueList.append(h("li", undefined,
            `${bucket}: ${t.kind} subject ${t.subject} due ${t.due}`));
        }
      }
    }
    if (!queueList.hasChildNodes()) queueList.append(h("li", "muted", "queues empty"));
    this.activity.append(h("h4", undefined, "Queued"), queueList);

    const jobList = h("ul", "jobs");
    for (const j of jobs.slice(-8).reverse()) {
      const note = j.status === "failed" ? ` (${j.error ?? "error"})` : "";
      jobList.append(h("li", j.status === "failed" ? "bad" : undefined,
        `${j.job.kind} subject ${j.job.subject}: ${j.status}${note}`));
    }
    if (!jobList.hasChildNodes()) jobList.append(h("li", "muted", "no jobs yet"));
    this.activity.append(h("h4", undefined, "Recent jobs"), jobList);
  }

  private say(text: string): void {
    this.status.textContent = text;
  }
}
