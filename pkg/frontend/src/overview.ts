import type { ApiClient, ContextGraph, EntityRow, GraphNode, SignalRow } from "./api";
import { SeriesChart } from "./chart";
import { ALL_LAYERS, LayerName, layoutGraph, visibleGraph } from "./graph";

const DAY = 86400;

const LAYER_HELP =
  "Layers: entities (with PARENT_OF / CONNECTED_TO edges), signals, " +
  "series (LOCATED_AT / MEASURES edges), models (TARGETS edges). An " +
  "edge is drawn only while its layer and both endpoints are visible. " +
  "Click a series node to plot it.";

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

function renderMap(host: HTMLElement, entities: EntityRow[]): void {
  host.replaceChildren();
  host.append(h("h3", undefined, "Entity map"));
  const located = entities.filter((e) => e.geo !== null);
  if (located.length === 0) {
    host.append(h("p", "muted", "no geo-tagged entities"));
    return;
  }
  const lats = located.map((e) => (e.geo as [number, number])[0]);
  const lons = located.map((e) => (e.geo as [number, number])[1]);
  const pad = 0.15;
  const latSpan = Math.max(Math.max(...lats) - Math.min(...lats), 0.001);
  const lonSpan = Math.max(Math.max(...lons) - Math.min(...lons), 0.001);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 360 220");
  svg.setAttribute("class", "map");
  for (const e of located) {
    const [lat, lon] = e.geo as [number, number];
    const x = 360 * (pad + (1 - 2 * pad) * ((lon - Math.min(...lons)) / lonSpan));
    const y = 220 * (pad + (1 - 2 * pad) * (1 - (lat - Math.min(...lats)) / latSpan));
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", x.toFixed(1));
    dot.setAttribute("cy", y.toFixed(1));
    dot.setAttribute("r", "6");
    dot.setAttribute("class", "map-dot");
    const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
    label.setAttribute("x", (x + 9).toFixed(1));
    label.setAttribute("y", (y + 4).toFixed(1));
    label.setAttribute("class", "map-label");
    label.textContent = e.name;
    svg.append(dot, label);
  }
  host.append(svg);
  const elsewhere = entities.filter((e) => e.geo === null);
  if (elsewhere.length > 0) {
    host.append(h("p", "muted", `no location: ${elsewhere.map((e) => e.name).join(", ")}`));
  }
}

export class OverviewView {
  private layers = new Set<LayerName>(ALL_LAYERS);
  private graph: ContextGraph = { nodes: [], edges: [] };
  private chart?: SeriesChart;
  private chartHost?: HTMLElement;
  private chartTitle?: HTMLElement;

  constructor(private client: ApiClient) {}

  async mount(root: HTMLElement): Promise<void> {
    root.replaceChildren();
    const mapPanel = h("div", "panel");
    const graphPanel = h("div", "panel");
    const seriesPanel = h("div", "panel wide");
    root.append(mapPanel, graphPanel, seriesPanel);

    const [entities, signals, graph] = await Promise.all([
      this.client.entities(),
      this.client.signals(),
      this.client.contextGraph(),
    ]);
    this.graph = graph;

    renderMap(mapPanel, entities);
    mapPanel.append(this.inventory(entities, signals));

    graphPanel.append(h("h3", undefined, "Context graph"));
    const toggles = h("div", "toggles");
    for (const layer of ALL_LAYERS) {
      const label = h("label");
      const box = h("input") as HTMLInputElement;
      box.type = "checkbox";
      box.checked = true;
      box.addEventListener("change", () => {
        if (box.checked) this.layers.add(layer);
        else this.layers.delete(layer);
        this.renderGraph(graphHost);
      });
      label.append(box, document.createTextNode(` ${layer}`));
      toggles.append(label);
    }
    const graphHost = h("div", "graph-host");
    graphPanel.append(toggles, graphHost, h("p", "muted help", LAYER_HELP));
    this.renderGraph(graphHost);

    this.chartTitle = h("h3", undefined, "Series");
    this.chartHost = h("div");
    seriesPanel.append(
      this.chartTitle,
      h("p", "muted", "click a series node in the graph to plot it"),
      this.chartHost,
    );
    this.chart = new SeriesChart(this.chartHost);
  }

  private inventory(entities: EntityRow[], signals: SignalRow[]): HTMLElement {
    const box = h("div", "inventory");
    box.append(h("h3", undefined, "Contexts"));
    const entityList = h("ul");
    entityList.dataset.role = "entities";
    for (const e of entities) entityList.append(h("li", undefined, e.name));
    const signalList = h("ul");
    signalList.dataset.role = "signals";
    for (const s of signals) {
      signalList.append(h("li", undefined, s.unit ? `${s.name} [${s.unit}]` : s.name));
    }
    box.append(h("h4", undefined, `entities (${entities.length})`), entityList);
    box.append(h("h4", undefined, `signals (${signals.length})`), signalList);
    return box;
  }

  private renderGraph(host: HTMLElement): void {
    host.replaceChildren();
    const sub = visibleGraph(this.graph, this.layers);
    const { nodes, edges } = layoutGraph(sub, 420, 300);
    const byId = new Map(nodes.map((n) => [n.id, n]));
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", "0 0 420 300");
    svg.setAttribute("class", "graph");
    for (const e of edges) {
      const a = byId.get(e.from);
      const b = byId.get(e.to);
      if (!a || !b) continue;
      const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("x1", a.x.toFixed(1));
      line.setAttribute("y1", a.y.toFixed(1));
      line.setAttribute("x2", b.x.toFixed(1));
      line.setAttribute("y2", b.y.toFixed(1));
      line.setAttribute("class", `edge edge-${e.kind.toLowerCase()}`);
      svg.append(line);
    }
    for (const n of nodes) {
      const g = document.createElementNS("http://www.w3.org/2000/svg", "g");
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", n.x.toFixed(1));
      dot.setAttribute("cy", n.y.toFixed(1));
      dot.setAttribute("r", "7");
      dot.setAttribute("class", `node node-${n.kind}`);
      const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
      label.setAttribute("x", (n.x + 10).toFixed(1));
      label.setAttribute("y", (n.y + 4).toFixed(1));
      label.setAttribute("class", "node-label");
      label.textContent = n.label;
      g.append(dot, label);
      if (n.kind === "series") {
        g.setAttribute("class", "clickable");
        g.addEventListener("click", () => void this.plotSeries(n));
      }
      svg.append(g);
    }
    host.append(svg);
  }

  // Series labels come from the backend as entity/signal; entity names
  // with a slash are not supported here.
  private async plotSeries(node: GraphNode): Promise<void> {
    const cut = node.label.indexOf("/");
    if (cut < 0 || !this.chart || !this.chartTitle) return;
    const entity = node.label.slice(0, cut);
    const signal = node.label.slice(cut + 1);
    const { time } = await this.client.health();
    const now = Math.floor(Date.parse(time) / 1000);
    const points = await this.client.series({
      entity,
      signal,
      from: now - 30 * DAY,
      to: now + 2 * DAY,
    });
    this.chartTitle.textContent = `Series ${node.label} (${points.length} points)`;
    this.chart.setData({
      series: [{
        label: signal,
        xs: points.map((p) => p.ts),
        ys: points.map((p) => p.value),
        color: "var(--accent)",
      }],
    });
  }
}
