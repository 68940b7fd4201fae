import type { ContextGraph, GraphEdge, GraphNode, NodeKind } from "./api";

// Layer semantics (also shown in the UI help): each toggle controls
// one node kind, and an edge is drawn when its own layer is on AND
// both endpoints are visible.
//
//   entities -> entity nodes, PARENT_OF and CONNECTED_TO edges
//   signals  -> signal nodes
//   series   -> series nodes, LOCATED_AT and MEASURES edges
//   models   -> model nodes, TARGETS edges

export type LayerName = "entities" | "signals" | "series" | "models";

export const ALL_LAYERS: LayerName[] = ["entities", "signals", "series", "models"];

const NODE_LAYER: Record<NodeKind, LayerName> = {
  entity: "entities",
  signal: "signals",
  series: "series",
  model: "models",
};

const EDGE_LAYER: Record<string, LayerName> = {
  PARENT_OF: "entities",
  CONNECTED_TO: "entities",
  LOCATED_AT: "series",
  MEASURES: "series",
  TARGETS: "models",
};

export function visibleGraph(graph: ContextGraph, layers: Set<LayerName>): ContextGraph {
  const nodes = graph.nodes.filter((n) => layers.has(NODE_LAYER[n.kind]));
  const ids = new Set(nodes.map((n) => n.id));
  const edges = graph.edges.filter((e) => {
    const layer = EDGE_LAYER[e.kind];
    return layer !== undefined && layers.has(layer) && ids.has(e.from) && ids.has(e.to);
  });
  return { nodes, edges };
}

export interface Placed extends GraphNode {
  x: number;
  y: number;
}

// Column layout: one column per visible kind, nodes stacked in server
// order. Deterministic and readable at the scale of one site; force
// layouts earn their keep only on far bigger graphs.
export function layoutGraph(
  graph: ContextGraph,
  width: number,
  height: number,
  pad = 40,
): { nodes: Placed[]; edges: GraphEdge[] } {
  const order: NodeKind[] = ["entity", "series", "signal", "model"];
  const kinds = order.filter((k) => graph.nodes.some((n) => n.kind === k));
  const columns = Math.max(kinds.length, 1);
  const nodes: Placed[] = [];
  kinds.forEach((kind, col) => {
    const members = graph.nodes.filter((n) => n.kind === kind);
    const x = columns === 1
      ? width / 2
      : pad + (col * (width - 2 * pad)) / (columns - 1);
    members.forEach((n, row) => {
      const y = members.length === 1
        ? height / 2
        : pad + (row * (height - 2 * pad)) / (members.length - 1);
      nodes.push({ ...n, x, y });
    });
  });
  return { nodes, edges: graph.edges };
}
