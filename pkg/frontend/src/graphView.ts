import {
  clusterColors,
  forceLayout,
  shouldDegrade,
  summarizeClusters,
} from "./layout.js";
import type { GraphDoc, GraphNode } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphViewOptions {
  width?: number;
  height?: number;
  seed?: number;
  onNodeClick?: (node: GraphNode) => void;
}

const FULL_CREDIT_COLOR = "hsl(120, 70%, 45%)";

/**
 * Render the similarity graph into a container: nodes colored by cluster
 * (or by grade once grades exist), edge width proportional to similarity,
 * representatives ringed. Degrades to a cluster summary table past
 * MAX_RENDERED_NODES.
 */
export function renderClusterGraph(
  container: HTMLElement,
  graph: GraphDoc,
  options: GraphViewOptions = {},
): void {
  container.replaceChildren();
  if (shouldDegrade(graph)) {
    console.warn(
      `graph has ${graph.nodes.length} nodes; showing cluster summary instead`,
    );
    renderClusterSummary(container, graph);
    return;
  }

  const width = options.width ?? 800;
  const height = options.height ?? 600;
  const positions = forceLayout(graph, { width, height, seed: options.seed });
  const colors = clusterColors(graph);
  const gMaxGuess = Math.max(
    ...graph.nodes.map((n) => n.grade ?? 0),
    1,
  );

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute(
    "viewBox",
    `${-width / 2} ${-height / 2} ${width} ${height}`,
  );
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));

  for (const edge of graph.edges) {
    const a = positions.get(edge.source)!;
    const b = positions.get(edge.target)!;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", a.x.toFixed(1));
    line.setAttribute("y1", a.y.toFixed(1));
    line.setAttribute("x2", b.x.toFixed(1));
    line.setAttribute("y2", b.y.toFixed(1));
    line.setAttribute("stroke", "#bbb");
    line.setAttribute("stroke-width", (0.5 + 3 * edge.weight).toFixed(2));
    svg.appendChild(line);
  }

  for (const node of graph.nodes) {
    const p = positions.get(node.index)!;
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", p.x.toFixed(1));
    circle.setAttribute("cy", p.y.toFixed(1));
    circle.setAttribute("r", node.representative ? "8" : "5");
    const fill =
      node.grade !== undefined && node.grade >= gMaxGuess
        ? FULL_CREDIT_COLOR
        : colors.get(node.cluster)!;
    circle.setAttribute("fill", fill);
    if (node.representative) {
      circle.setAttribute("stroke", "#222");
      circle.setAttribute("stroke-width", "2");
    }
    circle.style.cursor = "pointer";
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent =
      node.grade !== undefined
        ? `${node.id} — cluster ${node.cluster}, grade ${node.grade.toFixed(2)}`
        : `${node.id} — cluster ${node.cluster}`;
    circle.appendChild(title);
    circle.addEventListener("click", () => options.onNodeClick?.(node));
    svg.appendChild(circle);
  }

  container.appendChild(svg);
}

function renderClusterSummary(container: HTMLElement, graph: GraphDoc): void {
  const table = document.createElement("table");
  const header = document.createElement("tr");
  for (const label of ["cluster", "size", "representatives", "mean grade"]) {
    const th = document.createElement("th");
    th.textContent = label;
    header.appendChild(th);
  }
  table.appendChild(header);
  for (const s of summarizeClusters(graph)) {
    const row = document.createElement("tr");
    for (const value of [
      String(s.cluster),
      String(s.size),
      s.representatives.join(", "),
      s.meanGrade === null ? "—" : s.meanGrade.toFixed(2),
    ]) {
      const td = document.createElement("td");
      td.textContent = value;
      row.appendChild(td);
    }
    table.appendChild(row);
  }
  container.appendChild(table);
}
