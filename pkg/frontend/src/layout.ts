import type { GraphDoc } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export interface LayoutOptions {
  width?: number;
  height?: number;
  iterations?: number;
  seed?: number;
}

/** Above this the graph view degrades to a cluster-level summary. */
export const MAX_RENDERED_NODES = 2000;

export function shouldDegrade(graph: GraphDoc): boolean {
  return graph.nodes.length > MAX_RENDERED_NODES;
}

/** Deterministic PRNG (mulberry32) so layouts are reproducible per seed. */
function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Force-directed layout: springs on edges with rest length shrinking in the
 * similarity weight, all-pairs repulsion, and weak centering. Pure and
 * deterministic; rendering is a separate concern.
 */
export function forceLayout(
  graph: GraphDoc,
  options: LayoutOptions = {},
): Map<number, Point> {
  const width = options.width ?? 800;
  const height = options.height ?? 600;
  const iterations = options.iterations ?? 150;
  const random = rng(options.seed ?? 1);

  const n = graph.nodes.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  const indexOf = new Map<number, number>();
  graph.nodes.forEach((node, i) => {
    indexOf.set(node.index, i);
    xs[i] = (random() - 0.5) * width;
    ys[i] = (random() - 0.5) * height;
  });

  const edges = graph.edges.map((e) => ({
    a: indexOf.get(e.source)!,
    b: indexOf.get(e.target)!,
    weight: e.weight,
  }));

  const repulsion = (width * height) / Math.max(n, 1);
  const springRest = Math.sqrt(repulsion);
  for (let iter = 0; iter < iterations; iter++) {
    const cool = 1 - iter / iterations;
    const fx = new Float64Array(n);
    const fy = new Float64Array(n);

    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = xs[i]! - xs[j]!;
        let dy = ys[i]! - ys[j]!;
        const d2 = dx * dx + dy * dy + 1e-6;
        const f = repulsion / d2;
        dx *= f;
        dy *= f;
        fx[i]! += dx;
        fy[i]! += dy;
        fx[j]! -= dx;
        fy[j]! -= dy;
      }
    }

    for (const { a, b, weight } of edges) {
      const dx = xs[b]! - xs[a]!;
      const dy = ys[b]! - ys[a]!;
      const d = Math.sqrt(dx * dx + dy * dy) + 1e-6;
      // higher similarity pulls nodes closer
      const rest = springRest * (1.2 - weight);
      const f = (0.05 * weight * (d - rest)) / d;
      fx[a]! += f * dx;
      fy[a]! += f * dy;
      fx[b]! -= f * dx;
      fy[b]! -= f * dy;
    }

    for (let i = 0; i < n; i++) {
      fx[i]! -= 0.01 * xs[i]!;
      fy[i]! -= 0.01 * ys[i]!;
      const mag = Math.sqrt(fx[i]! * fx[i]! + fy[i]! * fy[i]!) + 1e-9;
      const step = Math.min(mag, 12 * cool);
      xs[i]! += (fx[i]! / mag) * step;
      ys[i]! += (fy[i]! / mag) * step;
    }
  }

  const positions = new Map<number, Point>();
  graph.nodes.forEach((node, i) => {
    positions.set(node.index, { x: xs[i]!, y: ys[i]! });
  });
  return positions;
}

/** One stable color per cluster id. */
export function clusterColors(graph: GraphDoc): Map<number, string> {
  const clusters = [...new Set(graph.nodes.map((n) => n.cluster))].sort(
    (a, b) => a - b,
  );
  const colors = new Map<number, string>();
  clusters.forEach((cluster, i) => {
    const hue = Math.round((360 * i) / clusters.length);
    colors.set(cluster, `hsl(${hue}, 70%, 50%)`);
  });
  return colors;
}

export interface ClusterSummary {
  cluster: number;
  size: number;
  representatives: string[];
  meanGrade: number | null;
}

/** Cluster-level fallback view for graphs too large to render node-by-node. */
export function summarizeClusters(graph: GraphDoc): ClusterSummary[] {
  const byCluster = new Map<number, ClusterSummary & { gradeSum: number; graded: number }>();
  for (const node of graph.nodes) {
    let s = byCluster.get(node.cluster);
    if (!s) {
      s = {
        cluster: node.cluster,
        size: 0,
        representatives: [],
        meanGrade: null,
        gradeSum: 0,
        graded: 0,
      };
      byCluster.set(node.cluster, s);
    }
    s.size += 1;
    if (node.representative) s.representatives.push(node.id);
    if (node.grade !== undefined) {
      s.gradeSum += node.grade;
      s.graded += 1;
    }
  }
  return [...byCluster.values()]
    .map(({ gradeSum, graded, ...s }) => ({
      ...s,
      meanGrade: graded > 0 ? gradeSum / graded : null,
    }))
    .sort((a, b) => a.cluster - b.cluster);
}
