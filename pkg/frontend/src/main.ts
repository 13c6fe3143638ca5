import { ApiError, WorkbenchClient } from "./api.js";
import { renderClusterGraph } from "./graphView.js";
import { GradeValidationError, GradingQueue } from "./queue.js";
import { FeedbackStepper } from "./stepper.js";
import type { DatasetDoc, GraphNode, ViewState } from "./types.js";

const client = new WorkbenchClient(
  (window as { MLPGRADE_API?: string }).MLPGRADE_API ?? "http://127.0.0.1:8000",
);

const state: ViewState = {
  sessionId: null,
  layout: new Map(),
  gradingQueue: [],
  stepperPosition: new Map(),
};

let queue: GradingQueue | null = null;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function setStatus(text: string): void {
  el("status-line").textContent = text;
}

async function refreshGraph(): Promise<void> {
  if (!state.sessionId) return;
  const threshold = Number(el<HTMLInputElement>("threshold").value) || 0.1;
  const graph = await client.graph(state.sessionId, threshold);
  renderClusterGraph(el("graph"), graph, { onNodeClick: showSolution });
}

function showSolution(node: GraphNode): void {
  const panel = el("solution-panel");
  panel.textContent =
    node.grade !== undefined
      ? `${node.id} (cluster ${node.cluster}, grade ${node.grade.toFixed(2)})`
      : `${node.id} (cluster ${node.cluster}, ungraded)`;
  void showFeedback(node.id);
}

async function showFeedback(learnerId: string): Promise<void> {
  if (!state.sessionId) return;
  const panel = el("feedback-panel");
  try {
    const doc = await client.feedback(state.sessionId, learnerId);
    const stepper = new FeedbackStepper(doc);
    stepper.jump(state.stepperPosition.get(learnerId) ?? 1);
    panel.replaceChildren();
    const list = document.createElement("ol");
    for (const step of doc.steps) {
      const item = document.createElement("li");
      item.textContent = `${step.expression} — expected ${step.expected_grade.toFixed(2)}`;
      if (step.alert) item.classList.add("alert");
      if (step.v === stepper.at) item.classList.add("current");
      item.addEventListener("click", () => {
        state.stepperPosition.set(learnerId, stepper.jump(step.v).v);
        void showFeedback(learnerId);
      });
      list.appendChild(item);
    }
    panel.appendChild(list);
    if (doc.first_alert !== null) {
      const note = document.createElement("p");
      note.textContent = `first alert at step ${doc.first_alert}`;
      panel.appendChild(note);
    }
  } catch (err) {
    if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
      panel.textContent = "feedback needs a graded bayes session";
    } else {
      throw err;
    }
  }
}

function renderQueue(): void {
  const panel = el("queue-panel");
  panel.replaceChildren();
  if (!queue) return;
  const entry = queue.next();
  if (!entry) {
    panel.textContent = "queue complete — grades submitted";
    return;
  }
  const label = document.createElement("p");
  label.textContent = `Grade ${entry.learnerId} (cluster ${entry.clusters.join(", ")}):`;
  const steps = document.createElement("pre");
  steps.textContent = entry.keys.join("\n");
  const input = document.createElement("input");
  input.type = "number";
  input.min = "0";
  input.max = String(queue.gMax);
  const button = document.createElement("button");
  button.textContent = "submit grade";
  button.addEventListener("click", () => void enterGrade(entry.learnerId, input));
  panel.append(label, steps, input, button);
}

async function enterGrade(
  learnerId: string,
  input: HTMLInputElement,
): Promise<void> {
  if (!queue || !state.sessionId) return;
  try {
    queue.enter(learnerId, Number(input.value));
  } catch (err) {
    if (err instanceof GradeValidationError) {
      setStatus(err.message);
      return;
    }
    throw err;
  }
  state.gradingQueue = queue.pending;
  if (queue.complete) {
    const report = await client.submitGrades(state.sessionId, queue.toSubmission());
    setStatus(
      `graded ${report.grades.length} solutions from ${Object.keys(report.cluster_grades).length} instructor grades`,
    );
    await refreshGraph();
  }
  renderQueue();
}

async function startAnalysis(dataset: DatasetDoc): Promise<void> {
  const method = el<HTMLSelectElement>("method").value as "sc" | "ap" | "bayes";
  const created = await client.createAnalysis(dataset, { method });
  state.sessionId = created.id;
  setStatus(`session ${created.id}: ${created.K} clusters (${created.method})`);
  const reps = await client.representatives(created.id);
  queue = new GradingQueue(reps.representatives, reps.g_max);
  state.gradingQueue = queue.pending;
  renderQueue();
  await refreshGraph();
}

el<HTMLInputElement>("dataset-file").addEventListener("change", (event) => {
  const file = (event.target as HTMLInputElement).files?.[0];
  if (!file) return;
  void file.text().then((text) => startAnalysis(JSON.parse(text) as DatasetDoc));
});

el<HTMLInputElement>("threshold").addEventListener("change", () => void refreshGraph());
