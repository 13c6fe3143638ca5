/** Wire types for the mlpgrade HTTP service. */

export interface DatasetSolution {
  learner_id: string;
  body?: string;
  expressions?: string[];
}

export interface DatasetDoc {
  schema_version: number;
  question_id: string;
  statement: string;
  g_max: number;
  level?: string;
  solutions: DatasetSolution[];
  grades?: number[];
}

export interface CreateAnalysisResponse {
  id: string;
  method: string;
  K: number;
}

export interface StatusDoc {
  id: string;
  status: string;
  graded: boolean;
}

export interface ClustersDoc {
  method: string;
  K: number;
  labels: number[];
  learner_ids: string[];
  solution_keys: string[][];
}

export interface Representative {
  cluster: number;
  index: number;
  learner_id: string;
  keys: string[];
}

export interface RepresentativesDoc {
  representatives: Representative[];
  g_max: number;
}

export interface SolutionGrade {
  learner_id: string;
  grade: number;
  rounded: number;
  representative: boolean;
}

export interface GradeReport {
  question_id: string;
  method: string;
  g_max: number;
  cluster_grades: Record<string, number>;
  grades: SolutionGrade[];
}

export interface FeedbackStep {
  v: number;
  expression: string;
  expected_grade: number;
  prob_incorrect: number;
  alert: boolean;
}

export interface FeedbackDoc {
  learner_id: string;
  first_alert: number | null;
  steps: FeedbackStep[];
}

export interface GraphNode {
  id: string;
  index: number;
  cluster: number;
  representative: boolean;
  grade?: number;
}

export interface GraphEdge {
  source: number;
  target: number;
  weight: number;
}

export interface GraphDoc {
  threshold: number;
  nodes: GraphNode[];
  edges: GraphEdge[];
}

/** Client-side view state for one workbench tab. */
export interface ViewState {
  sessionId: string | null;
  /** node index -> layout position */
  layout: Map<number, { x: number; y: number }>;
  /** learner ids of representatives still awaiting a grade */
  gradingQueue: string[];
  /** per-learner feedback stepper position (1-based, <= V_j) */
  stepperPosition: Map<string, number>;
}
