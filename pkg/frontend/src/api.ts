import type {
  ClustersDoc,
  CreateAnalysisResponse,
  DatasetDoc,
  FeedbackDoc,
  GradeReport,
  GraphDoc,
  RepresentativesDoc,
  StatusDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface CreateAnalysisOptions {
  method?: "sc" | "ap" | "bayes";
  k?: number;
  seed?: number;
  iterations?: number;
  burn_in?: number;
}

/**
 * Typed client for the mlpgrade service. The workbench never computes grades
 * locally: every grade it displays came out of one of these calls.
 */
export class WorkbenchClient {
  constructor(private readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createAnalysis(
    dataset: DatasetDoc,
    options: CreateAnalysisOptions = {},
  ): Promise<CreateAnalysisResponse> {
    return this.request("/analyses", {
      method: "POST",
      body: JSON.stringify({ dataset, ...options }),
    });
  }

  status(sessionId: string): Promise<StatusDoc> {
    return this.request(`/analyses/${sessionId}/status`);
  }

  clusters(sessionId: string): Promise<ClustersDoc> {
    return this.request(`/analyses/${sessionId}/clusters`);
  }

  representatives(sessionId: string): Promise<RepresentativesDoc> {
    return this.request(`/analyses/${sessionId}/representatives`);
  }

  submitGrades(
    sessionId: string,
    grades: Record<string, number>,
  ): Promise<GradeReport> {
    return this.request(`/analyses/${sessionId}/grades`, {
      method: "POST",
      body: JSON.stringify({ grades }),
    });
  }

  grades(sessionId: string): Promise<GradeReport> {
    return this.request(`/analyses/${sessionId}/grades`);
  }

  feedback(sessionId: string, learnerId: string): Promise<FeedbackDoc> {
    return this.request(
      `/analyses/${sessionId}/solutions/${encodeURIComponent(learnerId)}/feedback`,
    );
  }

  graph(sessionId: string, threshold = 0.1): Promise<GraphDoc> {
    return this.request(`/analyses/${sessionId}/graph?threshold=${threshold}`);
  }
}
