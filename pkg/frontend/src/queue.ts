import type { Representative } from "./types.js";

export class GradeValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "GradeValidationError";
  }
}

interface QueueEntry {
  learnerId: string;
  /** clusters sharing this representative solution; graded once for all */
  clusters: number[];
  keys: string[];
  grade: number | null;
}

/**
 * The grading queue: one entry per distinct representative solution. A
 * solution that represents several clusters appears once and its grade is
 * reused for each of them. Grades can be corrected and resubmitted without
 * re-clustering — `toSubmission` always reflects the latest values.
 */
export class GradingQueue {
  private entries: QueueEntry[] = [];

  constructor(
    representatives: Representative[],
    public readonly gMax: number,
  ) {
    const byLearner = new Map<string, QueueEntry>();
    for (const rep of representatives) {
      const existing = byLearner.get(rep.learner_id);
      if (existing) {
        existing.clusters.push(rep.cluster);
      } else {
        const entry: QueueEntry = {
          learnerId: rep.learner_id,
          clusters: [rep.cluster],
          keys: rep.keys,
          grade: null,
        };
        byLearner.set(rep.learner_id, entry);
        this.entries.push(entry);
      }
    }
  }

  /** Representatives still awaiting a grade, in presentation order. */
  get pending(): string[] {
    return this.entries.filter((e) => e.grade === null).map((e) => e.learnerId);
  }

  get complete(): boolean {
    return this.entries.every((e) => e.grade !== null);
  }

  /** The next ungraded representative, or null when the queue is done. */
  next(): { learnerId: string; clusters: number[]; keys: string[] } | null {
    const entry = this.entries.find((e) => e.grade === null);
    return entry
      ? { learnerId: entry.learnerId, clusters: entry.clusters, keys: entry.keys }
      : null;
  }

  /** Record (or correct) the grade for a representative. */
  enter(learnerId: string, grade: number): void {
    const entry = this.entries.find((e) => e.learnerId === learnerId);
    if (!entry) {
      throw new GradeValidationError(`${learnerId} is not in the grading queue`);
    }
    if (!Number.isFinite(grade) || grade < 0 || grade > this.gMax) {
      throw new GradeValidationError(
        `grade ${grade} is outside [0, ${this.gMax}]`,
      );
    }
    entry.grade = grade;
  }

  gradeOf(learnerId: string): number | null {
    return this.entries.find((e) => e.learnerId === learnerId)?.grade ?? null;
  }

  /** Cluster-id -> grade map for POST /analyses/{id}/grades. */
  toSubmission(): Record<string, number> {
    if (!this.complete) {
      const missing = this.pending.join(", ");
      throw new GradeValidationError(`ungraded representatives: ${missing}`);
    }
    const grades: Record<string, number> = {};
    for (const entry of this.entries) {
      for (const cluster of entry.clusters) {
        grades[String(cluster)] = entry.grade as number;
      }
    }
    return grades;
  }
}
