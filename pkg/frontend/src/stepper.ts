import type { FeedbackDoc, FeedbackStep } from "./types.js";

/**
 * Stepper over a solution's feedback trace: per-line expected grade with the
 * alert at the first line whose expected grade falls below full credit. The
 * position is 1-based and clamped to [1, V_j].
 */
export class FeedbackStepper {
  private position: number;

  constructor(private readonly doc: FeedbackDoc) {
    if (doc.steps.length === 0) {
      throw new Error(`feedback trace for ${doc.learner_id} has no steps`);
    }
    this.position = 1;
  }

  get length(): number {
    return this.doc.steps.length;
  }

  get at(): number {
    return this.position;
  }

  get current(): FeedbackStep {
    return this.doc.steps[this.position - 1]!;
  }

  get firstAlert(): number | null {
    return this.doc.first_alert;
  }

  /** Whether the line at the current position triggered the alert. */
  get onAlertLine(): boolean {
    return this.doc.first_alert === this.position;
  }

  next(): FeedbackStep {
    this.position = Math.min(this.position + 1, this.length);
    return this.current;
  }

  prev(): FeedbackStep {
    this.position = Math.max(this.position - 1, 1);
    return this.current;
  }

  jump(v: number): FeedbackStep {
    this.position = Math.max(1, Math.min(Math.trunc(v), this.length));
    return this.current;
  }
}
