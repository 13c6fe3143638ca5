import { describe, expect, it } from "vitest";

import { FeedbackStepper } from "../src/stepper.js";
import type { FeedbackDoc } from "../src/types.js";

const doc: FeedbackDoc = {
  learner_id: "L017",
  first_alert: 2,
  steps: [
    { v: 1, expression: "s", expected_grade: 2.8, prob_incorrect: 0.1, alert: false },
    { v: 2, expression: "b1", expected_grade: 1.2, prob_incorrect: 0.9, alert: true },
    { v: 3, expression: "b2", expected_grade: 1.0, prob_incorrect: 0.95, alert: true },
  ],
};

describe("FeedbackStepper", () => {
  it("starts at the first line", () => {
    const s = new FeedbackStepper(doc);
    expect(s.at).toBe(1);
    expect(s.current.expression).toBe("s");
    expect(s.onAlertLine).toBe(false);
  });

  it("steps forward to the alert line", () => {
    const s = new FeedbackStepper(doc);
    s.next();
    expect(s.at).toBe(2);
    expect(s.onAlertLine).toBe(true);
    expect(s.firstAlert).toBe(2);
  });

  it("clamps the position to [1, V]", () => {
    const s = new FeedbackStepper(doc);
    s.prev();
    expect(s.at).toBe(1);
    s.jump(99);
    expect(s.at).toBe(3);
    s.jump(-5);
    expect(s.at).toBe(1);
  });

  it("never moves past the last line", () => {
    const s = new FeedbackStepper(doc);
    for (let i = 0; i < 10; i++) s.next();
    expect(s.at).toBe(doc.steps.length);
  });

  it("handles traces with no alert", () => {
    const clean: FeedbackDoc = {
      learner_id: "L001",
      first_alert: null,
      steps: [
        { v: 1, expression: "x", expected_grade: 3, prob_incorrect: 0, alert: false },
      ],
    };
    const s = new FeedbackStepper(clean);
    expect(s.firstAlert).toBeNull();
    expect(s.onAlertLine).toBe(false);
  });

  it("rejects empty traces", () => {
    expect(
      () => new FeedbackStepper({ learner_id: "L0", first_alert: null, steps: [] }),
    ).toThrow();
  });
});
