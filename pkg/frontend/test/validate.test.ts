import { describe, expect, it } from "vitest";

import type { DemographicFieldInfo, QuestionnaireItem } from "../src/protocol.js";
import {
  questionnaireProblems,
  unansweredRequired,
  validateAnswer,
  validateDemographics,
  validateSubjectId,
} from "../src/validate.js";

describe("subject id", () => {
  it("accepts safe path components", () => {
    for (const id of ["S01", "p.1", "a_b-c", "7x"]) {
      expect(validateSubjectId(id)).toBeNull();
    }
  });

  it("blocks empty and unsafe ids, mirroring the server", () => {
    for (const id of ["", "../x", "a/b", ".hidden", "-dash", "sp ace"]) {
      expect(validateSubjectId(id)).not.toBeNull();
    }
  });
});

describe("demographics", () => {
  const fields: DemographicFieldInfo[] = [
    { id: "age", label: "Age", type: "integer", options: [], required: true },
    {
      id: "gender",
      label: "Gender",
      type: "choice",
      options: ["female", "male", "diverse", "prefer not to say"],
      required: true,
    },
    { id: "visual_aid", label: "Habitual visual aid", type: "choice",
      options: ["none", "glasses", "contact lenses"], required: false },
  ];

  it("passes a filled form", () => {
    expect(
      validateDemographics(fields, { age: "34", gender: "diverse" }),
    ).toEqual([]);
  });

  it("flags missing required fields but not optional ones", () => {
    const problems = validateDemographics(fields, { age: "34" });
    expect(problems).toEqual(["Gender is required"]);
  });

  it("integer fields reject non-numbers", () => {
    const problems = validateDemographics(fields, { age: "thirty", gender: "male" });
    expect(problems[0]).toContain("whole number");
  });

  it("choice fields reject values off the list", () => {
    const problems = validateDemographics(fields, { age: "34", gender: "other" });
    expect(problems[0]).toContain("listed options");
  });
});

const likert: QuestionnaireItem = {
  id: "mental", kind: "likert", text: "?", required: true, min: 1, max: 21,
};
const choice: QuestionnaireItem = {
  id: "pick", kind: "choice", text: "?", required: true, options: ["a", "b"],
};
const free: QuestionnaireItem = {
  id: "notes", kind: "free_text", text: "?", required: false,
};
const slider: QuestionnaireItem = {
  id: "level", kind: "slider", text: "?", required: true, min: 0, max: 1, step: 0.1,
};

describe("questionnaire answers", () => {
  it("likert wants an integer in range", () => {
    expect(validateAnswer(likert, 11)).toBeNull();
    expect(validateAnswer(likert, 11.5)).not.toBeNull();
    expect(validateAnswer(likert, 0)).not.toBeNull();
    expect(validateAnswer(likert, "11")).not.toBeNull();
  });

  it("choice wants a listed option", () => {
    expect(validateAnswer(choice, "a")).toBeNull();
    expect(validateAnswer(choice, "z")).not.toBeNull();
  });

  it("free text wants a string", () => {
    expect(validateAnswer(free, "fine")).toBeNull();
    expect(validateAnswer(free, 3)).not.toBeNull();
  });

  it("slider wants a step-aligned number in range", () => {
    expect(validateAnswer(slider, 0.3)).toBeNull();
    expect(validateAnswer(slider, 0.35)).not.toBeNull();
    expect(validateAnswer(slider, 1.1)).not.toBeNull();
  });

  it("lists unanswered required items in order", () => {
    expect(unansweredRequired([likert, choice, free, slider], { pick: "a" }))
      .toEqual(["mental", "level"]);
  });

  it("submit problems cover bad, unknown, and missing answers", () => {
    const problems = questionnaireProblems([likert, choice], {
      mental: 99,
      ghost: 1,
    });
    expect(problems.some((p) => p.startsWith("mental:"))).toBe(true);
    expect(problems.some((p) => p.includes("unknown item"))).toBe(true);
    expect(problems.some((p) => p === "pick: unanswered")).toBe(true);
  });

  it("a complete valid sheet has no problems", () => {
    expect(
      questionnaireProblems([likert, choice, free, slider], {
        mental: 1,
        pick: "b",
        level: 1.0,
      }),
    ).toEqual([]);
  });
});
