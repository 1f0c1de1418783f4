import type { DemographicFieldInfo, QuestionnaireItem } from "./protocol.js";

// Local mirrors of the server's validation rules, so bad input is caught
// before a round trip. The server remains the authority; anything that
// slips through still comes back as an error message.

const SUBJECT_ID = /^[A-Za-z0-9][A-Za-z0-9._-]*$/;

export function validateSubjectId(subject: string): string | null {
  if (!subject) return "subject id is required";
  if (!SUBJECT_ID.test(subject)) {
    return "subject id must start alphanumeric and use only letters, digits, '.', '_', '-'";
  }
  return null;
}

export function validateDemographics(
  fields: DemographicFieldInfo[],
  values: Record<string, string>,
): string[] {
  const problems: string[] = [];
  for (const field of fields) {
    const value = (values[field.id] ?? "").trim();
    if (!value) {
      if (field.required) problems.push(`${field.label} is required`);
      continue;
    }
    if (field.type === "integer" && !/^\d+$/.test(value)) {
      problems.push(`${field.label} must be a whole number`);
    }
    if (field.type === "choice" && !field.options.includes(value)) {
      problems.push(`${field.label} must be one of the listed options`);
    }
  }
  return problems;
}

export function validateAnswer(item: QuestionnaireItem, value: unknown): string | null {
  switch (item.kind) {
    case "likert": {
      if (typeof value !== "number" || !Number.isInteger(value)) {
        return `${item.id}: pick a whole number`;
      }
      if (value < item.min! || value > item.max!) {
        return `${item.id}: must be between ${item.min} and ${item.max}`;
      }
      return null;
    }
    case "choice":
      if (typeof value !== "string" || !item.options!.includes(value)) {
        return `${item.id}: pick one of the options`;
      }
      return null;
    case "free_text":
      return typeof value === "string" ? null : `${item.id}: must be text`;
    case "slider": {
      if (typeof value !== "number" || Number.isNaN(value)) {
        return `${item.id}: must be a number`;
      }
      if (value < item.min! || value > item.max!) {
        return `${item.id}: must be between ${item.min} and ${item.max}`;
      }
      const steps = (value - item.min!) / item.step!;
      if (Math.abs(steps - Math.round(steps)) > 1e-9) {
        return `${item.id}: must be a multiple of ${item.step} from ${item.min}`;
      }
      return null;
    }
  }
}

/** Ids of required items still missing an answer, in item order. */
export function unansweredRequired(
  items: QuestionnaireItem[],
  answers: Record<string, unknown>,
): string[] {
  return items
    .filter((item) => item.required && !(item.id in answers))
    .map((item) => item.id);
}

/** Everything blocking a submit: per-answer problems, then missing items. */
export function questionnaireProblems(
  items: QuestionnaireItem[],
  answers: Record<string, unknown>,
): string[] {
  const byId = new Map(items.map((item) => [item.id, item]));
  const problems: string[] = [];
  for (const [id, value] of Object.entries(answers)) {
    const item = byId.get(id);
    if (!item) {
      problems.push(`${id}: unknown item`);
      continue;
    }
    const problem = validateAnswer(item, value);
    if (problem) problems.push(problem);
  }
  for (const id of unansweredRequired(items, answers)) {
    problems.push(`${id}: unanswered`);
  }
  return problems;
}
