import type {
  DemographicFieldInfo,
  QuestionnairePresentPayload,
} from "./protocol.js";
import type { ClientSessionState } from "./state.js";
import { formatFocusDistance } from "./state.js";
import {
  questionnaireProblems,
  validateDemographics,
  validateSubjectId,
} from "./validate.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// ---------------------------------------------------------------- setup mask

export function renderSetupMask(
  container: HTMLElement,
  fields: DemographicFieldInfo[],
  onSubmit: (subject: string, demographics: Record<string, string>) => void,
) {
  container.replaceChildren();
  const form = el("form", "setup-form");
  const problems = el("div", "problems");

  const subjectInput = el("input");
  subjectInput.name = "subject";
  subjectInput.autocomplete = "off";
  const subjectLabel = el("label", undefined, "Subject id");
  subjectLabel.append(subjectInput);
  form.append(subjectLabel);

  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  for (const field of fields) {
    const label = el("label", undefined,
      field.required ? field.label : `${field.label} (optional)`);
    if (field.type === "choice") {
      const select = el("select");
      select.append(el("option", undefined, ""));
      for (const option of field.options) {
        const node = el("option", undefined, option);
        node.value = option;
        select.append(node);
      }
      label.append(select);
      inputs.set(field.id, select);
    } else {
      const input = el("input");
      if (field.type === "integer") input.inputMode = "numeric";
      label.append(input);
      inputs.set(field.id, input);
    }
    form.append(label);
  }

  const submit = el("button", undefined, "Start session");
  submit.type = "submit";
  form.append(submit, problems);

  form.onsubmit = (ev) => {
    ev.preventDefault();
    const subject = subjectInput.value.trim();
    const values: Record<string, string> = {};
    for (const [id, input] of inputs) {
      if (input.value.trim()) values[id] = input.value.trim();
    }
    const found = [
      ...(validateSubjectId(subject) ? [validateSubjectId(subject)!] : []),
      ...validateDemographics(fields, values),
    ];
    if (found.length) {
      problems.replaceChildren(...found.map((p) => el("div", undefined, p)));
      return;
    }
    onSubmit(subject, values);
  };
  container.append(form);
}

// ------------------------------------------------------------ inspector panel

export function renderInspector(
  container: HTMLElement,
  state: ClientSessionState,
  onCommand: (command: string) => void,
) {
  container.replaceChildren();
  const scene = state.scene;
  const auto = state.autofocal;

  if (scene?.status === "finished") {
    container.append(el("div", "banner", "Experiment finished"));
  } else if (scene?.status === "running") {
    container.append(el("div", "row",
      `Scene ${scene.position! + 1}/${scene.total}: ${scene.scene_name}`));
    if (scene.n_trials !== undefined) {
      container.append(el("div", "row",
        `Trials ${scene.trials_done}/${scene.n_trials}`));
    }
  }

  if (auto) {
    const dl = el("dl");
    const row = (term: string, value: string) => {
      dl.append(el("dt", undefined, term), el("dd", undefined, value));
    };
    row("Lens power", `${auto.lens_power.toFixed(4)} D`);
    row("Target vergence", `${auto.target_vergence.toFixed(4)} D`);
    row("Focus distance", formatFocusDistance(auto.focus_distance));
    row("Algorithm", auto.algorithm);
    container.append(dl);

    const blurList = el("div", "blur-list");
    for (const entry of auto.per_screen_blur) {
      blurList.append(el("div", "row",
        `${entry.screen} (${entry.distance} m): ${entry.major_arcmin.toFixed(1)} arcmin`));
    }
    container.append(blurList);
  }

  const controls = el("div", "controls");
  for (const command of ["previous", "next", "restart", "repeat"]) {
    const button = el("button", undefined, command);
    button.onclick = () => onCommand(command);
    controls.append(button);
  }
  container.append(controls);

  if (state.lastError) {
    container.append(el("div", "error", state.lastError.message));
  }
}

// ---------------------------------------------------------- questionnaire form

export function renderQuestionnaire(
  container: HTMLElement,
  payload: QuestionnairePresentPayload,
  onSubmit: (answers: Record<string, unknown>) => void,
) {
  container.replaceChildren();
  const form = el("form", "questionnaire");
  form.append(el("h2", undefined, payload.name));
  const answers: Record<string, unknown> = {};
  const problems = el("div", "problems");

  for (const item of payload.items) {
    const block = el("div", "item");
    block.dataset.itemId = item.id;
    block.append(el("div", "prompt", item.text));

    if (item.kind === "likert" || item.kind === "slider") {
      const range = el("input");
      range.type = "range";
      range.min = String(item.min);
      range.max = String(item.max);
      range.step = item.kind === "likert" ? "1" : String(item.step);
      const value = el("span", "value", "-");
      range.oninput = () => {
        answers[item.id] = item.kind === "likert"
          ? parseInt(range.value, 10)
          : parseFloat(range.value);
        value.textContent = range.value;
        block.classList.remove("missing");
      };
      if (item.labels?.length === 2) {
        block.append(el("span", "anchor", item.labels[0]));
      }
      block.append(range, value);
      if (item.labels?.length === 2) {
        block.append(el("span", "anchor", item.labels[1]));
      }
    } else if (item.kind === "choice") {
      const select = el("select");
      select.append(el("option", undefined, ""));
      for (const option of item.options ?? []) {
        const node = el("option", undefined, option);
        node.value = option;
        select.append(node);
      }
      select.onchange = () => {
        if (select.value) answers[item.id] = select.value;
        else delete answers[item.id];
        block.classList.remove("missing");
      };
      block.append(select);
    } else {
      const area = el("textarea");
      area.oninput = () => {
        if (area.value) answers[item.id] = area.value;
        else delete answers[item.id];
        block.classList.remove("missing");
      };
      block.append(area);
    }
    form.append(block);
  }

  const submit = el("button", undefined, "Submit");
  submit.type = "submit";
  form.append(submit, problems);

  form.onsubmit = (ev) => {
    ev.preventDefault();
    const found = questionnaireProblems(payload.items, answers);
    if (found.length) {
      problems.replaceChildren(...found.map((p) => el("div", undefined, p)));
      for (const block of form.querySelectorAll<HTMLElement>(".item")) {
        const id = block.dataset.itemId!;
        block.classList.toggle("missing",
          found.some((p) => p.startsWith(`${id}:`)));
      }
      return;
    }
    onSubmit(answers);
  };
  container.append(form);
}
