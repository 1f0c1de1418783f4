import type {
  AutofocalStatePayload,
  ErrorPayload,
  QuestionnairePresentPayload,
  SceneStatePayload,
  ServerMessage,
  TrialPresentPayload,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

/** Everything the UI renders. Only server messages mutate it (plus the
 *  connection flag), so a reload that reconnects and receives the current
 *  scene_state lands in exactly the state it left. */
export interface ClientSessionState {
  connection: Connection;
  scene: SceneStatePayload | null;
  trial: TrialPresentPayload | null;
  questionnaire: QuestionnairePresentPayload | null;
  autofocal: AutofocalStatePayload | null;
  lastError: ErrorPayload | null;
}

export function initialState(): ClientSessionState {
  return {
    connection: "connecting",
    scene: null,
    trial: null,
    questionnaire: null,
    autofocal: null,
    lastError: null,
  };
}

/** Pure reducer; returns a new state, never mutates. A scene_state clears
 *  any pending prompt (the server re-presents whatever the scene owes), and
 *  trial_present / questionnaire_present displace each other, so at most one
 *  interactive prompt is ever pending. */
export function apply(state: ClientSessionState, msg: ServerMessage): ClientSessionState {
  switch (msg.type) {
    case "scene_state":
      return { ...state, scene: msg.payload, trial: null, questionnaire: null };
    case "trial_present":
      return { ...state, trial: msg.payload, questionnaire: null, lastError: null };
    case "questionnaire_present":
      return { ...state, questionnaire: msg.payload, trial: null };
    case "autofocal_state":
      return { ...state, autofocal: msg.payload };
    case "error":
      return { ...state, lastError: msg.payload };
    default:
      return state;
  }
}

export function setConnection(state: ClientSessionState, connection: Connection): ClientSessionState {
  return { ...state, connection };
}

export function pendingPrompt(state: ClientSessionState): "trial" | "questionnaire" | null {
  if (state.trial) return "trial";
  if (state.questionnaire) return "questionnaire";
  return null;
}

/** 3.3333 D reads as "0.30 m"; at or beyond infinity there is no distance. */
export function formatFocusDistance(focusDistance: number | null): string {
  if (focusDistance === null) return "beyond infinity";
  return `${focusDistance.toFixed(2)} m`;
}
