// Wire types for the session protocol (see docs/protocol.md in the Python
// package). The server is authoritative; everything here just names what it
// sends and what we send back.

export interface Envelope<T = Record<string, unknown>> {
  type: string;
  seq: number;
  timestamp: number;
  payload: T;
}

export interface ScreenInfo {
  name: string;
  distance: number;
  angular_size: number;
  lateral_offset: number;
}

export interface LayoutInfo {
  screens: ScreenInfo[];
  background_depth: number;
}

export interface GeometryInfo {
  horizontal_fov: number;
  image_width: number;
  image_height: number;
}

export interface SceneStatePayload {
  status: "idle" | "running" | "finished";
  scene: string | null;
  parameter: string | null;
  scene_name: string | null;
  position: number | null;
  total: number;
  n_trials?: number;
  trials_done?: number;
  layout: LayoutInfo;
  geometry: GeometryInfo;
}

export interface PlacementInfo {
  anchor: string;
  jitter: [number, number];
}

export interface TrialPresentPayload {
  trial_id: number;
  table_screen: number;
  landolt_screen: number;
  sloan_screen: number;
  landolt_orientation: number;
  sloan_letter: string;
  table: Record<string, string>;
  placements: Record<string, PlacementInfo>;
  optotype_gap_arcmin: number;
}

export interface ScreenBlur {
  screen: string;
  distance: number;
  major_arcmin: number;
  minor_arcmin: number;
  orientation: number;
}

export interface AutofocalStatePayload {
  lens_power: number;
  target_vergence: number;
  focus_distance: number | null;
  algorithm: string;
  per_screen_blur: ScreenBlur[];
}

export interface QuestionnaireItem {
  id: string;
  kind: "likert" | "choice" | "free_text" | "slider";
  text: string;
  required: boolean;
  min?: number;
  max?: number;
  options?: string[];
  step?: number;
  labels?: string[];
}

export interface QuestionnairePresentPayload {
  name: string;
  abbreviation: string;
  items: QuestionnaireItem[];
}

export interface ErrorPayload {
  message: string;
  seq: number | null;
}

export interface DemographicFieldInfo {
  id: string;
  label: string;
  type: "text" | "integer" | "choice";
  options: string[];
  required: boolean;
}

export type ServerMessage =
  | Envelope<SceneStatePayload> & { type: "scene_state" }
  | Envelope<TrialPresentPayload> & { type: "trial_present" }
  | Envelope<QuestionnairePresentPayload> & { type: "questionnaire_present" }
  | Envelope<AutofocalStatePayload> & { type: "autofocal_state" }
  | Envelope<ErrorPayload> & { type: "error" };
