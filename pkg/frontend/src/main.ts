import { OutgoingMessages } from "./messages.js";
import { connectSession, fetchDemographicFields, fetchProtocolName } from "./net.js";
import type { SessionSocket } from "./net.js";
import { drawScene } from "./render.js";
import { apply, initialState, setConnection } from "./state.js";
import type { ClientSessionState } from "./state.js";
import { renderInspector, renderQuestionnaire, renderSetupMask } from "./ui.js";

const GAZE_INTERVAL_MS = 40; // 25 Hz pointer stream, above the 20 Hz floor

const setupPane = document.getElementById("setup")!;
const stagePane = document.getElementById("stage")!;
const canvas = document.getElementById("scene") as HTMLCanvasElement;
const promptPane = document.getElementById("prompt")!;
const inspectorPane = document.getElementById("inspector")!;
const statusLine = document.getElementById("status")!;
const overlay = document.getElementById("overlay")!;
const inspectorToggle = document.getElementById("toggle-inspector") as HTMLInputElement;

let state: ClientSessionState = initialState();
let socket: SessionSocket | null = null;
let sessionStarted = false;
let lastQuestionnaire: string | null = null;
const out = new OutgoingMessages();
let lastPointer: { x: number; y: number } | null = null;

function repaint() {
  overlay.classList.toggle("visible", state.connection === "closed");
  document.body.classList.toggle("locked", state.connection !== "open");

  if (state.scene) {
    const { geometry } = state.scene;
    canvas.width = geometry.image_width;
    canvas.height = geometry.image_height;
    const ctx = canvas.getContext("2d");
    if (ctx) {
      drawScene(ctx, {
        layout: state.scene.layout,
        geometry,
        trial: state.trial,
        autofocal: state.autofocal,
      });
    }
  }

  if (inspectorToggle.checked) {
    inspectorPane.classList.remove("hidden");
    renderInspector(inspectorPane, state, (command) => {
      socket?.send(out.command(command));
    });
  } else {
    inspectorPane.classList.add("hidden");
  }

  // questionnaire form rebuilds only when a different one arrives, so
  // in-progress answers survive the 20 Hz autofocal repaints
  if (state.questionnaire) {
    const key = state.questionnaire.abbreviation;
    if (lastQuestionnaire !== key) {
      lastQuestionnaire = key;
      renderQuestionnaire(promptPane, state.questionnaire, (answers) => {
        socket?.send(out.questionnaireAnswers(answers));
      });
    }
    promptPane.classList.remove("hidden");
  } else {
    lastQuestionnaire = null;
    if (state.trial) {
      promptPane.replaceChildren();
      promptPane.classList.add("hidden");
    } else {
      promptPane.classList.add("hidden");
    }
  }

  if (state.scene?.status === "finished") {
    statusLine.textContent = "Finished. Thanks!";
  } else if (state.trial) {
    statusLine.textContent =
      "Does the ring's gap match the letter, per the table? M = match, N = no match";
  } else if (state.scene?.status === "running") {
    statusLine.textContent = `Scene: ${state.scene.scene_name}`;
  } else {
    statusLine.textContent = "";
  }
  if (state.lastError && !inspectorToggle.checked) {
    statusLine.textContent += `  [${state.lastError.message}]`;
  }
}

function connect() {
  socket = connectSession(
    (msg) => {
      state = apply(state, msg);
      repaint();
    },
    () => {
      state = setConnection(state, "open");
      repaint();
    },
    () => {
      state = setConnection(state, "closed");
      repaint();
    },
  );
}

canvas.addEventListener("mousemove", (ev) => {
  if (!state.scene) return;
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  if (x >= 0 && y >= 0 && x < canvas.width && y < canvas.height) {
    lastPointer = { x: Math.floor(x), y: Math.floor(y) };
  }
});

setInterval(() => {
  if (!sessionStarted || state.connection !== "open" || !lastPointer) return;
  if (state.scene?.status !== "running") return;
  socket?.send(out.gazePixels(lastPointer.x, lastPointer.y));
}, GAZE_INTERVAL_MS);

document.addEventListener("keydown", (ev) => {
  if (!state.trial || state.connection !== "open") return;
  const key = ev.key.toLowerCase();
  if (key === "m") socket?.send(out.trialResponse("match"));
  else if (key === "n") socket?.send(out.trialResponse("no_match"));
});

inspectorToggle.addEventListener("change", repaint);

async function boot() {
  try {
    const [fields, protocolName] = await Promise.all([
      fetchDemographicFields(),
      fetchProtocolName(),
    ]);
    statusLine.textContent = `Protocol: ${protocolName}`;
    renderSetupMask(setupPane, fields, (subject, demographics) => {
      connect();
      // session_start goes out as soon as the socket opens
      const opened = setInterval(() => {
        if (state.connection === "open") {
          clearInterval(opened);
          socket?.send(out.sessionStart(subject, demographics));
          sessionStarted = true;
          setupPane.classList.add("hidden");
          stagePane.classList.remove("hidden");
        }
      }, 20);
    });
  } catch (err) {
    statusLine.textContent = `Backend unreachable: ${err}`;
  }
}

boot();
