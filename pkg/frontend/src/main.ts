// DOM wiring: every panel renders from the ConsoleState reducer and calls
// the daemon API; nothing here owns therapy state.

import { ApiClient, ApiError } from "./api.js";
import { connectStream } from "./stream.js";
import {
  applyStatus,
  applyStream,
  canStartSession,
  controlsEnabled,
  cursorVisible,
  initialState,
  isPaused,
  linkBanner,
  type ConsoleState,
} from "./state.js";
import { fireAt, newGame, nextWave, remaining, setPaused, type GameState } from "./game.js";
import { LEVELS, LEVEL_LABELS, TABLE_HEADER, canSubmit, summaryRows } from "./survey.js";
import type { CalibrationInfo, Questionnaire, StreamMessage, SurveySummary } from "./types.js";

const api = new ApiClient("");
let state: ConsoleState = initialState();
let calibration: CalibrationInfo | null = null;
let questionnaire: Questionnaire | null = null;
let summary: SurveySummary | null = null;
let game: GameState = newGame(640, 360, Date.now() & 0xffff);
const surveyAnswers: Record<string, string> = {};

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const portSelect = $<HTMLSelectElement>("port-select");
const gameCanvas = $<HTMLCanvasElement>("game-canvas");
const gaugeCanvas = $<HTMLCanvasElement>("gauge");
const previewCanvas = $<HTMLCanvasElement>("screen-preview");
const sparkCanvas = $<HTMLCanvasElement>("sparkline");

function setError(id: string, err: unknown): void {
  $(id).textContent =
    err instanceof ApiError ? `${err.code}: ${err.message}` :
    err ? String(err) : "";
}

// -- stream and status feeds

function onStream(message: StreamMessage): void {
  state = applyStream(state, message);
  if (message.type === "pointer" && message.body.kind === "Press"
      && message.body.x !== null && message.body.y !== null) {
    const { x, y } = toGameCoords(message.body.x, message.body.y);
    game = fireAt(game, x, y);
  }
  if (message.type === "safety") {
    game = setPaused(game, message.body.state !== "Running");
  }
  if (message.type === "session" && message.body.event === "ended") {
    void refreshStatus();
  }
  render();
}

async function refreshStatus(): Promise<void> {
  try {
    state = applyStatus(state, await api.status());
  } catch {
    state = { ...state, linkStatus: "Errored", linkError: "daemon unreachable" };
  }
  render();
}

async function refreshPorts(): Promise<void> {
  const { ports } = await api.ports();
  portSelect.replaceChildren(
    ...ports.map((p) => {
      const option = document.createElement("option");
      option.value = p.name;
      option.textContent = `${p.name} (${p.descriptor})`;
      return option;
    }),
  );
}

// -- coordinate mapping between daemon screen-rect and canvases

function rect() {
  const sr = (calibration?.screen_rect ?? { x: 0, y: 0, width: 1280, height: 720 }) as
    { x: number; y: number; width: number; height: number };
  return sr;
}

function toGameCoords(x: number, y: number): { x: number; y: number } {
  const sr = rect();
  return {
    x: ((x - sr.x) / sr.width) * gameCanvas.width,
    y: ((y - sr.y) / sr.height) * gameCanvas.height,
  };
}

// -- renderers

function render(): void {
  const enabled = controlsEnabled(state);
  const banner = linkBanner(state);
  const bannerEl = $("banner");
  bannerEl.classList.toggle("hidden", banner === null);
  bannerEl.textContent = banner ?? "";

  $("link-label").textContent = state.linkName ?? state.linkStatus;
  $("safety-label").textContent = state.safety;
  $("hand-label").textContent = state.handPresent ? "on grip" : "off";

  $<HTMLButtonElement>("connect-btn").disabled = enabled;
  $<HTMLButtonElement>("disconnect-btn").disabled = !enabled;
  $<HTMLButtonElement>("cal-start").disabled = !enabled;
  $<HTMLButtonElement>("cal-commit").disabled = !enabled;

  const session = state.session;
  const sessionActive = session?.active === true;
  $<HTMLButtonElement>("start-session").disabled = !canStartSession(state) || sessionActive;
  $<HTMLButtonElement>("stop-session").disabled = !enabled || !sessionActive;
  $<HTMLButtonElement>("level-passed").disabled = !enabled || !sessionActive;
  const torqueOk = enabled && state.safety === "Running";
  $<HTMLButtonElement>("torque-8").disabled = !torqueOk;
  $<HTMLButtonElement>("torque-16").disabled = !torqueOk;
  $<HTMLButtonElement>("open-game").disabled = !state.openGameUrl;

  $("block-chip").textContent = sessionActive
    ? `block ${(session!.block_index ?? 0) + 1}/${session!.block_count} · ${session!.game_id}`
    : state.endedReason ? `ended: ${state.endedReason}` : "no session";
  $("torque-chip").textContent = `${state.torqueNm} N·m`;
  $("level-chip").textContent = sessionActive
    ? `levels ${session!.levels_passed}/${session!.levels_to_advance}` : "";
  $("time-chip").textContent = sessionActive
    ? `active ${session!.active_time_s.toFixed(0)} s` : "";

  $("game-panel").classList.toggle("paused", isPaused(state) || !cursorVisible(state));
  $("wave-label").textContent = `wave ${game.wave + 1}`;
  $("game-score").textContent =
    `targets left: ${remaining(game)} · shots: ${game.shots} · hits: ${game.hits}`;
  $("confirm-wave").classList.toggle("hidden", !game.waveComplete);

  renderSurvey();
}

function drawGauge(): void {
  const ctx = gaugeCanvas.getContext("2d")!;
  const { width, height } = gaugeCanvas;
  ctx.clearRect(0, 0, width, height);
  const cx = width / 2;
  const cy = height - 15;
  const radius = 90;
  ctx.strokeStyle = "#2b3a4c";
  ctx.lineWidth = 8;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, Math.PI, 2 * Math.PI);
  ctx.stroke();

  const t = state.telemetry;
  if (t && calibration) {
    const lo = calibration.ticks_min;
    const hi = calibration.ticks_max;
    const u = Math.min(1, Math.max(0, (t.encoder_arm - lo) / (hi - lo)));
    const angle = Math.PI + u * Math.PI;
    ctx.strokeStyle = state.handPresent ? "#46c46f" : "#b84b4b";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + radius * 0.9 * Math.cos(angle), cy + radius * 0.9 * Math.sin(angle));
    ctx.stroke();
    ctx.fillStyle = "#a8b6c6";
    ctx.font = "11px system-ui";
    ctx.textAlign = "center";
    ctx.fillText(`${t.encoder_arm} ticks`, cx, cy + 12);
  }
}

function drawPreview(): void {
  const ctx = previewCanvas.getContext("2d")!;
  const { width, height } = previewCanvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#2b3a4c";
  ctx.strokeRect(1, 1, width - 2, height - 2);
  if (state.cursor && cursorVisible(state)) {
    const sr = rect();
    const x = ((state.cursor.x - sr.x) / sr.width) * width;
    const y = ((state.cursor.y - sr.y) / sr.height) * height;
    ctx.fillStyle = state.cursor.inside_workspace ? "#5fb2ff" : "#ffb54f";
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawSparkline(): void {
  const ctx = sparkCanvas.getContext("2d")!;
  const { width, height } = sparkCanvas;
  ctx.clearRect(0, 0, width, height);
  const trail = state.encoderTrail;
  if (trail.length < 2 || !calibration) return;
  const lo = calibration.ticks_min;
  const hi = calibration.ticks_max;
  ctx.strokeStyle = "#5fb2ff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  trail.forEach((ticks, i) => {
    const x = (i / (trail.length - 1)) * width;
    const u = Math.min(1, Math.max(0, (ticks - lo) / (hi - lo)));
    const y = height - 5 - u * (height - 10);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function drawGame(): void {
  const ctx = gameCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, gameCanvas.width, gameCanvas.height);
  for (const target of game.targets) {
    ctx.beginPath();
    ctx.arc(target.x, target.y, target.r, 0, 2 * Math.PI);
    ctx.fillStyle = target.hit ? "#23402c" : "#c0392b";
    ctx.fill();
    if (!target.hit) {
      ctx.beginPath();
      ctx.arc(target.x, target.y, target.r * 0.45, 0, 2 * Math.PI);
      ctx.fillStyle = "#f5f5f5";
      ctx.fill();
    }
  }
  if (state.cursor && cursorVisible(state)) {
    const { x, y } = toGameCoords(state.cursor.x, state.cursor.y);
    ctx.strokeStyle = "#5fb2ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 10, 0, 2 * Math.PI);
    ctx.moveTo(x - 14, y);
    ctx.lineTo(x + 14, y);
    ctx.moveTo(x, y - 14);
    ctx.lineTo(x, y + 14);
    ctx.stroke();
  }
}

function animate(): void {
  drawGauge();
  drawPreview();
  drawSparkline();
  drawGame();
  requestAnimationFrame(animate);
}

// -- survey panel

function renderSurveyForm(): void {
  if (!questionnaire) return;
  const grid = document.createElement("div");
  grid.className = "survey-grid";
  grid.append(
    Object.assign(document.createElement("span"), { textContent: "" }),
    ...LEVELS.map((level) =>
      Object.assign(document.createElement("span"), {
        textContent: LEVEL_LABELS[level], className: "qhead",
      })),
  );
  for (const category of questionnaire.categories) {
    for (const [i, qid] of category.questions.entries()) {
      const label = document.createElement("span");
      label.textContent = category.questions.length > 1
        ? `${category.name} (${i + 1})` : category.name;
      grid.append(label);
      for (const level of LEVELS) {
        const holder = document.createElement("label");
        const radio = document.createElement("input");
        radio.type = "radio";
        radio.name = qid;
        radio.value = level;
        radio.addEventListener("change", () => {
          surveyAnswers[qid] = level;
          render();
        });
        holder.append(radio);
        grid.append(holder);
      }
    }
  }
  $("survey-form").replaceChildren(grid);
}

function renderSurvey(): void {
  if (questionnaire) {
    $<HTMLButtonElement>("survey-submit").disabled = !canSubmit(questionnaire, surveyAnswers);
  }
  const table = $<HTMLTableElement>("survey-table");
  const head = document.createElement("tr");
  head.append(...TABLE_HEADER.map((h) =>
    Object.assign(document.createElement("th"), { textContent: h })));
  const rows = summaryRows(summary).map((cells) => {
    const tr = document.createElement("tr");
    tr.append(...cells.map((c) =>
      Object.assign(document.createElement("td"), { textContent: c })));
    return tr;
  });
  table.replaceChildren(head, ...rows);
}

async function refreshSummary(): Promise<void> {
  try {
    summary = await api.surveySummary();
  } catch {
    summary = null;
  }
  render();
}

// -- actions

function wireActions(): void {
  $("refresh-ports").addEventListener("click", () => void refreshPorts());
  $("connect-btn").addEventListener("click", async () => {
    setError("connect-error", "");
    try {
      state = applyStatus(state, await api.connect(portSelect.value));
      calibration = await api.calibration();
    } catch (err) {
      setError("connect-error", err);
    }
    render();
  });
  $("disconnect-btn").addEventListener("click", async () => {
    try {
      state = applyStatus(state, await api.disconnect());
    } catch (err) {
      setError("connect-error", err);
    }
    render();
  });
  $("cal-start").addEventListener("click", () => void api.calibrationAction("start"));
  $("cal-commit").addEventListener("click", async () => {
    try {
      await api.calibrationAction("commit");
      calibration = await api.calibration();
      $("cal-info").textContent =
        `range ${calibration.ticks_min}..${calibration.ticks_max}`;
    } catch (err) {
      setError("connect-error", err);
    }
  });

  $("start-session").addEventListener("click", async () => {
    setError("session-error", "");
    try {
      await api.startSession($<HTMLInputElement>("subject-input").value || "subject");
      game = newGame(gameCanvas.width, gameCanvas.height, Date.now() & 0xffff);
      await refreshStatus();
    } catch (err) {
      setError("session-error", err);
    }
  });
  $("stop-session").addEventListener("click", async () => {
    try {
      await api.stopSession();
      await refreshStatus();
    } catch (err) {
      setError("session-error", err);
    }
  });
  $("level-passed").addEventListener("click", async () => {
    try {
      await api.levelPassed("UIManual");
      await refreshStatus();
    } catch (err) {
      setError("session-error", err);
    }
  });
  $("torque-8").addEventListener("click", () => void api.setTorque(8).catch(() => {}));
  $("torque-16").addEventListener("click", () => void api.setTorque(16).catch(() => {}));
  $("open-game").addEventListener("click", () => {
    if (state.openGameUrl) window.open(state.openGameUrl, "_blank");
  });

  $("confirm-wave").addEventListener("click", async () => {
    game = nextWave(game);
    try {
      await api.levelPassed("GameHook");
      await refreshStatus();
    } catch (err) {
      setError("session-error", err);
    }
    render();
  });

  $("survey-submit").addEventListener("click", async () => {
    if (!questionnaire) return;
    const subject = $<HTMLInputElement>("survey-subject").value || "anonymous";
    try {
      await api.submitSurvey(subject, { ...surveyAnswers });
      $("survey-status").textContent = `saved response for ${subject}`;
      for (const key of Object.keys(surveyAnswers)) delete surveyAnswers[key];
      $("survey-form")
        .querySelectorAll<HTMLInputElement>("input[type=radio]")
        .forEach((radio) => { radio.checked = false; });
      await refreshSummary();
    } catch (err) {
      $("survey-status").textContent = String(err);
    }
  });
}

async function boot(): Promise<void> {
  wireActions();
  await refreshPorts().catch(() => {});
  await refreshStatus();
  try {
    calibration = await api.calibration();
  } catch { /* daemon may be disconnected */ }
  try {
    questionnaire = await api.questionnaire();
    renderSurveyForm();
  } catch { /* survey panel stays empty */ }
  await refreshSummary();
  connectStream("/api/stream", {
    onMessage: onStream,
    onStatusChange: (connected) => {
      if (!connected) void refreshStatus();
    },
  });
  setInterval(() => void refreshStatus(), 1000);
  animate();
}

void boot();
