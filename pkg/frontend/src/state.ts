// Console view state: a pure reducer over stream messages and status
// polls. Every panel renders from this object; no therapy state lives
// anywhere else in the UI.

import type {
  CursorBody,
  DaemonStatus,
  PointerBody,
  SafetyCause,
  SafetyStage,
  SessionStatus,
  StreamMessage,
  TelemetryBody,
} from "./types.js";

export const TRAIL_LENGTH = 300;

export interface ConsoleState {
  linkName: string | null;
  linkStatus: "Closed" | "Open" | "Errored";
  linkError: string;
  safety: SafetyStage;
  safetyCause: SafetyCause;
  safetyMessage: string;
  handPresent: boolean;
  torqueNm: number;
  torqueHistory: number[];
  session: SessionStatus | null;
  lastSessionEvent: string;
  endedReason: string | null;
  openGameId: string | null;
  openGameUrl: string | null;
  telemetry: TelemetryBody | null;
  encoderTrail: number[];
  cursor: CursorBody | null;
  lastPointer: PointerBody | null;
  games: string[];
}

export function initialState(): ConsoleState {
  return {
    linkName: null,
    linkStatus: "Closed",
    linkError: "",
    safety: "Disconnected",
    safetyCause: "None",
    safetyMessage: "",
    handPresent: false,
    torqueNm: 0,
    torqueHistory: [],
    session: null,
    lastSessionEvent: "",
    endedReason: null,
    openGameId: null,
    openGameUrl: null,
    telemetry: null,
    encoderTrail: [],
    cursor: null,
    lastPointer: null,
    games: [],
  };
}

// -- derivations the panels render from

export function controlsEnabled(state: ConsoleState): boolean {
  return state.linkStatus === "Open";
}

export function canStartSession(state: ConsoleState): boolean {
  return controlsEnabled(state) && state.safety === "Idle";
}

export function cursorVisible(state: ConsoleState): boolean {
  return state.safety === "Running";
}

export function isPaused(state: ConsoleState): boolean {
  return state.safety === "SafetyPaused";
}

export function linkBanner(state: ConsoleState): string | null {
  if (state.linkStatus === "Errored") return `link error: ${state.linkError}`;
  if (state.safety === "Faulted") return `faulted: ${state.safetyCause}`;
  if (isPaused(state)) return "hands off: session paused";
  return null;
}

// -- reducers (mutate-free)

export function applyStream(state: ConsoleState, message: StreamMessage): ConsoleState {
  switch (message.type) {
    case "telemetry": {
      const trail = state.encoderTrail.concat(message.body.encoder_arm);
      if (trail.length > TRAIL_LENGTH) trail.splice(0, trail.length - TRAIL_LENGTH);
      return {
        ...state,
        telemetry: message.body,
        handPresent: message.body.hand_present,
        encoderTrail: trail,
      };
    }
    case "cursor":
      return { ...state, cursor: message.body };
    case "pointer":
      return { ...state, lastPointer: message.body };
    case "safety":
      return {
        ...state,
        safety: message.body.state,
        safetyCause: message.body.cause,
        safetyMessage: message.body.message ?? "",
      };
    case "session": {
      const body = message.body;
      const next = { ...state, lastSessionEvent: body.event };
      switch (body.event) {
        case "set_torque":
          if (typeof body.torque_nm === "number") {
            next.torqueNm = body.torque_nm;
            next.torqueHistory = state.torqueHistory.concat(body.torque_nm);
          }
          return next;
        case "open_game":
          next.openGameId = body.game_id ?? null;
          next.openGameUrl = body.url ?? null;
          return next;
        case "ended":
          next.endedReason = body.reason ?? "";
          next.session = state.session ? { ...state.session, active: false } : null;
          return next;
        default:
          return next;
      }
    }
  }
}

export function applyStatus(state: ConsoleState, status: DaemonStatus): ConsoleState {
  return {
    ...state,
    linkName: status.link,
    linkStatus: status.link_status,
    linkError: status.link_error,
    safety: status.safety,
    safetyCause: status.safety_cause,
    handPresent: status.hand_present,
    torqueNm: status.torque_nm,
    session: status.session,
    games: status.games,
  };
}
