import { test } from "node:test";
import assert from "node:assert/strict";

import {
  applyStatus,
  applyStream,
  canStartSession,
  controlsEnabled,
  cursorVisible,
  initialState,
  isPaused,
  linkBanner,
  TRAIL_LENGTH,
} from "../src/state.js";
import type { DaemonStatus, StreamMessage } from "../src/types.js";

function telemetry(encoder: number, hand = true): StreamMessage {
  return {
    type: "telemetry",
    t_us: 0,
    body: {
      seq: 0, timestamp_us: 0, encoder_arm: encoder, encoder_motor: encoder * 20,
      trigger_pressed: false, hand_present: hand, torque_actual_cnm: 0,
    },
  };
}

function safety(state: "Running" | "SafetyPaused" | "Idle" | "Faulted",
                cause = "None"): StreamMessage {
  return { type: "safety", t_us: 0, body: { state, cause: cause as never } };
}

function baseStatus(overrides: Partial<DaemonStatus> = {}): DaemonStatus {
  return {
    link: "simulator", link_status: "Open", link_error: "", safety: "Idle",
    safety_cause: "None", hand_present: true, torque_nm: 0, session: null,
    stream_clients: 1, last_frame_age_ms: 5, stats: {}, games: ["game1", "game2"],
    game_urls: {},
    ...overrides,
  };
}

test("initial state shows nothing and disables controls", () => {
  const s = initialState();
  assert.equal(controlsEnabled(s), false);
  assert.equal(canStartSession(s), false);
  assert.equal(cursorVisible(s), false);
  assert.equal(linkBanner(s), null);
});

test("status poll drives connect panel state", () => {
  const s = applyStatus(initialState(), baseStatus());
  assert.equal(controlsEnabled(s), true);
  assert.equal(canStartSession(s), true);
  assert.equal(s.linkName, "simulator");
});

test("rendered safety state equals the last safety event received", () => {
  let s = applyStatus(initialState(), baseStatus());
  s = applyStream(s, safety("Running"));
  assert.equal(s.safety, "Running");
  s = applyStream(s, safety("SafetyPaused", "HandOff"));
  assert.equal(s.safety, "SafetyPaused");
  assert.equal(s.safetyCause, "HandOff");
  assert.equal(isPaused(s), true);
  assert.match(linkBanner(s)!, /hands off/);
});

test("cursor marker hidden unless Running", () => {
  let s = applyStatus(initialState(), baseStatus());
  s = applyStream(s, { type: "cursor", t_us: 1, body: { x: 10, y: 20, inside_workspace: true } });
  assert.equal(cursorVisible(s), false);  // still Idle
  s = applyStream(s, safety("Running"));
  assert.equal(cursorVisible(s), true);
  s = applyStream(s, safety("SafetyPaused", "HandOff"));
  assert.equal(cursorVisible(s), false); // frozen during the pause
  assert.deepEqual(s.cursor, { x: 10, y: 20, inside_workspace: true });
});

test("torque chip follows set_torque session events", () => {
  let s = applyStatus(initialState(), baseStatus());
  for (const nm of [8, 16, 8, 16]) {
    s = applyStream(s, { type: "session", t_us: 0, body: { event: "set_torque", torque_nm: nm } });
  }
  assert.equal(s.torqueNm, 16);
  assert.deepEqual(s.torqueHistory, [8, 16, 8, 16]);
});

test("telemetry feeds the sparkline trail with a cap", () => {
  let s = initialState();
  for (let i = 0; i < TRAIL_LENGTH + 50; i++) {
    s = applyStream(s, telemetry(i));
  }
  assert.equal(s.encoderTrail.length, TRAIL_LENGTH);
  assert.equal(s.encoderTrail.at(-1), TRAIL_LENGTH + 49);
  assert.equal(s.handPresent, true);
});

test("errored link raises the banner", () => {
  const s = applyStatus(
    initialState(),
    baseStatus({ link_status: "Errored", link_error: "port vanished", safety: "Disconnected" }),
  );
  assert.match(linkBanner(s)!, /port vanished/);
  assert.equal(controlsEnabled(s), false);
});

test("session ended event marks the session inactive", () => {
  let s = applyStatus(initialState(), baseStatus({
    session: {
      session_id: "s1", subject_id: "p", active: true, paused: false,
      end_reason: null, active_time_s: 10, block_index: 0, block_count: 4,
      game_id: "game1", torque_nm: 8, levels_passed: 0, levels_to_advance: 2,
    },
  }));
  s = applyStream(s, { type: "session", t_us: 9, body: { event: "ended", reason: "plan completed" } });
  assert.equal(s.session?.active, false);
  assert.equal(s.endedReason, "plan completed");
});

test("open_game event carries the game and optional url", () => {
  let s = initialState();
  s = applyStream(s, {
    type: "session", t_us: 0,
    body: { event: "open_game", game_id: "game2", url: "https://example.test/g2" },
  });
  assert.equal(s.openGameId, "game2");
  assert.equal(s.openGameUrl, "https://example.test/g2");
});
