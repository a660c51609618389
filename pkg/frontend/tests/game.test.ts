import { test } from "node:test";
import assert from "node:assert/strict";

import {
  fireAt,
  newGame,
  nextWave,
  remaining,
  setPaused,
  spawnWave,
  targetCount,
  targetRadius,
} from "../src/game.js";

test("waves are deterministic for a seed", () => {
  const a = spawnWave(640, 360, 2, 42);
  const b = spawnWave(640, 360, 2, 42);
  assert.deepEqual(a, b);
  const c = spawnWave(640, 360, 2, 43);
  assert.notDeepEqual(a, c);
});

test("press on a target hits it, a miss does not", () => {
  let g = newGame(640, 360, 7);
  const target = g.targets[0];
  g = fireAt(g, target.x + target.r - 1, target.y);
  assert.equal(g.hits, 1);
  assert.equal(g.targets[0].hit, true);
  const before = g.hits;
  g = fireAt(g, -50, -50);
  assert.equal(g.hits, before);
  assert.equal(g.shots, 2);
});

test("clearing every target completes the wave", () => {
  let g = newGame(640, 360, 7);
  for (const t of g.targets) {
    g = fireAt(g, t.x, t.y);
  }
  assert.equal(remaining(g), 0);
  assert.equal(g.waveComplete, true);
});

test("no input accepted while paused", () => {
  let g = newGame(640, 360, 7);
  g = setPaused(g, true);
  const target = g.targets[0];
  g = fireAt(g, target.x, target.y);
  assert.equal(g.shots, 0);
  assert.equal(g.hits, 0);
  g = setPaused(g, false);
  g = fireAt(g, target.x, target.y);
  assert.equal(g.hits, 1);
});

test("wave completion raises difficulty", () => {
  let g = newGame(640, 360, 7);
  const count0 = g.targets.length;
  const r0 = g.targets[0].r;
  for (const t of g.targets) g = fireAt(g, t.x, t.y);
  g = nextWave(g);
  assert.equal(g.wave, 1);
  assert.equal(g.targets.length, count0 + 1);
  assert.ok(g.targets[0].r < r0);
  assert.equal(g.waveComplete, false);
});

test("difficulty curve is monotone and radius bottoms out", () => {
  for (let wave = 0; wave < 10; wave++) {
    assert.equal(targetCount(wave + 1), targetCount(wave) + 1);
    assert.ok(targetRadius(wave + 1) <= targetRadius(wave));
    assert.ok(targetRadius(wave) >= 12);
  }
});
