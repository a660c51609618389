// Demo target-shooting game, logic only (the canvas renderer lives in
// main.ts). The streamed cursor aims, a pointer Press fires, and clearing
// a wave raises the difficulty: more targets, smaller radius.

export interface Target {
  x: number;
  y: number;
  r: number;
  hit: boolean;
}

export interface GameState {
  width: number;
  height: number;
  wave: number;
  targets: Target[];
  shots: number;
  hits: number;
  waveComplete: boolean;
  paused: boolean;
  seed: number;
}

// deterministic PRNG so waves are reproducible in tests
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function targetCount(wave: number): number {
  return 3 + wave;
}

export function targetRadius(wave: number): number {
  return Math.max(12, 30 - 4 * wave);
}

export function spawnWave(width: number, height: number, wave: number, seed: number): Target[] {
  const rand = mulberry32(seed + wave * 7919);
  const r = targetRadius(wave);
  const targets: Target[] = [];
  for (let i = 0; i < targetCount(wave); i++) {
    targets.push({
      x: r + rand() * (width - 2 * r),
      y: r + rand() * (height - 2 * r),
      r,
      hit: false,
    });
  }
  return targets;
}

export function newGame(width: number, height: number, seed = 1): GameState {
  return {
    width,
    height,
    wave: 0,
    targets: spawnWave(width, height, 0, seed),
    shots: 0,
    hits: 0,
    waveComplete: false,
    paused: false,
    seed,
  };
}

export function setPaused(state: GameState, paused: boolean): GameState {
  return { ...state, paused };
}

export function fireAt(state: GameState, x: number, y: number): GameState {
  if (state.paused || state.waveComplete) return state; // no input while paused
  let hits = state.hits;
  const targets = state.targets.map((t) => {
    if (!t.hit && Math.hypot(t.x - x, t.y - y) <= t.r) {
      hits += 1;
      return { ...t, hit: true };
    }
    return t;
  });
  return {
    ...state,
    targets,
    shots: state.shots + 1,
    hits,
    waveComplete: targets.every((t) => t.hit),
  };
}

export function nextWave(state: GameState): GameState {
  const wave = state.wave + 1;
  return {
    ...state,
    wave,
    targets: spawnWave(state.width, state.height, wave, state.seed),
    waveComplete: false,
  };
}

export function remaining(state: GameState): number {
  return state.targets.filter((t) => !t.hit).length;
}
