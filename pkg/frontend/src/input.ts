/**
 * Keyboard mapping. Arrows/WASD move (hold two directions for a diagonal),
 * E picks the nearest object still on the floor, Q places the selected
 * inventory item, Tab switches the selected slot. The caller sends the
 * returned intent to the server; nothing is rendered optimistically.
 */

import { ClientView } from "./state.js";

export type Direction = "E" | "NE" | "N" | "NW" | "W" | "SW" | "S" | "SE";

export type ActionIntent =
  | { kind: "move"; direction: Direction }
  | { kind: "pick"; object_id: string }
  | { kind: "place"; object_id: string };

const KEY_AXES: Record<string, [number, number]> = {
  arrowup: [0, -1],
  w: [0, -1],
  arrowdown: [0, 1],
  s: [0, 1],
  arrowleft: [-1, 0],
  a: [-1, 0],
  arrowright: [1, 0],
  d: [1, 0],
};

const DIRECTIONS: Record<string, Direction> = {
  "1,0": "E",
  "1,-1": "NE",
  "0,-1": "N",
  "-1,-1": "NW",
  "-1,0": "W",
  "-1,1": "SW",
  "0,1": "S",
  "1,1": "SE",
};

export function isMovementKey(key: string): boolean {
  return key.toLowerCase() in KEY_AXES;
}

/** Combined compass direction of all held movement keys, if any. */
export function directionFromKeys(pressed: Set<string>): Direction | null {
  let dx = 0;
  let dy = 0;
  for (const key of pressed) {
    const axis = KEY_AXES[key.toLowerCase()];
    if (axis) {
      dx += axis[0];
      dy += axis[1];
    }
  }
  dx = Math.max(-1, Math.min(1, dx));
  dy = Math.max(-1, Math.min(1, dy));
  return DIRECTIONS[`${dx},${dy}`] ?? null;
}

function nearestFloorObject(view: ClientView): string | null {
  const snap = view.snapshot;
  const scenario = view.scenario;
  if (!snap || !scenario) return null;
  const [ax, ay] = snap.position;
  let best: { id: string; d: number } | null = null;
  for (const obj of scenario.objects) {
    if (snap.objects[obj.id] !== "at_pickup") continue;
    const d = Math.hypot(obj.x - ax, obj.y - ay);
    if (best === null || d < best.d || (d === best.d && obj.id < best.id)) {
      best = { id: obj.id, d };
    }
  }
  return best?.id ?? null;
}

/**
 * Intent for one keydown given the currently held keys. Returns null when
 * the key does nothing (no session, task done, empty slot, no object).
 */
export function intentForKey(
  key: string,
  pressed: Set<string>,
  view: ClientView,
): ActionIntent | null {
  if (!view.snapshot || view.snapshot.done || view.connection !== "open") {
    return null;
  }
  const lower = key.toLowerCase();
  if (lower in KEY_AXES) {
    const direction = directionFromKeys(new Set([...pressed, key]));
    return direction ? { kind: "move", direction } : null;
  }
  if (lower === "e") {
    const id = nearestFloorObject(view);
    return id ? { kind: "pick", object_id: id } : null;
  }
  if (lower === "q") {
    const held = view.snapshot.knapsack[view.selectedSlot];
    return held ? { kind: "place", object_id: held } : null;
  }
  return null;
}
