import { describe, expect, it } from "vitest";

import { directionFromKeys, intentForKey } from "../src/input.js";
import { ClientStore } from "../src/state.js";
import { loadScriptedServer } from "./fixtures.js";

const scripted = loadScriptedServer();

function openStore(): ClientStore {
  const store = new ClientStore();
  store.setConnection("open");
  store.applyServerFrame(scripted.starts.optimal);
  return store;
}

describe("directionFromKeys", () => {
  it("maps single keys (wasd and arrows)", () => {
    expect(directionFromKeys(new Set(["w"]))).toBe("N");
    expect(directionFromKeys(new Set(["ArrowDown"]))).toBe("S");
    expect(directionFromKeys(new Set(["a"]))).toBe("W");
    expect(directionFromKeys(new Set(["ArrowRight"]))).toBe("E");
  });

  it("combines two held keys into a diagonal", () => {
    expect(directionFromKeys(new Set(["w", "d"]))).toBe("NE");
    expect(directionFromKeys(new Set(["ArrowDown", "ArrowLeft"]))).toBe("SW");
  });

  it("cancels opposing keys", () => {
    expect(directionFromKeys(new Set(["w", "s"]))).toBeNull();
  });
});

describe("intentForKey", () => {
  it("movement keys produce move intents", () => {
    const store = openStore();
    expect(intentForKey("d", new Set(), store.view)).toEqual({
      kind: "move",
      direction: "E",
    });
  });

  it("E picks the nearest object still on the floor", () => {
    const store = openStore();
    const intent = intentForKey("e", new Set(), store.view);
    expect(intent?.kind).toBe("pick");
    const snap = store.view.snapshot!;
    const [ax, ay] = snap.position;
    const dist = (id: string) => {
      const obj = store.view.scenario!.objects.find((o) => o.id === id)!;
      return Math.hypot(obj.x - ax, obj.y - ay);
    };
    const chosen = (intent as any).object_id as string;
    for (const obj of store.view.scenario!.objects) {
      expect(dist(chosen)).toBeLessThanOrEqual(dist(obj.id));
    }
  });

  it("Q places the selected inventory item only when holding one", () => {
    const store = openStore();
    expect(intentForKey("q", new Set(), store.view)).toBeNull();
    store.view.snapshot!.knapsack = ["obj_003"];
    expect(intentForKey("q", new Set(), store.view)).toEqual({
      kind: "place",
      object_id: "obj_003",
    });
  });

  it("drops keystrokes while disconnected or finished", () => {
    const store = openStore();
    store.setConnection("closed");
    expect(intentForKey("d", new Set(), store.view)).toBeNull();
    store.setConnection("open");
    store.view.snapshot!.done = true;
    expect(intentForKey("d", new Set(), store.view)).toBeNull();
  });
});
