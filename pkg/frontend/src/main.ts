/** Boot: start overlay -> websocket session -> render loop. */

import { SessionClient } from "./client.js";
import { intentForKey, isMovementKey } from "./input.js";
import { ScenarioDoc } from "./protocol.js";
import { drawWorld, HudElements, renderHud } from "./render.js";
import { deriveLayers } from "./viewmodel.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function fetchScenario(difficulty: number, seed: number): Promise<ScenarioDoc> {
  const response = await fetch(`scenario.json?n=${difficulty}&seed=${seed}`);
  if (!response.ok) throw new Error(`scenario fetch failed: ${response.status}`);
  return (await response.json()) as ScenarioDoc;
}

async function run(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("world");
  const ctx = canvas.getContext("2d")!;
  const hud: HudElements = {
    message: el("message-bar"),
    status: el("status"),
    checklist: el("checklist"),
    inventory: el("inventory"),
    endScreen: el("end-screen"),
  };
  const overlay = el("start-overlay");
  const banner = el("banner");

  const client = new SessionClient();
  const pressed = new Set<string>();

  const redraw = () => {
    const view = client.store.view;
    const layers = deriveLayers(view);
    if (view.map) drawWorld(ctx, view.map, layers);
    renderHud(layers, view.metrics, hud);
    if (layers.done && !view.metrics) {
      finishButton.hidden = false;
    }
  };
  client.store.onChange(() => requestAnimationFrame(redraw));

  const finishButton = el<HTMLButtonElement>("finish");
  finishButton.onclick = () => client.finish();

  el<HTMLButtonElement>("start").onclick = async () => {
    const fidelity = el<HTMLSelectElement>("fidelity").value;
    const difficulty = parseInt(el<HTMLSelectElement>("difficulty").value, 10);
    overlay.hidden = true;
    banner.hidden = true;
    try {
      const scenario = await fetchScenario(difficulty, 7);
      const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
      await client.connect(wsUrl);
      client.start(scenario, fidelity);
    } catch (err) {
      banner.textContent = `Connection failed: ${err}`;
      banner.hidden = false;
      overlay.hidden = false;
    }
  };

  window.addEventListener("keydown", (event) => {
    if (!client.store.view.sessionId) return;
    if (event.key === "Tab") {
      event.preventDefault();
      client.store.toggleSlot();
      return;
    }
    const intent = intentForKey(event.key, pressed, client.store.view);
    if (isMovementKey(event.key)) pressed.add(event.key);
    if (intent) {
      event.preventDefault();
      client.action(intent);
    }
  });
  window.addEventListener("keyup", (event) => pressed.delete(event.key));
}

run().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = String(err);
    banner.hidden = false;
  }
});
