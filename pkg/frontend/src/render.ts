/**
 * Canvas and HUD rendering. Pure consumption of derived layers; no task
 * logic lives here.
 */

import { Layers } from "./viewmodel.js";
import { MapData } from "./protocol.js";

export const CELL = 26;

const PALETTE: Record<string, string> = {
  dishes: "#4f9dde",
  toys: "#e0607e",
  books: "#b0813f",
  laundry: "#7f62c3",
  office_supplies: "#3fae8a",
  recycling: "#8a9a2f",
};

const ROOM_TINTS = ["#f4efe8", "#ece4f0", "#e8f0e6", "#f0e8e4", "#e4ecf0", "#f0eee0"];

export function colorFor(category: string): string {
  return PALETTE[category] ?? "#888";
}

function roomTint(map: MapData, x: number, y: number): string {
  if (!map.room_rows || !map.room_names) return "#f2efe9";
  const glyph = map.room_rows[y][x];
  const names = Object.keys(map.room_names).sort();
  const idx = names.indexOf(glyph);
  return idx >= 0 ? ROOM_TINTS[idx % ROOM_TINTS.length] : "#f2efe9";
}

export function drawWorld(ctx: CanvasRenderingContext2D, map: MapData, layers: Layers): void {
  ctx.canvas.width = map.width * CELL;
  ctx.canvas.height = map.height * CELL;
  for (let y = 0; y < map.height; y++) {
    for (let x = 0; x < map.width; x++) {
      const blocked = map.rows[y][x] === "#";
      ctx.fillStyle = blocked ? "#4a453f" : roomTint(map, x, y);
      ctx.fillRect(x * CELL, y * CELL, CELL, CELL);
    }
  }
  ctx.strokeStyle = "rgba(0,0,0,0.05)";
  for (let x = 0; x <= map.width; x++) {
    ctx.beginPath();
    ctx.moveTo(x * CELL, 0);
    ctx.lineTo(x * CELL, map.height * CELL);
    ctx.stroke();
  }
  for (let y = 0; y <= map.height; y++) {
    ctx.beginPath();
    ctx.moveTo(0, y * CELL);
    ctx.lineTo(map.width * CELL, y * CELL);
    ctx.stroke();
  }

  // breadcrumbs under entities: dotted trail shrinking toward the target
  if (layers.breadcrumbs) {
    const pts = layers.breadcrumbs.points;
    pts.forEach(([x, y], i) => {
      const t = pts.length > 1 ? i / (pts.length - 1) : 0;
      const radius = CELL * (0.3 - 0.18 * t);
      ctx.fillStyle = "rgba(220, 60, 50, 0.85)";
      ctx.beginPath();
      ctx.arc((x + 0.5) * CELL, (y + 0.5) * CELL, Math.max(2, radius), 0, Math.PI * 2);
      ctx.fill();
    });
  }

  for (const bin of layers.bins) {
    const px = bin.x * CELL;
    const py = bin.y * CELL;
    ctx.fillStyle = colorFor(bin.category);
    ctx.fillRect(px + 3, py + 3, CELL - 6, CELL - 6);
    ctx.strokeStyle = "#222";
    ctx.strokeRect(px + 3, py + 3, CELL - 6, CELL - 6);
    ctx.fillStyle = "#fff";
    ctx.font = `bold ${CELL * 0.5}px sans-serif`;
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(bin.label[0], px + CELL / 2, py + CELL / 2 + 1);
  }

  for (const obj of layers.objects) {
    const cx = (obj.x + 0.5) * CELL;
    const cy = (obj.y + 0.5) * CELL;
    ctx.fillStyle = colorFor(obj.category);
    ctx.beginPath();
    ctx.arc(cx, cy, CELL * 0.32, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "#222";
    ctx.stroke();
    if (obj.flagged) {
      // digital flagpole: mast plus pennant above the object
      ctx.strokeStyle = "#222";
      ctx.beginPath();
      ctx.moveTo(cx, cy - CELL * 0.3);
      ctx.lineTo(cx, cy - CELL * 1.1);
      ctx.stroke();
      ctx.fillStyle = "#e6b41e";
      ctx.beginPath();
      ctx.moveTo(cx, cy - CELL * 1.1);
      ctx.lineTo(cx + CELL * 0.45, cy - CELL * 0.95);
      ctx.lineTo(cx, cy - CELL * 0.8);
      ctx.closePath();
      ctx.fill();
    }
  }

  if (layers.avatar) {
    const [ax, ay] = layers.avatar;
    const cx = (ax + 0.5) * CELL;
    const cy = (ay + 0.5) * CELL;
    ctx.fillStyle = "#20242b";
    ctx.beginPath();
    ctx.arc(cx, cy, CELL * 0.36, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#f5d76e";
    ctx.beginPath();
    ctx.arc(cx, cy, CELL * 0.22, 0, Math.PI * 2);
    ctx.fill();
  }
}

export interface HudElements {
  message: HTMLElement;
  status: HTMLElement;
  checklist: HTMLElement;
  inventory: HTMLElement;
  endScreen: HTMLElement;
}

export function renderHud(layers: Layers, metrics: import("./protocol.js").EpisodeMetrics | null, hud: HudElements): void {
  hud.message.textContent = layers.messageBar;
  hud.status.textContent = layers.connectionLabel;
  hud.status.dataset.state = layers.connectionLabel;

  const listTag = layers.numbered ? "ol" : "ul";
  const items = layers.checklist
    .map(
      (item) =>
        `<li class="${item.done ? "done" : ""}" data-ref="${item.ref}">${escapeHtml(item.text)}</li>`,
    )
    .join("");
  hud.checklist.innerHTML = `<${listTag}>${items}</${listTag}>`;

  hud.inventory.innerHTML = layers.inventory
    .map(
      (slot, i) =>
        `<div class="slot ${slot.selected ? "selected" : ""} ${slot.objectId ? "filled" : ""}">` +
        `<span class="slot-label">${i + 1}</span>${escapeHtml(slot.displayName ?? "empty")}</div>`,
    )
    .join("");

  if (metrics) {
    hud.endScreen.hidden = false;
    const ipl = metrics.ipl === null ? "n/a" : metrics.ipl.toFixed(3);
    hud.endScreen.innerHTML =
      `<h2>${metrics.partial ? "Session abandoned" : "Task complete!"}</h2>` +
      `<table>` +
      `<tr><td>Normalized deviations</td><td>${metrics.normalized_deviations.toFixed(3)}</td></tr>` +
      `<tr><td>Inverse path length</td><td>${ipl}</td></tr>` +
      `<tr><td>Task distance</td><td>${metrics.task_distance.toFixed(2)}</td></tr>` +
      `<tr><td>Steps</td><td>${metrics.completion_steps}</td></tr>` +
      `<tr><td>Replans</td><td>${metrics.replans}</td></tr>` +
      `</table>`;
  } else {
    hud.endScreen.hidden = true;
  }
}

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
