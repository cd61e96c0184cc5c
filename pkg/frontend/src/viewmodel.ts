/**
 * Derives the drawable layers from the client view. Fidelity rules are
 * whatever the server sent: breadcrumbs exist only in optimal payloads,
 * highlights only in highlight payloads, so rendering them verbatim keeps
 * the client obedient to server authority.
 */

import { Breadcrumbs, ChecklistItem } from "./protocol.js";
import { ClientView } from "./state.js";

export interface FloorObject {
  id: string;
  x: number;
  y: number;
  category: string;
  flagged: boolean;
}

export interface BinMarker {
  id: string;
  x: number;
  y: number;
  category: string;
  label: string;
}

export interface InventorySlot {
  objectId: string | null;
  displayName: string | null;
  selected: boolean;
}

export interface Layers {
  avatar: [number, number] | null;
  objects: FloorObject[];
  bins: BinMarker[];
  breadcrumbs: Breadcrumbs | null;
  checklist: ChecklistItem[];
  numbered: boolean;
  inventory: InventorySlot[];
  messageBar: string;
  connectionLabel: string;
  done: boolean;
}

export const KNAPSACK_SLOTS = 2;

export function deriveLayers(view: ClientView): Layers {
  const snap = view.snapshot;
  const assist = view.assistance;
  const scenario = view.scenario;
  const highlights = new Set(assist?.highlights ?? []);

  const objects: FloorObject[] = [];
  if (scenario && snap) {
    for (const obj of scenario.objects) {
      if (snap.objects[obj.id] === "at_pickup") {
        objects.push({
          id: obj.id,
          x: obj.x,
          y: obj.y,
          category: obj.category,
          flagged: highlights.has(obj.id),
        });
      }
    }
  }

  const inventory: InventorySlot[] = [];
  for (let slot = 0; slot < KNAPSACK_SLOTS; slot++) {
    const objectId = snap?.knapsack[slot] ?? null;
    const name = objectId
      ? scenario?.objects.find((o) => o.id === objectId)?.display_name ?? objectId
      : null;
    inventory.push({
      objectId,
      displayName: name,
      selected: slot === view.selectedSlot && objectId !== null,
    });
  }

  const messageBar =
    view.lastError ?? view.message ?? assist?.message ?? (snap?.done ? "Task complete!" : "");

  return {
    avatar: snap ? snap.position : null,
    objects,
    bins: scenario ? scenario.bins.map((b) => ({ ...b })) : [],
    breadcrumbs: assist?.breadcrumbs ?? null,
    checklist: assist?.checklist ?? [],
    numbered: assist?.numbered ?? false,
    inventory,
    messageBar,
    connectionLabel: view.connection,
    done: snap?.done ?? false,
  };
}
