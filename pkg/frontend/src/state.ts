/**
 * Client-side session state: a pure store fed exclusively by server frames.
 * The client never simulates the task locally; everything rendered comes from
 * the latest snapshot and assistance payload the server sent.
 */

import {
  Assistance,
  EpisodeMetrics,
  Frame,
  MapData,
  ScenarioDoc,
  Snapshot,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface ClientView {
  connection: Connection;
  sessionId: string | null;
  map: MapData | null;
  scenario: ScenarioDoc | null;
  snapshot: Snapshot | null;
  assistance: Assistance | null;
  message: string | null;
  lastError: string | null;
  selectedSlot: number;
  lastSeq: number;
  replannedFlash: boolean;
  metrics: EpisodeMetrics | null;
}

export function emptyView(): ClientView {
  return {
    connection: "connecting",
    sessionId: null,
    map: null,
    scenario: null,
    snapshot: null,
    assistance: null,
    message: null,
    lastError: null,
    selectedSlot: 0,
    lastSeq: 0,
    replannedFlash: false,
    metrics: null,
  };
}

export class ClientStore {
  view: ClientView = emptyView();
  private listeners: (() => void)[] = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  setConnection(state: Connection): void {
    this.view.connection = state;
    this.emit();
  }

  toggleSlot(): void {
    this.view.selectedSlot = this.view.selectedSlot === 0 ? 1 : 0;
    this.emit();
  }

  /** Apply one server frame (already in seq order). */
  applyServerFrame(frame: Frame): void {
    const view = this.view;
    view.lastSeq = frame.seq;
    view.replannedFlash = false;
    const body = frame.body as any;
    switch (frame.type) {
      case "state": {
        if (frame.session_id) view.sessionId = frame.session_id;
        if (body.map) view.map = body.map as MapData;
        if (body.scenario) view.scenario = body.scenario as ScenarioDoc;
        if (body.snapshot) view.snapshot = body.snapshot as Snapshot;
        if (body.assistance) view.assistance = body.assistance as Assistance;
        if ("message" in body) view.message = body.message;
        else if (view.snapshot) view.message = view.snapshot.message;
        if (body.replanned) view.replannedFlash = true;
        view.lastError = null;
        break;
      }
      case "assist": {
        view.assistance = body.assistance as Assistance;
        break;
      }
      case "metrics": {
        view.metrics = body.metrics as EpisodeMetrics;
        break;
      }
      case "error": {
        view.lastError = `${body.code}: ${body.message}`;
        break;
      }
    }
    // keep inventory selection on a filled slot when possible
    if (view.snapshot && view.selectedSlot >= view.snapshot.knapsack.length) {
      view.selectedSlot = Math.max(0, view.snapshot.knapsack.length - 1);
    }
    this.emit();
  }
}
