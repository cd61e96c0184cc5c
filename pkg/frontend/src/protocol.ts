/**
 * Protocol frame types and strict in-order application of server responses.
 * The server echoes the client's seq; TCP keeps websocket messages ordered,
 * but the client still buffers anything that arrives ahead of sequence and
 * drops duplicates, so rendering can never observe frames out of order.
 */

export type FrameType = "start" | "action" | "assist" | "finish" | "state" | "metrics" | "error";

export interface Frame {
  v: 1;
  type: FrameType;
  session_id?: string;
  seq: number;
  body: Record<string, unknown>;
}

export interface Breadcrumbs {
  points: [number, number][];
  length: number;
}

export interface ChecklistItem {
  text: string;
  done: boolean;
  ref: string;
}

export interface Assistance {
  breadcrumbs: Breadcrumbs | null;
  highlights: string[];
  checklist: ChecklistItem[];
  numbered: boolean;
  message: string | null;
}

export interface Snapshot {
  position: [number, number];
  knapsack: string[];
  objects: Record<string, "at_pickup" | "held" | "placed">;
  prefix: number[];
  plan: number[];
  plan_cost: number;
  traveled: number;
  steps: number;
  replans: number;
  done: boolean;
  message: string | null;
  fidelity: string;
  events: number;
}

export interface MapData {
  width: number;
  height: number;
  rows: string[];
  room_rows?: string[];
  room_names?: Record<string, string>;
}

export interface ScenarioDoc {
  v: 1;
  map_name: string;
  seed: number;
  difficulty: number;
  bins: { id: string; category: string; x: number; y: number; label: string }[];
  objects: { id: string; category: string; x: number; y: number; display_name: string }[];
  start: { x: number; y: number };
}

export interface EpisodeMetrics {
  normalized_deviations: number;
  ipl: number | null;
  task_distance: number;
  completion_steps: number;
  replans: number;
  partial: boolean;
}

/** Applies inbound frames strictly in seq order, buffering early arrivals. */
export class FrameSequencer {
  private nextOutbound = 1;
  private expected = 1;
  private pending = new Map<number, Frame>();

  allocate(): number {
    return this.nextOutbound++;
  }

  /** Feed an inbound frame; `apply` runs for it (and any unblocked buffered
   * frames) in ascending seq order. Duplicates and stale frames are dropped. */
  accept(frame: Frame, apply: (f: Frame) => void): void {
    if (frame.seq < this.expected || this.pending.has(frame.seq)) {
      return;
    }
    this.pending.set(frame.seq, frame);
    while (this.pending.has(this.expected)) {
      const next = this.pending.get(this.expected)!;
      this.pending.delete(this.expected);
      this.expected++;
      apply(next);
    }
  }

  get lastApplied(): number {
    return this.expected - 1;
  }
}
