/**
 * WebSocket wiring: owns the socket, the frame sequencer, and the store.
 * Keystrokes during a disconnect are dropped by the input layer because the
 * store's connection state gates intents; there is no local fallback.
 */

import { ActionIntent } from "./input.js";
import { Frame, FrameSequencer, ScenarioDoc } from "./protocol.js";
import { ClientStore } from "./state.js";

export class SessionClient {
  readonly store = new ClientStore();
  private sequencer = new FrameSequencer();
  private socket: WebSocket | null = null;

  connect(url: string): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = new WebSocket(url);
      this.socket = socket;
      socket.onopen = () => {
        this.store.setConnection("open");
        resolve();
      };
      socket.onclose = () => this.store.setConnection("closed");
      socket.onerror = () => {
        this.store.setConnection("closed");
        reject(new Error(`cannot reach ${url}`));
      };
      socket.onmessage = (event) => {
        const frame = JSON.parse(event.data as string) as Frame;
        this.sequencer.accept(frame, (f) => this.store.applyServerFrame(f));
      };
    });
  }

  private send(type: "start" | "action" | "assist" | "finish", body: Record<string, unknown>): void {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) return;
    const frame: Frame = { v: 1, type, seq: this.sequencer.allocate(), body };
    const sid = this.store.view.sessionId;
    if (sid && type !== "start") frame.session_id = sid;
    this.socket.send(JSON.stringify(frame));
  }

  start(scenario: ScenarioDoc, fidelity: string): void {
    this.send("start", { scenario, fidelity });
  }

  action(intent: ActionIntent): void {
    this.send("action", intent as unknown as Record<string, unknown>);
  }

  finish(): void {
    this.send("finish", {});
  }
}
