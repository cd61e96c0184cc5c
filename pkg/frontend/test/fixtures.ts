import { Frame } from "../src/protocol.js";

import scriptedJson from "./fixtures/scripted_server.json";

export interface ScriptedServer {
  starts: Record<"none" | "highlight" | "optimal", Frame>;
  deviation: { start: Frame; responses: Frame[] };
}

export function loadScriptedServer(): ScriptedServer {
  return scriptedJson as unknown as ScriptedServer;
}
