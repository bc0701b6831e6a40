/** Wire protocol: newline-delimited JSON messages over the websocket. */

export type Orientation = "N" | "S" | "E" | "W";
export type Held = "onion" | "dish" | "soup" | null;

export interface PlayerView {
  x: number;
  y: number;
  orientation: Orientation;
  held: Held;
}

export interface PotView {
  x: number;
  y: number;
  onions: number;
  cook_remaining: number;
  ready: boolean;
}

export interface CounterView {
  x: number;
  y: number;
  item: Exclude<Held, null>;
}

export interface StateMessage {
  type: "state";
  session: string;
  timestep: number;
  horizon: number;
  score: number;
  reward: number;
  grid: string[];
  players: PlayerView[];
  pots: PotView[];
  counters: CounterView[];
  actions: number[];
  human_seat: number;
  tick_ms: number;
}

export interface EndMessage {
  type: "end";
  session: string;
  score: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  detail: string;
}

export interface AckMessage {
  type: "ack";
  session: string;
}

export type ServerMessage = StateMessage | EndMessage | ErrorMessage | AckMessage;

export interface CreateMessage {
  type: "create";
  layout: string;
  agent: string;
  seat: "left" | "right";
  tick_ms: number;
}

export interface ActionMessage {
  type: "action";
  session: string;
  action: number;
}

export class ProtocolError extends Error {}

const KNOWN_TYPES = new Set(["state", "end", "error", "ack"]);

/** Parse one line of newline-delimited JSON into a server message. */
export function parseServerLine(line: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof data !== "object" || data === null) {
    throw new ProtocolError("message is not an object");
  }
  const message = data as { type?: unknown };
  if (typeof message.type !== "string" || !KNOWN_TYPES.has(message.type)) {
    throw new ProtocolError(`unknown message type ${String(message.type)}`);
  }
  if (message.type === "state") {
    const state = data as Partial<StateMessage>;
    if (
      !Array.isArray(state.grid) ||
      !Array.isArray(state.players) ||
      state.players.length !== 2 ||
      typeof state.timestep !== "number"
    ) {
      throw new ProtocolError("malformed state message");
    }
  }
  return data as ServerMessage;
}

/** Split a websocket frame into complete NDJSON lines. */
export function splitLines(frame: string): string[] {
  return frame
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
}

export function serialize(message: CreateMessage | ActionMessage): string {
  return JSON.stringify(message) + "\n";
}
