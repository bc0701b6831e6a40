/** Browser client: connects to the live server, renders server-confirmed
 * states, and streams keyboard actions. Configured via URL query params
 * (layout, seat, tick_ms, agent). */

import { keyToAction } from "./input.js";
import {
  parseServerLine,
  serialize,
  splitLines,
  type ServerMessage,
  type StateMessage,
} from "./protocol.js";
import { TILE, buildRenderModel, paint } from "./render.js";

interface ClientState {
  connection: "connecting" | "open" | "closed";
  session: string | null;
  latest: StateMessage | null;
  finalScore: number | null;
  inputEnabled: boolean;
}

const params = new URLSearchParams(window.location.search);
const layout = params.get("layout") ?? "cramped_room";
const seat = params.get("seat") === "right" ? "right" : "left";
const tickMs = Number(params.get("tick_ms") ?? "150");
const agent = params.get("agent") ?? "agent/best.ckpt";

const canvas = document.getElementById("game") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const scoreEl = document.getElementById("score")!;
const timerEl = document.getElementById("timer")!;
const bannerEl = document.getElementById("banner")!;

const client: ClientState = {
  connection: "connecting",
  session: null,
  latest: null,
  finalScore: null,
  inputEnabled: false,
};

function banner(text: string, kind: "error" | "info"): void {
  bannerEl.textContent = text;
  bannerEl.className = kind;
  bannerEl.style.display = text ? "block" : "none";
}

function drawState(state: StateMessage): void {
  const model = buildRenderModel(state);
  canvas.width = model.width * TILE;
  canvas.height = model.height * TILE;
  paint(ctx, model);
  scoreEl.textContent = `Score ${model.score}`;
  const seconds = ((model.ticksRemaining * state.tick_ms) / 1000).toFixed(0);
  timerEl.textContent = `${model.ticksRemaining} ticks (~${seconds}s)`;
}

function handleMessage(message: ServerMessage): void {
  if (message.type === "state") {
    client.latest = message;
    client.session = message.session;
    client.inputEnabled = true;
    drawState(message);
  } else if (message.type === "end") {
    client.finalScore = message.score;
    client.inputEnabled = false;
    banner(`Episode over — final score ${message.score}`, "info");
  } else if (message.type === "error") {
    banner(`${message.code}: ${message.detail}`, "error");
  }
}

const proto = window.location.protocol === "https:" ? "wss" : "ws";
const socket = new WebSocket(`${proto}://${window.location.host}/ws`);

socket.addEventListener("open", () => {
  client.connection = "open";
  banner("", "info");
  socket.send(serialize({ type: "create", layout, agent, seat, tick_ms: tickMs }));
});

socket.addEventListener("message", (event) => {
  for (const line of splitLines(String(event.data))) {
    try {
      handleMessage(parseServerLine(line));
    } catch (err) {
      banner(`malformed message: ${(err as Error).message}`, "error");
    }
  }
});

socket.addEventListener("close", () => {
  client.connection = "closed";
  client.inputEnabled = false;
  if (client.finalScore === null) {
    banner("connection closed", "error");
  }
});

// actions go out synchronously in the key handler, ahead of the next frame
window.addEventListener("keydown", (event) => {
  const action = keyToAction(event.key);
  if (action === null || !client.inputEnabled || client.session === null) {
    return;
  }
  event.preventDefault();
  socket.send(serialize({ type: "action", session: client.session, action }));
});
