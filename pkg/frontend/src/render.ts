/** Rendering splits into a pure model builder (testable headlessly) and a
 * canvas painter. The model mirrors the received state message exactly; the
 * client never predicts ahead of the server. */

import type { StateMessage } from "./protocol.js";

export const TILE = 48;

export interface TileModel {
  x: number;
  y: number;
  kind: "floor" | "counter" | "pot" | "onion_source" | "dish_source" | "serve";
}

export interface PlayerModel {
  x: number;
  y: number;
  orientation: "N" | "S" | "E" | "W";
  held: "onion" | "dish" | "soup" | null;
  isHuman: boolean;
}

export interface PotBadge {
  x: number;
  y: number;
  onions: number;
  cookRemaining: number;
  ready: boolean;
}

export interface RenderModel {
  width: number;
  height: number;
  tiles: TileModel[];
  players: PlayerModel[];
  pots: PotBadge[];
  counterItems: { x: number; y: number; item: "onion" | "dish" | "soup" }[];
  score: number;
  timestep: number;
  horizon: number;
  ticksRemaining: number;
}

const CHAR_KIND: Record<string, TileModel["kind"]> = {
  " ": "floor",
  X: "counter",
  P: "pot",
  O: "onion_source",
  D: "dish_source",
  S: "serve",
};

/** Build the drawable model for one server-confirmed state. */
export function buildRenderModel(state: StateMessage): RenderModel {
  const tiles: TileModel[] = [];
  state.grid.forEach((row, y) => {
    [...row].forEach((ch, x) => {
      tiles.push({ x, y, kind: CHAR_KIND[ch] ?? "counter" });
    });
  });
  return {
    width: state.grid[0]?.length ?? 0,
    height: state.grid.length,
    tiles,
    players: state.players.map((p, i) => ({
      x: p.x,
      y: p.y,
      orientation: p.orientation,
      held: p.held,
      isHuman: i === state.human_seat,
    })),
    pots: state.pots.map((p) => ({
      x: p.x,
      y: p.y,
      onions: p.onions,
      cookRemaining: p.cook_remaining,
      ready: p.ready,
    })),
    counterItems: state.counters.map((c) => ({ x: c.x, y: c.y, item: c.item })),
    score: state.score,
    timestep: state.timestep,
    horizon: state.horizon,
    ticksRemaining: state.horizon - state.timestep,
  };
}

const TILE_COLORS: Record<TileModel["kind"], string> = {
  floor: "#f4e9d8",
  counter: "#9c7b4f",
  pot: "#4a4a4a",
  onion_source: "#d9a43a",
  dish_source: "#b9c6cc",
  serve: "#6fa36f",
};

const ITEM_COLORS = { onion: "#e8b53a", dish: "#eef2f5", soup: "#d96b2f" } as const;

const ORIENT_DELTA = { N: [0, -1], S: [0, 1], E: [1, 0], W: [-1, 0] } as const;

/** Paint one model onto a 2D canvas context. */
export function paint(ctx: CanvasRenderingContext2D, model: RenderModel): void {
  ctx.clearRect(0, 0, model.width * TILE, model.height * TILE);
  for (const tile of model.tiles) {
    ctx.fillStyle = TILE_COLORS[tile.kind];
    ctx.fillRect(tile.x * TILE, tile.y * TILE, TILE - 1, TILE - 1);
    if (tile.kind === "onion_source" || tile.kind === "dish_source" || tile.kind === "serve") {
      ctx.fillStyle = "#00000088";
      ctx.font = `${TILE * 0.4}px sans-serif`;
      ctx.textAlign = "center";
      const label = tile.kind === "onion_source" ? "O" : tile.kind === "dish_source" ? "D" : "S";
      ctx.fillText(label, (tile.x + 0.5) * TILE, (tile.y + 0.65) * TILE);
    }
  }
  for (const item of model.counterItems) {
    ctx.fillStyle = ITEM_COLORS[item.item];
    ctx.beginPath();
    ctx.arc((item.x + 0.5) * TILE, (item.y + 0.5) * TILE, TILE * 0.2, 0, Math.PI * 2);
    ctx.fill();
  }
  for (const pot of model.pots) {
    ctx.fillStyle = pot.ready ? "#2f8f2f" : "#222";
    ctx.fillRect(pot.x * TILE + 6, pot.y * TILE + 6, TILE - 13, TILE - 13);
    ctx.fillStyle = "#ffd75e";
    ctx.font = `${TILE * 0.35}px sans-serif`;
    ctx.textAlign = "center";
    const badge = pot.ready
      ? "OK"
      : pot.onions >= 3
        ? String(pot.cookRemaining)
        : `${pot.onions}/3`;
    ctx.fillText(badge, (pot.x + 0.5) * TILE, (pot.y + 0.62) * TILE);
  }
  model.players.forEach((player) => {
    ctx.fillStyle = player.isHuman ? "#2f6fd0" : "#c04545";
    ctx.beginPath();
    ctx.arc((player.x + 0.5) * TILE, (player.y + 0.5) * TILE, TILE * 0.32, 0, Math.PI * 2);
    ctx.fill();
    const [dx, dy] = ORIENT_DELTA[player.orientation];
    ctx.fillStyle = "#ffffff";
    ctx.beginPath();
    ctx.arc(
      (player.x + 0.5 + dx * 0.25) * TILE,
      (player.y + 0.5 + dy * 0.25) * TILE,
      TILE * 0.09,
      0,
      Math.PI * 2,
    );
    ctx.fill();
    if (player.held) {
      ctx.fillStyle = ITEM_COLORS[player.held];
      ctx.beginPath();
      ctx.arc(
        (player.x + 0.5 + dx * 0.42) * TILE,
        (player.y + 0.5 + dy * 0.42) * TILE,
        TILE * 0.13,
        0,
        Math.PI * 2,
      );
      ctx.fill();
    }
  });
}
