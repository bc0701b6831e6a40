import type { StateMessage } from "../src/protocol.js";

export function sampleState(overrides: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    session: "s1",
    timestep: 3,
    horizon: 400,
    score: 20,
    reward: 0,
    grid: ["XXPXX", "O   O", "X   X", "XDXSX"],
    players: [
      { x: 1, y: 2, orientation: "N", held: "onion" },
      { x: 3, y: 2, orientation: "W", held: null },
    ],
    pots: [{ x: 2, y: 0, onions: 3, cook_remaining: 7, ready: false }],
    counters: [{ x: 0, y: 2, item: "dish" }],
    actions: [0, 4],
    human_seat: 0,
    tick_ms: 150,
    ...overrides,
  };
}
