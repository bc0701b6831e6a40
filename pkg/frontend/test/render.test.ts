import { describe, expect, it } from "vitest";

import { buildRenderModel } from "../src/render.js";
import { sampleState } from "./fixtures.js";

describe("buildRenderModel (headless render-to-model fidelity)", () => {
  it("mirrors player positions, orientations and held items exactly", () => {
    const state = sampleState();
    const model = buildRenderModel(state);
    expect(model.players).toHaveLength(2);
    state.players.forEach((p, i) => {
      expect(model.players[i]).toMatchObject({
        x: p.x,
        y: p.y,
        orientation: p.orientation,
        held: p.held,
      });
    });
    expect(model.players[0].isHuman).toBe(true);
    expect(model.players[1].isHuman).toBe(false);
  });

  it("mirrors pot contents and cook timers", () => {
    const state = sampleState({
      pots: [{ x: 2, y: 0, onions: 3, cook_remaining: 7, ready: false }],
    });
    const model = buildRenderModel(state);
    expect(model.pots).toEqual([
      { x: 2, y: 0, onions: 3, cookRemaining: 7, ready: false },
    ]);
  });

  it("lays out one tile per grid cell with the right kinds", () => {
    const model = buildRenderModel(sampleState());
    expect(model.width).toBe(5);
    expect(model.height).toBe(4);
    expect(model.tiles).toHaveLength(20);
    const at = (x: number, y: number) => model.tiles.find((t) => t.x === x && t.y === y)!;
    expect(at(2, 0).kind).toBe("pot");
    expect(at(0, 1).kind).toBe("onion_source");
    expect(at(1, 3).kind).toBe("dish_source");
    expect(at(3, 3).kind).toBe("serve");
    expect(at(1, 1).kind).toBe("floor");
  });

  it("carries score and remaining time through unchanged", () => {
    const model = buildRenderModel(sampleState({ timestep: 390, score: 120 }));
    expect(model.score).toBe(120);
    expect(model.ticksRemaining).toBe(10);
  });

  it("mirrors counter items", () => {
    const model = buildRenderModel(sampleState());
    expect(model.counterItems).toEqual([{ x: 0, y: 2, item: "dish" }]);
  });
});
