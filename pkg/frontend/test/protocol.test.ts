import { describe, expect, it } from "vitest";

import {
  ProtocolError,
  parseServerLine,
  serialize,
  splitLines,
} from "../src/protocol.js";
import { sampleState } from "./fixtures.js";

describe("parseServerLine", () => {
  it("round-trips a state message", () => {
    const line = JSON.stringify(sampleState());
    const parsed = parseServerLine(line);
    expect(parsed).toEqual(sampleState());
  });

  it("accepts end / error / ack messages", () => {
    expect(parseServerLine('{"type":"end","session":"s1","score":40}')).toEqual({
      type: "end",
      session: "s1",
      score: 40,
    });
    expect(parseServerLine('{"type":"error","code":"layout_not_found","detail":"x"}')).toEqual(
      { type: "error", code: "layout_not_found", detail: "x" },
    );
    expect(parseServerLine('{"type":"ack","session":"s1"}')).toEqual({
      type: "ack",
      session: "s1",
    });
  });

  it("rejects junk and malformed states", () => {
    expect(() => parseServerLine("not json")).toThrow(ProtocolError);
    expect(() => parseServerLine("42")).toThrow(ProtocolError);
    expect(() => parseServerLine('{"type":"mystery"}')).toThrow(ProtocolError);
    expect(() =>
      parseServerLine(JSON.stringify({ ...sampleState(), players: [] })),
    ).toThrow(ProtocolError);
  });
});

describe("splitLines", () => {
  it("splits newline-delimited frames and drops blanks", () => {
    expect(splitLines('{"a":1}\n{"b":2}\n\n')).toEqual(['{"a":1}', '{"b":2}']);
  });
});

describe("serialize", () => {
  it("emits newline-terminated JSON", () => {
    const text = serialize({ type: "action", session: "s1", action: 5 });
    expect(text.endsWith("\n")).toBe(true);
    expect(JSON.parse(text)).toEqual({ type: "action", session: "s1", action: 5 });
  });
});
