import { describe, expect, it } from "vitest";

import { decodeFrame, inputFrame, joinFrame, pingFrame } from "../src/protocol";

const SNAPSHOT = JSON.stringify({
  kind: "Snapshot",
  tick: 1044,
  robot: { pose: [1.0, 2.0, 0.5], mode: "ArcPursuit", battery: 0.82 },
  human: { pose: [3.0, 4.0, -1.0] },
  viz: {
    markers: [{ pos: [1.5, 2.0], kind: "Arc", dimmed: false }],
    signal: "Left",
    bubble: { visible: false, message: "" },
    battery: 0.82,
  },
  gems: [{ id: 3, pos: [5.0, 4.0], owner: "human", collected: false }],
  scenario: {},
  metrics: { distance: 1.5 },
});

describe("decodeFrame", () => {
  it("decodes every server frame kind", () => {
    const snap = decodeFrame(SNAPSHOT);
    expect(snap?.kind).toBe("Snapshot");
    if (snap?.kind === "Snapshot") {
      expect(snap.tick).toBe(1044);
      expect(snap.viz.signal).toBe("Left");
      expect(snap.gems[0].owner).toBe("human");
    }

    const welcome = decodeFrame(
      '{"kind":"Welcome","session":"s1","protocol":"haven/1","config":{},"map":"1 1 0.5\\n."}',
    );
    expect(welcome?.kind).toBe("Welcome");

    expect(decodeFrame('{"kind":"Event","tick":9,"event":"Detour","data":{}}')?.kind).toBe("Event");
    expect(decodeFrame('{"kind":"End","reason":"goal_met","metrics":{}}')?.kind).toBe("End");
    expect(decodeFrame('{"kind":"Pong","nonce":7}')?.kind).toBe("Pong");
    expect(decodeFrame('{"kind":"Error","error":"bad-seed"}')?.kind).toBe("Error");
  });

  it("rejects junk and unknown kinds", () => {
    expect(decodeFrame("not json")).toBeNull();
    expect(decodeFrame("42")).toBeNull();
    expect(decodeFrame("[1,2]")).toBeNull();
    expect(decodeFrame('{"no":"kind"}')).toBeNull();
    expect(decodeFrame('{"kind":"Mystery","tick":1}')).toBeNull();
    expect(decodeFrame('{"kind":5}')).toBeNull();
  });
});

describe("client frames", () => {
  it("serializes Join, Input, and Ping with exact field names", () => {
    expect(JSON.parse(joinFrame("retrieval", "p7"))).toEqual({
      kind: "Join",
      scenario: "retrieval",
      name: "p7",
    });
    expect(JSON.parse(inputFrame(12, [0.5, -0.5]))).toEqual({
      kind: "Input",
      tick: 12,
      move: [0.5, -0.5],
    });
    expect(JSON.parse(pingFrame(3))).toEqual({ kind: "Ping", nonce: 3 });
  });
});
