/**
 * Wire types for the haven/1 session protocol.
 *
 * Field names follow the server's JSON frames exactly. Unknown frame kinds
 * decode to null so newer servers stay compatible with older clients.
 */

export type Pose = [number, number, number];

export type Marker = {
  pos: [number, number];
  kind: "Arc" | "Linear";
  dimmed: boolean;
};

export type Viz = {
  markers: Marker[];
  signal: "None" | "Left" | "Right";
  bubble: { visible: boolean; message: string };
  battery: number;
};

export type Gem = {
  id: number;
  pos: [number, number];
  owner: "robot" | "human";
  collected: boolean;
};

export type Snapshot = {
  kind: "Snapshot";
  tick: number;
  robot: { pose: Pose; mode: string; battery: number };
  human: { pose: Pose };
  viz: Viz;
  gems: Gem[];
  scenario: Record<string, unknown>;
  metrics: Record<string, number>;
};

export type Welcome = {
  kind: "Welcome";
  session: string;
  protocol: string;
  config: Record<string, unknown>;
  map: string;
};

export type EventFrame = {
  kind: "Event";
  tick: number;
  event: string;
  data: Record<string, unknown>;
};

export type EndFrame = {
  kind: "End";
  reason: string;
  metrics: Record<string, number>;
};

export type PongFrame = { kind: "Pong"; nonce: number };

export type ErrorFrame = { kind: "Error"; error: string; detail?: string };

export type ServerFrame =
  | Welcome
  | Snapshot
  | EventFrame
  | EndFrame
  | PongFrame
  | ErrorFrame;

const SERVER_KINDS = new Set(["Welcome", "Snapshot", "Event", "End", "Pong", "Error"]);

/** Parse one server frame; null for junk, non-objects, and unknown kinds. */
export function decodeFrame(raw: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) return null;
  const kind = (obj as { kind?: unknown }).kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) return null;
  return obj as ServerFrame;
}

export function joinFrame(scenario: string, name: string): string {
  return JSON.stringify({ kind: "Join", scenario, name });
}

export function inputFrame(tick: number, move: [number, number]): string {
  return JSON.stringify({ kind: "Input", tick, move });
}

export function pingFrame(nonce: number): string {
  return JSON.stringify({ kind: "Ping", nonce });
}
