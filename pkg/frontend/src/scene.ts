/**
 * Pure scene builder: world state in, flat list of fill shapes out.
 *
 * All geometry lives in world meters with y up; the canvas painter owns the
 * screen transform. Keeping this function free of canvas and DOM calls is
 * what makes the render contract testable: the same inputs always produce
 * the same shape list, and nothing here writes back into the snapshot.
 */

import type { MapGrid } from "./mapgrid";
import type { SampledView } from "./view";

export type Shape =
  | { glyph: "rect"; role: string; x: number; y: number; w: number; h: number; color: string; opacity: number }
  | { glyph: "circle"; role: string; x: number; y: number; r: number; color: string; opacity: number }
  | { glyph: "poly"; role: string; points: [number, number][]; color: string; opacity: number }
  | { glyph: "text"; role: string; x: number; y: number; text: string; color: string; opacity: number; size: number };

export const COLORS = {
  floor: "#20242c",
  wall: "#4a5163",
  room: "#343b49",
  base: "#d0342c",
  gemRobot: "#2f6fd4",
  gemHuman: "#d0342c",
  robot: "#e8e9ee",
  robotWedge: "#2c3140",
  human: "#e8a33d",
  marker: "#f4f5f7",
  signal: "#f2d43b",
  bubble: "#f7f7f2",
  bubbleText: "#23262e",
  batteryBack: "#14161c",
  battery: "#3dbb54",
};

export const MARKER_SIDE = 0.18;
export const MARKER_RADIUS = 0.09;
export const DIMMED_OPACITY = 0.35;
export const ROBOT_RADIUS = 0.3;
export const HUMAN_RADIUS = 0.3;
export const BASE_RADIUS = 0.3;
export const GEM_RADIUS = 0.13;
export const SIGNAL_OFFSET = 0.55;

function wedge(x: number, y: number, heading: number, tip: number, back: number): [number, number][] {
  const spread = 2.4; // radians off the nose for the two tail corners
  return [
    [x + tip * Math.cos(heading), y + tip * Math.sin(heading)],
    [x + back * Math.cos(heading + spread), y + back * Math.sin(heading + spread)],
    [x + back * Math.cos(heading - spread), y + back * Math.sin(heading - spread)],
  ];
}

/** Triangle pointing sideways from the robot: +pi/2 for Left, -pi/2 for Right. */
function signalArrow(robot: [number, number, number], side: "Left" | "Right"): [number, number][] {
  const lam = side === "Left" ? 1 : -1;
  const phi = robot[2] + lam * (Math.PI / 2);
  const bx = robot[0] + SIGNAL_OFFSET * Math.cos(phi);
  const by = robot[1] + SIGNAL_OFFSET * Math.sin(phi);
  const px = Math.cos(phi + Math.PI / 2);
  const py = Math.sin(phi + Math.PI / 2);
  return [
    [bx + 0.2 * Math.cos(phi), by + 0.2 * Math.sin(phi)],
    [bx - 0.12 * Math.cos(phi) + 0.12 * px, by - 0.12 * Math.sin(phi) + 0.12 * py],
    [bx - 0.12 * Math.cos(phi) - 0.12 * px, by - 0.12 * Math.sin(phi) - 0.12 * py],
  ];
}

export function buildScene(map: MapGrid | null, view: SampledView | null): Shape[] {
  const shapes: Shape[] = [];

  if (map) {
    for (const run of map.walls) {
      shapes.push({
        glyph: "rect",
        role: "wall",
        x: run.x + run.w / 2,
        y: run.y + run.h / 2,
        w: run.w,
        h: run.h,
        color: COLORS.wall,
        opacity: 1,
      });
    }
    for (const [rx, ry] of map.rooms) {
      shapes.push({ glyph: "circle", role: "room", x: rx, y: ry, r: 0.1, color: COLORS.room, opacity: 1 });
    }
    if (map.base) {
      shapes.push({
        glyph: "circle",
        role: "base",
        x: map.base[0],
        y: map.base[1],
        r: BASE_RADIUS,
        color: COLORS.base,
        opacity: 0.85,
      });
    }
  }

  if (!view) return shapes;
  const { frame, robot, human } = view;

  for (const gem of frame.gems) {
    shapes.push({
      glyph: "circle",
      role: "gem",
      x: gem.pos[0],
      y: gem.pos[1],
      r: GEM_RADIUS,
      color: gem.owner === "robot" ? COLORS.gemRobot : COLORS.gemHuman,
      opacity: gem.collected ? 0.2 : 0.95,
    });
  }

  for (const marker of frame.viz.markers) {
    const opacity = marker.dimmed ? DIMMED_OPACITY : 1;
    if (marker.kind === "Arc") {
      shapes.push({
        glyph: "rect",
        role: "marker",
        x: marker.pos[0],
        y: marker.pos[1],
        w: MARKER_SIDE,
        h: MARKER_SIDE,
        color: COLORS.marker,
        opacity,
      });
    } else {
      shapes.push({
        glyph: "circle",
        role: "marker",
        x: marker.pos[0],
        y: marker.pos[1],
        r: MARKER_RADIUS,
        color: COLORS.marker,
        opacity,
      });
    }
  }

  shapes.push({
    glyph: "circle",
    role: "robot",
    x: robot[0],
    y: robot[1],
    r: ROBOT_RADIUS,
    color: COLORS.robot,
    opacity: 1,
  });
  shapes.push({
    glyph: "poly",
    role: "robot-heading",
    points: wedge(robot[0], robot[1], robot[2], 0.27, 0.13),
    color: COLORS.robotWedge,
    opacity: 1,
  });

  if (frame.viz.signal !== "None") {
    shapes.push({
      glyph: "poly",
      role: "signal",
      points: signalArrow(robot, frame.viz.signal),
      color: COLORS.signal,
      opacity: 1,
    });
  }

  shapes.push({
    glyph: "circle",
    role: "human",
    x: human[0],
    y: human[1],
    r: HUMAN_RADIUS,
    color: COLORS.human,
    opacity: 1,
  });
  shapes.push({
    glyph: "poly",
    role: "human-facing",
    points: wedge(human[0], human[1], human[2], 0.24, 0.1),
    color: COLORS.floor,
    opacity: 0.8,
  });

  if (frame.viz.bubble.visible) {
    const msg = frame.viz.bubble.message;
    const w = Math.max(0.9, 0.12 * msg.length + 0.3);
    const bx = robot[0];
    const by = robot[1] + ROBOT_RADIUS + 0.45;
    shapes.push({ glyph: "rect", role: "bubble", x: bx, y: by, w, h: 0.36, color: COLORS.bubble, opacity: 0.92 });
    shapes.push({
      glyph: "text",
      role: "bubble-text",
      x: bx,
      y: by,
      text: msg,
      color: COLORS.bubbleText,
      opacity: 1,
      size: 0.2,
    });
  }

  const frac = Math.min(1, Math.max(0, frame.viz.battery));
  const bw = 0.6;
  const bx = robot[0];
  const by = robot[1] + ROBOT_RADIUS + 0.18;
  shapes.push({ glyph: "rect", role: "battery-back", x: bx, y: by, w: bw + 0.04, h: 0.14, color: COLORS.batteryBack, opacity: 0.8 });
  shapes.push({
    glyph: "rect",
    role: "battery",
    x: bx - (bw * (1 - frac)) / 2,
    y: by,
    w: bw * frac,
    h: 0.1,
    color: COLORS.battery,
    opacity: 1,
  });

  return shapes;
}
