/**
 * Canvas painter: applies the camera transform and draws a shape list.
 *
 * World y grows upward, canvas y grows downward, so the transform flips y.
 * Fit mode scales the whole map into the canvas; follow mode pins a fixed
 * meters-to-pixels scale centered on the human.
 */

import type { MapGrid } from "./mapgrid";
import type { Shape } from "./scene";
import { COLORS } from "./scene";

export type CameraMode = "fit" | "follow";

export const FOLLOW_SCALE = 72; // px per meter

type Transform = { sx: (x: number) => number; sy: (y: number) => number; scale: number };

export function makeTransform(
  mode: CameraMode,
  canvasW: number,
  canvasH: number,
  map: MapGrid | null,
  follow: [number, number] | null,
): Transform {
  if (mode === "follow" && follow) {
    const s = FOLLOW_SCALE;
    const [fx, fy] = follow;
    return {
      sx: (x) => canvasW / 2 + (x - fx) * s,
      sy: (y) => canvasH / 2 - (y - fy) * s,
      scale: s,
    };
  }
  const wm = map ? map.widthM : 10;
  const hm = map ? map.heightM : 8;
  const s = Math.min(canvasW / wm, canvasH / hm) * 0.94;
  const ox = (canvasW - wm * s) / 2;
  const oy = (canvasH - hm * s) / 2;
  return { sx: (x) => ox + x * s, sy: (y) => oy + (hm - y) * s, scale: s };
}

export function paintScene(
  ctx: CanvasRenderingContext2D,
  canvasW: number,
  canvasH: number,
  map: MapGrid | null,
  shapes: Shape[],
  mode: CameraMode,
  follow: [number, number] | null,
): void {
  ctx.fillStyle = COLORS.floor;
  ctx.fillRect(0, 0, canvasW, canvasH);
  const t = makeTransform(mode, canvasW, canvasH, map, follow);

  if (map) {
    // faint floor plate so the world bounds read against the page
    ctx.fillStyle = "#262b35";
    ctx.fillRect(t.sx(0), t.sy(map.heightM), map.widthM * t.scale, map.heightM * t.scale);
  }

  for (const shape of shapes) {
    ctx.globalAlpha = shape.opacity;
    ctx.fillStyle = shape.color;
    if (shape.glyph === "rect") {
      ctx.fillRect(
        t.sx(shape.x - shape.w / 2),
        t.sy(shape.y + shape.h / 2),
        shape.w * t.scale,
        shape.h * t.scale,
      );
    } else if (shape.glyph === "circle") {
      ctx.beginPath();
      ctx.arc(t.sx(shape.x), t.sy(shape.y), shape.r * t.scale, 0, Math.PI * 2);
      ctx.fill();
    } else if (shape.glyph === "poly") {
      ctx.beginPath();
      shape.points.forEach(([px, py], i) => {
        if (i === 0) ctx.moveTo(t.sx(px), t.sy(py));
        else ctx.lineTo(t.sx(px), t.sy(py));
      });
      ctx.closePath();
      ctx.fill();
    } else {
      ctx.font = `${Math.max(10, shape.size * t.scale)}px system-ui, sans-serif`;
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText(shape.text, t.sx(shape.x), t.sy(shape.y));
    }
  }
  ctx.globalAlpha = 1;
}
