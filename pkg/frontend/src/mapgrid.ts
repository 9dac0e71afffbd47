/**
 * Client-side parser for the map text carried in the Welcome frame.
 *
 * Format: first line "W H resolution" (cells, cells, meters per cell), then
 * H rows of exactly W characters. The first text row is the top of the
 * world, so world y grows upward: row = H - 1 - fileRow. Legend: '#' wall,
 * '.' free, 'B' charging base, 'C' room center, digits are gem slots.
 */

export type WallRun = { x: number; y: number; w: number; h: number };

export type MapGrid = {
  widthCells: number;
  heightCells: number;
  resolution: number;
  widthM: number;
  heightM: number;
  /** Horizontal runs of wall cells merged per row, in world meters. */
  walls: WallRun[];
  base: [number, number] | null;
  rooms: [number, number][];
  slots: [number, number][];
};

const FREE_CHARS = ".BC0123456789";

export function parseMap(text: string): MapGrid {
  const lines = text.split(/\r?\n/);
  while (lines.length && lines[lines.length - 1] === "") lines.pop();
  if (!lines.length) throw new Error("empty map text");
  const header = lines[0].trim().split(/\s+/);
  if (header.length !== 3) throw new Error("map header must be 'W H resolution'");
  const width = Number(header[0]);
  const height = Number(header[1]);
  const res = Number(header[2]);
  if (!Number.isInteger(width) || !Number.isInteger(height) || !(res > 0)) {
    throw new Error("bad map header values");
  }
  const rows = lines.slice(1);
  if (rows.length !== height) {
    throw new Error(`expected ${height} map rows, found ${rows.length}`);
  }

  const walls: WallRun[] = [];
  let base: [number, number] | null = null;
  const rooms: [number, number][] = [];
  const slotDigits: [number, [number, number]][] = [];

  for (let fileRow = 0; fileRow < height; fileRow++) {
    const line = rows[fileRow];
    if (line.length !== width) {
      throw new Error(`map row ${fileRow + 1}: expected ${width} chars`);
    }
    const row = height - 1 - fileRow;
    let runStart = -1;
    for (let col = 0; col <= width; col++) {
      const ch = col < width ? line[col] : ".";
      if (ch === "#") {
        if (runStart < 0) runStart = col;
        continue;
      }
      if (runStart >= 0) {
        walls.push({
          x: runStart * res,
          y: row * res,
          w: (col - runStart) * res,
          h: res,
        });
        runStart = -1;
      }
      if (col === width) break;
      if (!FREE_CHARS.includes(ch)) {
        throw new Error(`map row ${fileRow + 1}: invalid character '${ch}'`);
      }
      const center: [number, number] = [(col + 0.5) * res, (row + 0.5) * res];
      if (ch === "B") base = center;
      else if (ch === "C") rooms.push(center);
      else if (ch >= "0" && ch <= "9") slotDigits.push([Number(ch), center]);
    }
  }

  slotDigits.sort((a, b) => a[0] - b[0]);
  return {
    widthCells: width,
    heightCells: height,
    resolution: res,
    widthM: width * res,
    heightM: height * res,
    walls,
    base,
    rooms,
    slots: slotDigits.map(([, p]) => p),
  };
}
