/**
 * Snapshot buffering and pose interpolation.
 *
 * The buffer keeps the two most recent snapshots and samples poses a fixed
 * 40 ms behind arrival time with a plain linear blend. The blend factor is
 * clamped to [0, 1], so displayed poses are always convex combinations of
 * buffered data: the view lags, it never predicts.
 */

import type { Pose, Snapshot } from "./protocol";

export const DISPLAY_DELAY_MS = 40;

export type SampledView = {
  /** Tick of the newer buffered snapshot; never exceeds the latest received. */
  tick: number;
  robot: Pose;
  human: Pose;
  /** Discrete channels (markers, gems, bubble, metrics) come from here. */
  frame: Snapshot;
};

function lerp(a: number, b: number, u: number): number {
  return a + (b - a) * u;
}

/** Interpolate along the shortest arc between two headings. */
export function lerpAngle(a: number, b: number, u: number): number {
  let d = b - a;
  while (d > Math.PI) d -= 2 * Math.PI;
  while (d < -Math.PI) d += 2 * Math.PI;
  return a + d * u;
}

function lerpPose(a: Pose, b: Pose, u: number): Pose {
  return [lerp(a[0], b[0], u), lerp(a[1], b[1], u), lerpAngle(a[2], b[2], u)];
}

type Buffered = { snap: Snapshot; at: number };

export class SnapshotBuffer {
  private prev: Buffered | null = null;
  private next: Buffered | null = null;

  get latest(): Snapshot | null {
    return this.next ? this.next.snap : null;
  }

  get latestTick(): number {
    return this.next ? this.next.snap.tick : -1;
  }

  push(snap: Snapshot, atMs: number): void {
    if (this.next) this.prev = this.next;
    this.next = { snap, at: atMs };
  }

  sample(nowMs: number, delayMs: number = DISPLAY_DELAY_MS): SampledView | null {
    if (!this.next) return null;
    const b = this.next;
    const a = this.prev ?? b;
    const span = b.at - a.at;
    let u = span > 0 ? (nowMs - delayMs - a.at) / span : 1;
    u = Math.min(1, Math.max(0, u));
    return {
      tick: b.snap.tick,
      robot: lerpPose(a.snap.robot.pose, b.snap.robot.pose, u),
      human: lerpPose(a.snap.human.pose, b.snap.human.pose, u),
      frame: b.snap,
    };
  }
}
