/**
 * Keyboard state and the fixed-cadence input pump.
 *
 * WASD and the arrow keys map to world axes (W is +y, up on screen). The
 * summed vector is clamped to the unit disc, so diagonals come out
 * normalized and every frame we emit is an honest |move| <= 1.
 */

export const INPUT_INTERVAL_MS = 40; // 25 Hz

const MOVE_KEYS: Record<string, [number, number]> = {
  KeyW: [0, 1],
  ArrowUp: [0, 1],
  KeyS: [0, -1],
  ArrowDown: [0, -1],
  KeyA: [-1, 0],
  ArrowLeft: [-1, 0],
  KeyD: [1, 0],
  ArrowRight: [1, 0],
};

export class KeyState {
  private pressed = new Set<string>();

  /** Returns true when the code is a movement key (caller preventDefaults). */
  press(code: string): boolean {
    if (!(code in MOVE_KEYS)) return false;
    this.pressed.add(code);
    return true;
  }

  release(code: string): void {
    this.pressed.delete(code);
  }

  /** Window blur safety: treat every key as released. */
  clear(): void {
    this.pressed.clear();
  }

  vector(): [number, number] {
    let x = 0;
    let y = 0;
    for (const code of this.pressed) {
      const [dx, dy] = MOVE_KEYS[code];
      x += dx;
      y += dy;
    }
    const n = Math.hypot(x, y);
    if (n > 1) {
      x /= n;
      y /= n;
    }
    return [x, y];
  }
}

/**
 * Emits the current move vector at a fixed cadence. An all-released state
 * sends [0, 0] exactly once and then goes quiet until a key is pressed.
 */
export class InputPump {
  private sentZero = false;

  constructor(
    private keys: KeyState,
    private send: (move: [number, number]) => void,
  ) {}

  tick(): void {
    const move = this.keys.vector();
    if (move[0] === 0 && move[1] === 0) {
      if (this.sentZero) return;
      this.sentZero = true;
    } else {
      this.sentZero = false;
    }
    this.send(move);
  }
}
