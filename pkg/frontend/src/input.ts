/** Keyboard state -> input frames.
 *
 * Directions use screen coordinates (y grows down), matching the server's
 * grid.  Pressing up therefore contributes (0, -1).  Held opposing keys
 * cancel; two orthogonal keys normalize to unit magnitude.
 */

import type { InputMessage, Vec2 } from "./protocol.js";

export type Direction = "up" | "down" | "left" | "right";

/** Server-side pacing is 20 Hz; sending faster than 30 Hz is wasted. */
export const MAX_SEND_RATE_HZ = 30;
const MIN_INTERVAL_MS = 1000 / MAX_SEND_RATE_HZ;

export class InputTracker {
  private pressed = new Set<Direction>();
  private seq = 0;
  private lastSentAt = -Infinity;

  /** Key repeat fires press() again for a held key; the set makes that a
   * no-op so repeats cannot inflate the move or the seq counter. */
  press(dir: Direction): void {
    this.pressed.add(dir);
  }

  release(dir: Direction): void {
    this.pressed.delete(dir);
  }

  releaseAll(): void {
    this.pressed.clear();
  }

  move(): Vec2 {
    let x = 0;
    let y = 0;
    if (this.pressed.has("left")) x -= 1;
    if (this.pressed.has("right")) x += 1;
    if (this.pressed.has("up")) y -= 1;
    if (this.pressed.has("down")) y += 1;
    const mag = Math.hypot(x, y);
    if (mag > 1) {
      x /= mag;
      y /= mag;
    }
    return [x, y];
  }

  /** Build the next frame, or null when inside the rate-limit window.
   * Seqs are strictly increasing across every frame ever produced. */
  sample(nowMs: number): InputMessage | null {
    if (nowMs - this.lastSentAt < MIN_INTERVAL_MS) {
      return null;
    }
    this.lastSentAt = nowMs;
    this.seq += 1;
    return { type: "input", seq: this.seq, move: this.move() };
  }
}
