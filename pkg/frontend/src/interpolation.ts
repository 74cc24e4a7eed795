/** Two-state buffer smoothing 20 Hz server frames up to display rate.
 *
 * Positions (player and visible agents) are linearly interpolated between
 * the two most recent states; everything else (fire, smoke, signs, HUD
 * numbers) is taken verbatim from the latest state, never extrapolated.
 */

import type { AgentView, StateMessage } from "./protocol.js";

export interface RenderSample {
  /** Latest state, authoritative for all non-positional fields. */
  state: StateMessage;
  player: { x: number; y: number };
  agents: { id: number; x: number; y: number; phase: string }[];
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

export class StateBuffer {
  private prev: { state: StateMessage; at: number } | null = null;
  private curr: { state: StateMessage; at: number } | null = null;

  push(state: StateMessage, atMs: number): void {
    this.prev = this.curr;
    this.curr = { state, at: atMs };
  }

  latest(): StateMessage | null {
    return this.curr ? this.curr.state : null;
  }

  /** Interpolated view at wall-clock time nowMs, or null before the first
   * state arrives.  The blend factor is clamped so time beyond the latest
   * frame holds the last known positions. */
  sample(nowMs: number): RenderSample | null {
    if (!this.curr) return null;
    const state = this.curr.state;
    if (!this.prev || this.curr.at <= this.prev.at) {
      return snap(state);
    }
    const t = Math.min(1, Math.max(0, (nowMs - this.prev.at) / (this.curr.at - this.prev.at)));
    const before = new Map<number, AgentView>();
    for (const a of this.prev.state.visible_agents) before.set(a.id, a);
    const agents = state.visible_agents.map((a) => {
      const b = before.get(a.id);
      // freshly visible agents have no earlier position: draw them in place
      if (!b) return { id: a.id, x: a.x, y: a.y, phase: a.phase };
      return { id: a.id, x: lerp(b.x, a.x, t), y: lerp(b.y, a.y, t), phase: a.phase };
    });
    const p0 = this.prev.state.player;
    const p1 = state.player;
    return {
      state,
      player: { x: lerp(p0.x, p1.x, t), y: lerp(p0.y, p1.y, t) },
      agents,
    };
  }
}

function snap(state: StateMessage): RenderSample {
  return {
    state,
    player: { x: state.player.x, y: state.player.y },
    agents: state.visible_agents.map((a) => ({ id: a.id, x: a.x, y: a.y, phase: a.phase })),
  };
}
