/** Top-down canvas renderer.
 *
 * Draw order: floor/walls from the static layer, smoke as an alpha
 * overlay, fire, signs with their pointed arrows, agents as discs, the
 * player on top, then the HUD.  Only entities present in the sampled
 * state are drawn; the client holds no world model of its own.
 */

import type { RenderSample } from "./interpolation.js";
import { DOOR, EXIT, WALL, type Vec2 } from "./protocol.js";

export const PX_PER_METER = 48;

const COLORS = {
  wall: "#2b2b33",
  floor: "#d9d4c8",
  door: "#a3763b",
  exit: "#3fae54",
  fire: "#e8531f",
  sign: "#1f7a3d",
  npc: "#4a6fa5",
  incapacitated: "#7a2430",
  player: "#f2f2f2",
  playerRim: "#111111",
};

function phaseColor(phase: string): string {
  return phase === "incapacitated" ? COLORS.incapacitated : COLORS.npc;
}

export interface Scene {
  grid: string[];
  cellSize: number;
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  scene: Scene,
  sample: RenderSample,
  showTimer: boolean,
): void {
  const { width, height } = ctx.canvas;
  const s = sample.state;
  ctx.fillStyle = "#191919";
  ctx.fillRect(0, 0, width, height);

  ctx.save();
  // camera: player at canvas center
  ctx.translate(
    width / 2 - sample.player.x * PX_PER_METER,
    height / 2 - sample.player.y * PX_PER_METER,
  );
  const cellPx = scene.cellSize * PX_PER_METER;

  scene.grid.forEach((row, y) => {
    for (let x = 0; x < row.length; x++) {
      const ch = row[x];
      ctx.fillStyle =
        ch === WALL ? COLORS.wall
        : ch === DOOR ? COLORS.door
        : ch === EXIT ? COLORS.exit
        : COLORS.floor;
      ctx.fillRect(x * cellPx, y * cellPx, cellPx, cellPx);
    }
  });

  for (const [x, y, density] of s.visible_smoke) {
    ctx.fillStyle = `rgba(40, 40, 40, ${(0.75 * density).toFixed(3)})`;
    ctx.fillRect(x * cellPx, y * cellPx, cellPx, cellPx);
  }

  ctx.fillStyle = COLORS.fire;
  for (const [x, y] of s.visible_fire_cells) {
    ctx.fillRect(x * cellPx + 1, y * cellPx + 1, cellPx - 2, cellPx - 2);
  }

  for (const sign of s.visible_signs) {
    drawSign(ctx, sign.x, sign.y, sign.direction, cellPx);
  }

  for (const a of sample.agents) {
    disc(ctx, a.x * PX_PER_METER, a.y * PX_PER_METER, 0.35 * cellPx, phaseColor(a.phase));
  }
  disc(
    ctx,
    sample.player.x * PX_PER_METER,
    sample.player.y * PX_PER_METER,
    0.4 * cellPx,
    COLORS.player,
    COLORS.playerRim,
  );
  ctx.restore();

  drawHud(ctx, s.elapsed_since_alarm, s.player.health, s.phase, s.alarm_active, showTimer);
}

function disc(
  ctx: CanvasRenderingContext2D,
  px: number,
  py: number,
  r: number,
  fill: string,
  rim?: string,
): void {
  ctx.beginPath();
  ctx.arc(px, py, r, 0, 2 * Math.PI);
  ctx.fillStyle = fill;
  ctx.fill();
  if (rim) {
    ctx.lineWidth = 2;
    ctx.strokeStyle = rim;
    ctx.stroke();
  }
}

function drawSign(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  dir: Vec2,
  cellPx: number,
): void {
  const cx = (x + 0.5) * cellPx;
  const cy = (y + 0.5) * cellPx;
  ctx.fillStyle = COLORS.sign;
  ctx.fillRect(cx - cellPx * 0.3, cy - cellPx * 0.3, cellPx * 0.6, cellPx * 0.6);
  const [dx, dy] = dir;
  const mag = Math.hypot(dx, dy) || 1;
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + (dx / mag) * cellPx * 0.45, cy + (dy / mag) * cellPx * 0.45);
  ctx.stroke();
}

function drawHud(
  ctx: CanvasRenderingContext2D,
  elapsed: number,
  health: number,
  phase: string,
  alarm: boolean,
  showTimer: boolean,
): void {
  ctx.save();
  ctx.font = "16px monospace";
  if (showTimer) {
    ctx.fillStyle = "#ffffff";
    ctx.fillText(`${elapsed.toFixed(1)} s`, 12, 24);
  }
  // health bar, top right
  const w = 120;
  ctx.fillStyle = "#333333";
  ctx.fillRect(ctx.canvas.width - w - 12, 12, w, 10);
  ctx.fillStyle = health > 0.3 ? "#3fae54" : "#c23b22";
  ctx.fillRect(ctx.canvas.width - w - 12, 12, w * Math.max(0, health), 10);

  ctx.fillStyle = "#cccccc";
  ctx.fillText(phase.toUpperCase(), 12, ctx.canvas.height - 14);
  if (alarm) {
    // flash at 2 Hz off the wall clock; purely cosmetic
    if (Math.floor(performance.now() / 250) % 2 === 0) {
      ctx.fillStyle = "#e8531f";
      ctx.font = "bold 20px monospace";
      ctx.fillText("FIRE ALARM", ctx.canvas.width / 2 - 55, 28);
    }
  }
  ctx.restore();
}
