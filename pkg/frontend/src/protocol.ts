/** Wire protocol: JSON text frames over a websocket at /ws.
 *
 * Client sends hello / start / input / bye; the server answers with
 * welcome / state / end / error.  Field names below mirror the server
 * exactly; this module is the only place they are spelled out.
 */

export type Vec2 = [number, number];

export interface Questionnaire {
  frequent_gamer: boolean;
  building_knowledge: boolean;
}

export interface HelloMessage {
  type: "hello";
  questionnaire: Questionnaire;
  seed?: number;
  repeat?: boolean;
}

export interface StartMessage {
  type: "start";
}

export interface InputMessage {
  type: "input";
  seq: number;
  move: Vec2;
}

export interface ByeMessage {
  type: "bye";
}

export type ClientMessage = HelloMessage | StartMessage | InputMessage | ByeMessage;

export interface EncodedMap {
  width: number;
  height: number;
  cell_size: number;
  /** Rows joined by "/", each row a sequence of <count><char> runs. */
  cells: string;
}

export interface WelcomeMessage {
  type: "welcome";
  session_id: string;
  group: "A" | "B" | "C" | "D";
  map: EncodedMap;
}

export interface AgentView {
  id: number;
  x: number;
  y: number;
  vx: number;
  vy: number;
  phase: string;
}

export interface PlayerView extends AgentView {
  health: number;
}

export interface SignView {
  x: number;
  y: number;
  direction: Vec2;
}

export interface StateMessage {
  type: "state";
  tick: number;
  phase: "practice" | "live";
  player: PlayerView;
  visible_agents: AgentView[];
  visible_fire_cells: Vec2[];
  /** [x, y, density] triples. */
  visible_smoke: [number, number, number][];
  visible_signs: SignView[];
  alarm_active: boolean;
  elapsed_since_alarm: number;
}

export interface EndMessage {
  type: "end";
  outcome: string;
  egress_time: number | null;
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export type ServerMessage = WelcomeMessage | StateMessage | EndMessage | ErrorMessage;

/** Cell characters as they appear in the encoded grid. */
export const WALL = "#";
export const FLOOR = ".";
export const DOOR = "D";
export const EXIT = "E";

export class ProtocolError extends Error {}

/** Parse one incoming frame.  Unknown types are surfaced as errors rather
 * than silently dropped: a version-skewed server should be loud. */
export function parseMessage(raw: string): ServerMessage {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    throw new ProtocolError(`unparseable frame: ${raw.slice(0, 80)}`);
  }
  if (typeof msg !== "object" || msg === null || !("type" in msg)) {
    throw new ProtocolError("frame has no type field");
  }
  const type = (msg as { type: unknown }).type;
  if (type === "welcome" || type === "state" || type === "end" || type === "error") {
    return msg as ServerMessage;
  }
  throw new ProtocolError(`unknown frame type ${String(type)}`);
}

const RUN = /(\d+)(\D)/g;

/** Expand the run-length encoded grid into rows of single characters.
 * Every row must decode to exactly `width` cells. */
export function decodeMap(encoded: EncodedMap): string[] {
  const rows = encoded.cells.split("/");
  if (rows.length !== encoded.height) {
    throw new ProtocolError(`expected ${encoded.height} rows, got ${rows.length}`);
  }
  return rows.map((row, y) => {
    let out = "";
    let consumed = 0;
    RUN.lastIndex = 0;
    for (const m of row.matchAll(RUN)) {
      out += (m[2] as string).repeat(Number(m[1]));
      consumed += (m[0] as string).length;
    }
    if (consumed !== row.length || out.length !== encoded.width) {
      throw new ProtocolError(`row ${y} decodes to ${out.length}/${encoded.width} cells`);
    }
    return out;
  });
}

export function helloFrom(q: Questionnaire, seed?: number, repeat?: boolean): HelloMessage {
  const msg: HelloMessage = { type: "hello", questionnaire: q };
  if (seed !== undefined) msg.seed = seed;
  if (repeat) msg.repeat = true;
  return msg;
}
