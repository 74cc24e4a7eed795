/** Session flow: questionnaire -> practice -> live -> end screen.
 *
 * The machine is deliberately server-authoritative.  Submitting the
 * questionnaire or clicking Start only yields a frame to send; the stage
 * advances when the server's welcome / state / end frames confirm it, so
 * the client can never show a phase the simulation is not in.
 */

import {
  decodeMap,
  helloFrom,
  type ClientMessage,
  type EncodedMap,
  type ServerMessage,
} from "./protocol.js";

export type Stage =
  | "questionnaire"
  | "connecting"
  | "practice"
  | "live"
  | "ended"
  | "aborted";

export interface EndSummary {
  outcome: string;
  /** Seconds from alarm to the exit, null when there was no escape. */
  egressTime: number | null;
  group: string;
  sessionId: string;
}

export class SessionFlow {
  stage: Stage = "questionnaire";
  sessionId = "";
  group = "";
  mapInfo: EncodedMap | null = null;
  grid: string[] | null = null;
  outcome: string | null = null;
  egressTime: number | null = null;
  lastError: string | null = null;

  /** Answers become the hello frame; stage waits on the welcome. */
  submitQuestionnaire(frequentGamer: boolean, buildingKnowledge: boolean): ClientMessage | null {
    if (this.stage !== "questionnaire") return null;
    this.stage = "connecting";
    return helloFrom({
      frequent_gamer: frequentGamer,
      building_knowledge: buildingKnowledge,
    });
  }

  /** The Start button: valid only while practicing. */
  requestStart(): ClientMessage | null {
    if (this.stage !== "practice") return null;
    return { type: "start" };
  }

  /** Live play accepts movement; practice does too. */
  get acceptsInput(): boolean {
    return this.stage === "practice" || this.stage === "live";
  }

  /** The HUD timer is a Live-phase instrument only. */
  get showTimer(): boolean {
    return this.stage === "live";
  }

  onMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "welcome":
        this.sessionId = msg.session_id;
        this.group = msg.group;
        this.mapInfo = msg.map;
        this.grid = decodeMap(msg.map);
        this.stage = "practice";
        return;
      case "state":
        if (msg.phase === "live" && this.stage === "practice") {
          this.stage = "live";
        }
        return;
      case "end":
        this.outcome = msg.outcome;
        this.egressTime = msg.egress_time;
        this.stage = "ended";
        return;
      case "error":
        // protocol rejections (wrong phase, bad frame) are advisory;
        // the session itself is still whatever the server says it is
        this.lastError = msg.error;
        return;
    }
  }

  /** Connection loss before the end frame is an aborted run. */
  onDisconnect(): void {
    if (this.stage !== "ended" && this.stage !== "questionnaire") {
      this.stage = "aborted";
    }
  }

  summary(): EndSummary | null {
    if (this.stage !== "ended") return null;
    return {
      outcome: this.outcome ?? "",
      egressTime: this.egressTime,
      group: this.group,
      sessionId: this.sessionId,
    };
  }
}
