/** Browser entry point: DOM wiring, the websocket, and the render loop. */

import { SessionFlow } from "./flow.js";
import { InputTracker, type Direction } from "./input.js";
import { StateBuffer } from "./interpolation.js";
import { parseMessage, type ClientMessage } from "./protocol.js";
import { drawFrame } from "./renderer.js";

const KEYMAP: Record<string, Direction> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  w: "up",
  s: "down",
  a: "left",
  d: "right",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function serverUrl(): string {
  const override = new URLSearchParams(location.search).get("server");
  if (override) return override;
  const host = location.hostname || "localhost";
  return `ws://${host}:8000/ws`;
}

function show(el: HTMLElement, visible: boolean): void {
  el.style.display = visible ? "" : "none";
}

function run(): void {
  const canvas = byId<HTMLCanvasElement>("view");
  const maybeCtx = canvas.getContext("2d");
  if (!maybeCtx) throw new Error("no 2d context");
  const ctx = maybeCtx;
  const form = byId<HTMLElement>("questionnaire");
  const joinBtn = byId<HTMLButtonElement>("join");
  const gamerBox = byId<HTMLInputElement>("q-gamer");
  const knowledgeBox = byId<HTMLInputElement>("q-knowledge");
  const startBtn = byId<HTMLButtonElement>("start");
  const banner = byId<HTMLElement>("banner");
  const endScreen = byId<HTMLElement>("endscreen");
  const endText = byId<HTMLElement>("endtext");

  const flow = new SessionFlow();
  const input = new InputTracker();
  const buffer = new StateBuffer();
  let ws: WebSocket | null = null;

  const send = (msg: ClientMessage): void => {
    if (ws && ws.readyState === WebSocket.OPEN) {
      ws.send(JSON.stringify(msg));
    }
  };

  joinBtn.addEventListener("click", () => {
    const hello = flow.submitQuestionnaire(gamerBox.checked, knowledgeBox.checked);
    if (!hello) return;
    ws = new WebSocket(serverUrl());
    ws.addEventListener("open", () => send(hello));
    ws.addEventListener("message", (ev) => {
      const msg = parseMessage(String(ev.data));
      flow.onMessage(msg);
      if (msg.type === "state") buffer.push(msg, performance.now());
      sync();
    });
    ws.addEventListener("close", () => {
      flow.onDisconnect();
      sync();
    });
    sync();
  });

  startBtn.addEventListener("click", () => {
    const msg = flow.requestStart();
    if (msg) send(msg);
  });

  window.addEventListener("keydown", (ev) => {
    const dir = KEYMAP[ev.key];
    if (dir) {
      input.press(dir);
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    const dir = KEYMAP[ev.key];
    if (dir) input.release(dir);
  });
  window.addEventListener("blur", () => input.releaseAll());

  function sync(): void {
    show(form, flow.stage === "questionnaire");
    show(startBtn, flow.stage === "practice");
    banner.textContent =
      flow.stage === "practice"
        ? "Practice: try the controls, then press Start"
        : flow.stage === "connecting"
          ? "Connecting..."
          : "";
    if (flow.stage === "ended") {
      const s = flow.summary();
      if (s) {
        const t = s.egressTime === null ? "no escape" : `${s.egressTime.toFixed(1)} s`;
        endText.textContent = `${s.outcome} | egress ${t} | group ${s.group}`;
      }
      show(endScreen, true);
    } else if (flow.stage === "aborted") {
      endText.textContent = "Session aborted: connection lost";
      show(endScreen, true);
    }
  }

  function frame(now: number): void {
    if (flow.acceptsInput) {
      const msg = input.sample(now);
      if (msg) send(msg);
    }
    const sample = buffer.sample(now);
    if (sample && flow.grid && flow.mapInfo) {
      drawFrame(
        ctx,
        { grid: flow.grid, cellSize: flow.mapInfo.cell_size },
        sample,
        flow.showTimer,
      );
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
  sync();
}

run();
