/**
 * Entry point: wires query parameters, the session socket, keyboard input,
 * and the render loop together. All DOM access lives here and in paint.ts.
 *
 * Page parameters: ?host=127.0.0.1:8000&scenario=retrieval&seed=7
 * (host defaults to the page origin; decimation and name also pass through).
 * Keys: WASD or arrows to move, V toggles fit-map / follow-human camera.
 */

import { INPUT_INTERVAL_MS, InputPump, KeyState } from "./input";
import { parseMap, type MapGrid } from "./mapgrid";
import { openSession, sessionUrl } from "./net";
import { inputFrame, type EndFrame, type ServerFrame } from "./protocol";
import { buildScene } from "./scene";
import { paintScene, type CameraMode } from "./paint";
import { SnapshotBuffer } from "./view";

const qs = new URLSearchParams(location.search);
const host = qs.get("host") ?? location.host;
const scenario = qs.get("scenario") ?? "hallway";
const name = qs.get("name") ?? "webui";
const secure = location.protocol === "https:";

const canvas = document.getElementById("stage") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const overlay = document.getElementById("overlay") as HTMLDivElement;
const hud = document.getElementById("hud") as HTMLDivElement;

let map: MapGrid | null = null;
const buffer = new SnapshotBuffer();
const keys = new KeyState();
let camera: CameraMode = "fit";
let session = "";
let lastEvent = "";
let ended = false;
let errored = false;

function showOverlay(html: string): void {
  overlay.innerHTML = html;
  overlay.style.display = "flex";
}

function hideOverlay(): void {
  overlay.style.display = "none";
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function metricsTable(metrics: Record<string, number>): string {
  const rows = Object.keys(metrics)
    .sort()
    .map((k) => {
      const v = metrics[k];
      const shown = typeof v === "number" ? (Number.isInteger(v) ? String(v) : v.toFixed(3)) : String(v);
      return `<tr><td>${escapeHtml(k)}</td><td>${escapeHtml(shown)}</td></tr>`;
    })
    .join("");
  return `<table>${rows}</table>`;
}

const url = sessionUrl(host, secure, { seed: qs.get("seed"), decimation: qs.get("decimation") });
showOverlay(`<div class="card"><h1>connecting</h1><p>${escapeHtml(url)}</p></div>`);

const ws = openSession(url, scenario, name, {
  onFrame: handleFrame,
  onClose: () => {
    if (ended || errored) return;
    showOverlay(
      `<div class="card"><h1>disconnected</h1><p>the session closed before the trial ended</p></div>`,
    );
  },
});

function handleFrame(frame: ServerFrame): void {
  if (frame.kind === "Welcome") {
    session = frame.session;
    try {
      map = parseMap(frame.map);
    } catch (err) {
      errored = true;
      showOverlay(`<div class="card"><h1>bad map</h1><p>${escapeHtml(String(err))}</p></div>`);
      return;
    }
    hideOverlay();
    startPump();
  } else if (frame.kind === "Snapshot") {
    buffer.push(frame, performance.now());
  } else if (frame.kind === "Event") {
    lastEvent = `${frame.event} @ ${frame.tick}`;
  } else if (frame.kind === "End") {
    ended = true;
    stopPump();
    showEnd(frame);
  } else if (frame.kind === "Error") {
    errored = true;
    const detail = frame.detail ? `<p>${escapeHtml(frame.detail)}</p>` : "";
    showOverlay(`<div class="card"><h1>error: ${escapeHtml(frame.error)}</h1>${detail}</div>`);
  }
}

function showEnd(frame: EndFrame): void {
  showOverlay(
    `<div class="card"><h1>trial over: ${escapeHtml(frame.reason)}</h1>` +
      metricsTable(frame.metrics) +
      `<p class="dim">session ${escapeHtml(session)}</p></div>`,
  );
}

// --- input -----------------------------------------------------------------

const pump = new InputPump(keys, (move) => {
  if (ws.readyState === WebSocket.OPEN && !ended && !errored) {
    ws.send(inputFrame(Math.max(0, buffer.latestTick), move));
  }
});
let pumpTimer: number | undefined;

function startPump(): void {
  if (pumpTimer === undefined) {
    pumpTimer = window.setInterval(() => pump.tick(), INPUT_INTERVAL_MS);
  }
}

function stopPump(): void {
  if (pumpTimer !== undefined) {
    window.clearInterval(pumpTimer);
    pumpTimer = undefined;
  }
}

window.addEventListener("keydown", (e) => {
  if (e.repeat) return;
  if (keys.press(e.code)) e.preventDefault();
  if (e.code === "KeyV") camera = camera === "fit" ? "follow" : "fit";
});
window.addEventListener("keyup", (e) => keys.release(e.code));
window.addEventListener("blur", () => keys.clear());

// --- render loop -----------------------------------------------------------

function resize(): void {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.floor(canvas.clientWidth * dpr);
  canvas.height = Math.floor(canvas.clientHeight * dpr);
}
window.addEventListener("resize", resize);
resize();

function drawHud(tick: number, mode: string, battery: number): void {
  const pct = Math.round(battery * 100);
  hud.textContent =
    `${scenario}  tick ${tick}  ${mode}  battery ${pct}%` +
    (lastEvent ? `  |  ${lastEvent}` : "") +
    `  |  camera: ${camera} (V)`;
}

function loop(now: number): void {
  const view = buffer.sample(now);
  const shapes = buildScene(map, view);
  paintScene(ctx, canvas.width, canvas.height, map, shapes, camera, view ? [view.human[0], view.human[1]] : null);
  if (view) drawHud(view.tick, view.frame.robot.mode, view.frame.viz.battery);
  requestAnimationFrame(loop);
}
requestAnimationFrame(loop);
