/**
 * WebSocket session lifecycle: open, Join, decoded frame callbacks, close.
 */

import { decodeFrame, joinFrame, type ServerFrame } from "./protocol";

export type SessionHooks = {
  onOpen?: () => void;
  onFrame: (frame: ServerFrame) => void;
  onClose: () => void;
};

/** Build the /session URL; seed and decimation ride as query parameters. */
export function sessionUrl(
  host: string,
  secure: boolean,
  opts: { seed?: string | null; decimation?: string | null } = {},
): string {
  const params = new URLSearchParams();
  if (opts.seed != null && opts.seed !== "") params.set("seed", opts.seed);
  if (opts.decimation != null && opts.decimation !== "") params.set("decimation", opts.decimation);
  const query = params.toString();
  return `${secure ? "wss" : "ws"}://${host}/session${query ? "?" + query : ""}`;
}

export function openSession(
  url: string,
  scenario: string,
  name: string,
  hooks: SessionHooks,
): WebSocket {
  const ws = new WebSocket(url);
  ws.onopen = () => {
    ws.send(joinFrame(scenario, name));
    hooks.onOpen?.();
  };
  ws.onmessage = (ev) => {
    const frame = decodeFrame(String(ev.data));
    if (frame) hooks.onFrame(frame);
  };
  ws.onclose = () => hooks.onClose();
  return ws;
}
