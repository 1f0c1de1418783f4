import type { DemographicFieldInfo, ServerMessage } from "./protocol.js";

export interface SessionSocket {
  send(envelope: unknown): void;
  close(): void;
}

export function connectSession(
  onMessage: (msg: ServerMessage) => void,
  onOpen: () => void,
  onClose: () => void,
): SessionSocket {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${location.host}/ws`);
  ws.onopen = onOpen;
  ws.onclose = onClose;
  ws.onmessage = (ev) => {
    let parsed: ServerMessage;
    try {
      parsed = JSON.parse(ev.data);
    } catch {
      return; // not ours
    }
    onMessage(parsed);
  };
  return {
    send: (envelope) => {
      if (ws.readyState === WebSocket.OPEN) ws.send(JSON.stringify(envelope));
    },
    close: () => ws.close(),
  };
}

export async function fetchDemographicFields(): Promise<DemographicFieldInfo[]> {
  const res = await fetch("/api/demographics-fields");
  if (!res.ok) throw new Error(`demographics fields: HTTP ${res.status}`);
  return res.json();
}

export async function fetchProtocolName(): Promise<string> {
  const res = await fetch("/api/protocol");
  if (!res.ok) throw new Error(`protocol: HTTP ${res.status}`);
  const body = await res.json();
  return body.name;
}
