// Event-stream client over fetch + ReadableStream with exponential-backoff
// reconnect. fetch streaming works both in browsers and in node, which
// lets the test suite drive the real daemon through this exact code path.

import type { StreamMessage } from "./types.js";

export interface StreamHandlers {
  onMessage: (message: StreamMessage) => void;
  onStatusChange?: (connected: boolean) => void;
}

export function parseSseChunk(buffer: string): { messages: string[]; rest: string } {
  // SSE events are separated by a blank line; data lines carry the payload
  const messages: string[] = [];
  let rest = buffer;
  for (;;) {
    const cut = rest.indexOf("\n\n");
    if (cut === -1) break;
    const event = rest.slice(0, cut);
    rest = rest.slice(cut + 2);
    for (const line of event.split("\n")) {
      if (line.startsWith("data: ")) {
        messages.push(line.slice(6));
      }
    }
  }
  return { messages, rest };
}

export function connectStream(url: string, handlers: StreamHandlers): () => void {
  let stopped = false;
  let controller: AbortController | null = null;
  let backoffMs = 500;

  const run = async () => {
    while (!stopped) {
      controller = new AbortController();
      try {
        const resp = await fetch(url, {
          signal: controller.signal,
          headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) throw new Error(`stream HTTP ${resp.status}`);
        handlers.onStatusChange?.(true);
        backoffMs = 500;
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { messages, rest } = parseSseChunk(buffer);
          buffer = rest;
          for (const raw of messages) {
            try {
              handlers.onMessage(JSON.parse(raw) as StreamMessage);
            } catch {
              // tolerate one undecodable message rather than dropping the link
            }
          }
        }
      } catch {
        // fall through to reconnect
      }
      handlers.onStatusChange?.(false);
      if (stopped) break;
      await new Promise((resolve) => setTimeout(resolve, backoffMs));
      backoffMs = Math.min(backoffMs * 2, 10_000);
    }
  };
  void run();

  return () => {
    stopped = true;
    controller?.abort();
  };
}
