/**
 * Minimal server-sent-events reader on top of fetch streaming, so the same
 * code runs in the browser and under node (the tests and the dashboard share
 * this path; EventSource would cover only the browser).
 */

export interface SseParseResult {
  events: string[]; // joined data payloads, one per complete event block
  rest: string; // trailing partial block to carry into the next chunk
}

/** Split buffered text into complete event blocks (blank-line terminated). */
export function parseSseBlocks(buffer: string): SseParseResult {
  const events: string[] = [];
  let start = 0;
  for (;;) {
    const end = buffer.indexOf("\n\n", start);
    if (end < 0) break;
    const block = buffer.slice(start, end);
    start = end + 2;
    const data: string[] = [];
    for (let line of block.split("\n")) {
      if (line.endsWith("\r")) line = line.slice(0, -1);
      if (line.startsWith("data:")) {
        data.push(line.slice(5).replace(/^ /, ""));
      }
      // other field names (event:, id:, retry:) and comments are ignored
    }
    if (data.length > 0) events.push(data.join("\n"));
  }
  return { events, rest: buffer.slice(start) };
}

/**
 * Read an event stream until the server closes it or the signal aborts.
 * Each complete event's data payload is handed to `onEvent`.
 */
export async function readEventStream(
  url: string,
  onEvent: (data: string) => void,
  signal: AbortSignal,
): Promise<void> {
  const resp = await fetch(url, { signal, headers: { Accept: "text/event-stream" } });
  if (!resp.ok || resp.body === null) {
    throw new Error(`stream rejected: HTTP ${resp.status}`);
  }
  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  for (;;) {
    const { done, value } = await reader.read();
    if (done) return;
    buffer += decoder.decode(value, { stream: true });
    const { events, rest } = parseSseBlocks(buffer);
    buffer = rest;
    for (const data of events) onEvent(data);
  }
}
