/** Server-sent events: incremental parser and a sequence-checked reader.
 *
 * The broker stamps every frame with a monotonically increasing id.  A
 * jump in ids, or an explicit `resync` frame, means the server's ring
 * buffer evicted events while we were away; the board must refetch REST
 * state before applying anything further.
 */

import type { EventFrame } from "./types.js";

export interface RawFrame {
  event: string;
  seq: number | null;
  data: string;
}

/** Feed text chunks in any framing; complete frames come out. */
export class SseParser {
  private buffer = "";
  private event = "";
  private id: number | null = null;
  private data: string[] = [];

  /** Comment lines seen so far; the server uses them as heartbeats. */
  heartbeats = 0;

  push(chunk: string): RawFrame[] {
    this.buffer += chunk;
    const frames: RawFrame[] = [];
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).replace(/\r$/, "");
      this.buffer = this.buffer.slice(nl + 1);
      if (line === "") {
        if (this.data.length > 0) {
          frames.push({
            event: this.event,
            seq: this.id,
            data: this.data.join("\n"),
          });
        }
        this.event = "";
        this.id = null;
        this.data = [];
      } else if (line.startsWith(":")) {
        this.heartbeats += 1;
      } else if (line.startsWith("event: ")) {
        this.event = line.slice("event: ".length);
      } else if (line.startsWith("id: ")) {
        const n = Number(line.slice("id: ".length));
        this.id = Number.isFinite(n) ? n : null;
      } else if (line.startsWith("data: ")) {
        this.data.push(line.slice("data: ".length));
      }
    }
    return frames;
  }
}

/** Opens one streaming connection starting after `since`. */
export type ChunkSource = (since: number) => AsyncIterable<string>;

export interface StreamHandler {
  onFrame(frame: EventFrame): void;
  /** Events were lost (server resync frame or a client-detected id gap);
   * refetch snapshot state, then keep consuming. */
  onResync(): void | Promise<void>;
  /** Any life sign, including heartbeat comments. */
  onSignal(): void;
  onDisconnect(error: unknown): void;
}

export class EventStreamReader {
  lastSeq: number;

  constructor(private readonly source: ChunkSource, since = 0) {
    this.lastSeq = since;
  }

  /** Consume one connection until it closes or errors. */
  async run(handler: StreamHandler): Promise<void> {
    const parser = new SseParser();
    let afterResync = false;
    try {
      for await (const chunk of this.source(this.lastSeq)) {
        handler.onSignal();
        for (const raw of parser.push(chunk)) {
          if (raw.event === "resync") {
            await handler.onResync();
            afterResync = true;
            continue;
          }
          if (raw.seq === null) continue;
          if (!afterResync && raw.seq !== this.lastSeq + 1) {
            await handler.onResync();
          }
          afterResync = false;
          this.lastSeq = raw.seq;
          handler.onFrame({
            event: raw.event,
            seq: raw.seq,
            data: JSON.parse(raw.data) as Record<string, unknown>,
          });
        }
      }
      handler.onDisconnect(null);
    } catch (err) {
      handler.onDisconnect(err);
    }
  }
}

/** Browser transport: streaming fetch against the events URL.  Separate
 * from EventStreamReader so tests can source chunks from scripts. */
export function fetchChunkSource(
  urlFor: (since: number) => string,
): ChunkSource {
  return async function* (since: number): AsyncIterable<string> {
    const resp = await fetch(urlFor(since));
    if (!resp.ok || resp.body === null) {
      throw new Error(`event stream failed (${resp.status})`);
    }
    const decoder = new TextDecoder();
    const reader = resp.body.getReader();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      yield decoder.decode(value, { stream: true });
    }
  };
}
