/** Snapshot polling, the fallback when streaming fetch is unavailable. */

export const POLL_INTERVAL_MS = 5000;

export interface Scheduler {
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

/** True when the runtime can consume a fetch body incrementally. */
export function supportsStreaming(globalObj: Record<string, unknown>): boolean {
  const response = globalObj["Response"];
  if (typeof globalObj["ReadableStream"] !== "function") return false;
  if (typeof response !== "function") return false;
  const proto = (response as { prototype?: object }).prototype;
  return proto !== undefined && "body" in proto;
}

/** Run `tick` now and then every `intervalMs`, never overlapping.  The
 * returned function stops the loop.  Errors are `tick`'s problem; a
 * throwing cycle still schedules the next one. */
export function startPolling(
  tick: () => Promise<void>,
  scheduler: Scheduler,
  intervalMs: number = POLL_INTERVAL_MS,
): () => void {
  let stopped = false;
  let handle: unknown = null;

  const cycle = (): void => {
    void tick()
      .catch(() => undefined)
      .then(() => {
        if (!stopped) handle = scheduler.setTimeout(cycle, intervalMs);
      });
  };
  cycle();

  return () => {
    stopped = true;
    if (handle !== null) scheduler.clearTimeout(handle);
  };
}
