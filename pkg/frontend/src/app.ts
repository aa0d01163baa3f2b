/** Browser entry point.  Everything testable lives in the modules this
 * file wires together; nothing imports app.ts back.
 */

import { ackAction, dispatchAction } from "./actions.js";
import { boardModel } from "./board.js";
import { ApiClient } from "./client.js";
import { startPolling, supportsStreaming } from "./poll.js";
import {
  renderAnalyticsHtml, renderBoardHtml, renderFeedHtml, renderToastsHtml,
} from "./render.js";
import { EventStreamReader, fetchChunkSource } from "./sse.js";
import {
  applyEvent, applySnapshot, initialState, noteDisconnect, noteSignal,
} from "./state.js";
import { loadToken, saveToken } from "./session.js";
import type { TimeWindow } from "./types.js";

// Matches the server's keep-alive cadence; silence past one interval
// flips the board to stale.
const HEARTBEAT_MS = 15_000;
const RECONNECT_DELAY_MS = 2_000;
const OPERATOR_KEY = "trolleywatch.operator";

function requireToken(): string {
  const store = window.sessionStorage;
  let token = loadToken(store);
  while (!token) {
    token = window.prompt("operator token") ?? "";
  }
  saveToken(store, token);
  return token;
}

function operatorName(): string {
  let name = window.sessionStorage.getItem(OPERATOR_KEY);
  if (!name) {
    name = window.prompt("operator name", "operator") || "operator";
    window.sessionStorage.setItem(OPERATOR_KEY, name);
  }
  return name;
}

function element(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function main(): void {
  const token = requireToken();
  // Same origin by default; "?api=http://host:port" points the page at a
  // server elsewhere (pair with the server's --cors flag).
  const apiBase =
    new URLSearchParams(window.location.search).get("api") ?? "";
  const client = new ApiClient(apiBase, token, (url, init) => window.fetch(url, init));
  const state = initialState();

  const boardEl = element("board");
  const feedEl = element("feed");
  const toastsEl = element("toasts");
  const analyticsEl = element("analytics");

  const redraw = (): void => {
    boardEl.innerHTML = renderBoardHtml(boardModel(state, Date.now(), HEARTBEAT_MS));
    feedEl.innerHTML = renderFeedHtml(state.feed);
    toastsEl.innerHTML = renderToastsHtml(state.toasts);
  };

  const snapshot = async (): Promise<void> => {
    try {
      applySnapshot(state, await client.stations());
      noteSignal(state, Date.now());
    } catch {
      noteDisconnect(state);
    }
    redraw();
  };

  const streamForever = async (): Promise<void> => {
    const reader = new EventStreamReader(
      fetchChunkSource((since) => client.eventsUrl(since)));
    for (;;) {
      await snapshot();
      await reader.run({
        onFrame: (frame) => {
          applyEvent(state, frame);
          redraw();
        },
        onResync: () => snapshot(),
        onSignal: () => noteSignal(state, Date.now()),
        onDisconnect: () => {
          noteDisconnect(state);
          redraw();
        },
      });
      await new Promise((r) => window.setTimeout(r, RECONNECT_DELAY_MS));
    }
  };

  const loadAnalytics = async (window_?: TimeWindow): Promise<void> => {
    try {
      const { doc } = await client.analyticsRaw(window_);
      analyticsEl.innerHTML = renderAnalyticsHtml(doc);
    } catch (err) {
      analyticsEl.innerHTML =
        `<p class="empty-state">analytics unavailable (${String(err)})</p>`;
    }
  };

  boardEl.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains("dispatch")) return;
    const station = target.dataset["station"];
    if (!station) return;
    const qty = Number(window.prompt("trolleys to dispatch", "10"));
    if (!Number.isFinite(qty) || qty <= 0) return;
    void dispatchAction(state, client, station, Math.floor(qty)).then(redraw);
  });

  feedEl.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains("ack")) return;
    const alertId = target.dataset["alertId"];
    if (!alertId) return;
    redraw(); // optimistic mark is visible immediately
    void ackAction(state, client, alertId, operatorName()).then(redraw);
  });

  element("analytics-refresh").addEventListener("click", () => {
    const start = Number((element("window-start") as HTMLInputElement).value);
    const end = Number((element("window-end") as HTMLInputElement).value);
    const window_ = Number.isFinite(start) && Number.isFinite(end) && end > start
      ? { start, end }
      : undefined;
    void loadAnalytics(window_); // exactly one fetch per click
  });

  window.setInterval(redraw, 1_000); // keeps the stale badge honest

  if (supportsStreaming(globalThis as unknown as Record<string, unknown>)) {
    void streamForever();
  } else {
    startPolling(snapshot, {
      setTimeout: (fn, ms) => window.setTimeout(fn, ms),
      clearTimeout: (h) => window.clearTimeout(h as number),
    });
  }
  void loadAnalytics();
}

main();
