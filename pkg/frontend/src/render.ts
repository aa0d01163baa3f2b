/** HTML renderers for every view.
 *
 * Pure string-in, string-out so tests can assert exactly what the
 * operator sees without a DOM.  app.ts assigns the output to
 * innerHTML; all interpolated text goes through escapeHtml.
 */

import {
  comparisonTable, cumulativeBars, isEmpty, responseSummary,
} from "./analytics.js";
import type { BoardModel, TileModel } from "./board.js";
import type { FeedItem, Toast } from "./state.js";
import type { AnalyticsDoc } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function clockLabel(t: number): string {
  const s = Math.floor(t);
  const hh = String(Math.floor(s / 3600)).padStart(2, "0");
  const mm = String(Math.floor((s % 3600) / 60)).padStart(2, "0");
  const ss = String(s % 60).padStart(2, "0");
  return `${hh}:${mm}:${ss}`;
}

function renderTile(tile: TileModel): string {
  const id = escapeHtml(tile.stationId);
  return (
    `<div class="tile tile-${tile.color}${tile.stale ? " tile-stale" : ""}"` +
    ` data-station="${id}">` +
    `<h3>${id}</h3>` +
    `<p class="count">${tile.count}<span class="cap">/${tile.capacity}</span></p>` +
    `<p class="since">${clockLabel(tile.secondsInStatus)} in status</p>` +
    `<button class="dispatch" data-station="${id}">dispatch crew</button>` +
    `</div>`
  );
}

export function renderBoardHtml(board: BoardModel): string {
  const badge = board.stale
    ? `<span class="badge badge-stale">stale` +
      (board.lastUpdatedMs !== null
        ? ` (last update ${new Date(board.lastUpdatedMs).toISOString()})`
        : "") +
      `</span>`
    : `<span class="badge badge-live">live</span>`;
  const depot = board.depot === null ? "?" : String(board.depot);
  return (
    `<header class="board-header">` +
    `<span class="clock">t=${clockLabel(board.clock)}</span>` +
    `<span class="depot">depot ${depot}</span>` +
    badge +
    `</header>` +
    `<div class="tiles">${board.tiles.map(renderTile).join("")}</div>`
  );
}

function renderFeedItem(item: FeedItem): string {
  const classes = ["feed-item", `level-${item.level}`];
  if (item.acked) classes.push("acked");
  if (item.resolved) classes.push("resolved");
  const ackLabel = item.acked
    ? `acked by ${escapeHtml(item.operator ?? "?")}`
    : `<button class="ack" data-alert-id="${escapeHtml(item.alertId)}"` +
      `${item.resolved ? " disabled" : ""}>ack</button>`;
  const donors = item.donors.length > 0
    ? `<p class="donors">donors: ${item.donors.map(escapeHtml).join(", ")}</p>`
    : "";
  const message = item.message
    ? `<p class="message">${escapeHtml(item.message)}</p>`
    : "";
  return (
    `<li class="${classes.join(" ")}" data-alert-id="${escapeHtml(item.alertId)}">` +
    `<strong>${escapeHtml(item.stationId)}</strong> ` +
    `${escapeHtml(item.level)} at t=${clockLabel(item.raisedAt)} ` +
    `(${item.count} trolleys) ${ackLabel}${donors}${message}` +
    `</li>`
  );
}

export function renderFeedHtml(feed: FeedItem[]): string {
  if (feed.length === 0) return `<p class="empty-state">no alerts</p>`;
  return `<ul class="feed">${feed.map(renderFeedItem).join("")}</ul>`;
}

export function renderToastsHtml(toasts: Toast[]): string {
  return toasts
    .map((t) =>
      `<div class="toast toast-${t.kind}">${escapeHtml(t.text)}</div>`)
    .join("");
}

/** Charts and table.  Values land in the markup exactly as parsed from
 * the served JSON; bar geometry lives in a CSS custom property so the
 * displayed number stays verbatim. */
export function renderAnalyticsHtml(doc: AnalyticsDoc): string {
  if (isEmpty(doc)) {
    return `<p class="empty-state">no events in this window</p>`;
  }
  const bars = cumulativeBars(doc);
  const barRow = (level: string, b: { station: string; week: number; value: number }) =>
    `<div class="bar bar-${level}" style="--value:${b.value}"` +
    ` data-station="${escapeHtml(b.station)}" data-week="${b.week}">` +
    `${escapeHtml(b.station)} w${b.week}: <span class="value">${b.value}</span>` +
    `</div>`;
  const barsHtml =
    `<section class="chart cumulative">` +
    `<h3>weekly time in status (s)</h3>` +
    bars.critical.map((b) => barRow("critical", b)).join("") +
    bars.warning.map((b) => barRow("warning", b)).join("") +
    `</section>`;

  const response = responseSummary(doc);
  const responseHtml =
    `<section class="chart response">` +
    `<h3>mean response time (s)</h3>` +
    response
      .map((p) =>
        `<div class="trend trend-${p.level}">${p.level}: ` +
        `<span class="value">${p.meanResponseS ?? "n/a"}</span>` +
        ` over <span class="value">${p.resolved ?? 0}</span> resolved</div>`)
      .join("") +
    `</section>`;

  const table = comparisonTable(doc);
  const header = table.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const rows = table.rows
    .map((r) => {
      const cells = table.columns
        .map((c) => {
          const v = r.values.get(c);
          return `<td>${v === null || v === undefined ? "" : v}</td>`;
        })
        .join("");
      return (
        `<tr data-station="${escapeHtml(r.station)}" data-week="${r.week}">` +
        `<td>${escapeHtml(r.station)}</td><td>${r.week}</td>${cells}</tr>`
      );
    })
    .join("");
  const tableHtml =
    `<section class="chart comparison">` +
    `<h3>station comparison</h3>` +
    `<table><thead><tr><th>station</th><th>week</th>${header}</tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `</section>`;

  return barsHtml + responseHtml + tableHtml;
}
