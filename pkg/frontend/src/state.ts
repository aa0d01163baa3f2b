/** Dashboard state and the event reducer.
 *
 * Counts and statuses change only through monitor observations and REST
 * snapshots, never through arithmetic here.  That keeps the invariant
 * the round-trip test pins down: applying stream frames in sequence
 * order produces the same board as a fresh GET /stations.
 */

import type {
  EventFrame, StationSnapshot, StationsDoc, StatusLevel,
} from "./types.js";

export interface TileState {
  stationId: string;
  capacity: number;
  count: number;
  status: StatusLevel;
  statusEnteredAt: number;
  lastUpdate: number;
}

export interface FeedItem {
  alertId: string;
  stationId: string;
  level: StatusLevel;
  raisedAt: number;
  count: number;
  acked: boolean;
  operator: string | null;
  resolved: boolean;
  donors: string[];
  message: string;
}

export interface Toast {
  kind: "info" | "error";
  text: string;
  at: number;
}

export interface DashboardState {
  clock: number;
  depot: number | null;
  tiles: Map<string, TileState>;
  feed: FeedItem[]; // newest first
  toasts: Toast[];
  lastSignalAtMs: number | null;
  connected: boolean;
}

const TOAST_KEEP = 5;

export function initialState(): DashboardState {
  return {
    clock: 0,
    depot: null,
    tiles: new Map(),
    feed: [],
    toasts: [],
    lastSignalAtMs: null,
    connected: false,
  };
}

function tileFrom(snap: StationSnapshot): TileState {
  return {
    stationId: snap.station_id,
    capacity: snap.capacity,
    count: snap.count,
    status: snap.status,
    statusEnteredAt: snap.status_entered_at,
    lastUpdate: snap.last_update,
  };
}

/** Replace board state with a REST snapshot (startup and resync). */
export function applySnapshot(state: DashboardState, doc: StationsDoc): void {
  state.clock = Math.max(state.clock, doc.t);
  state.depot = doc.depot;
  state.tiles = new Map(doc.stations.map((s) => [s.station_id, tileFrom(s)]));

  const open = new Set<string>();
  for (const snap of doc.stations) {
    for (const alert of snap.open_alerts) {
      open.add(alert.alert_id);
      const item = state.feed.find((f) => f.alertId === alert.alert_id);
      if (item) {
        item.acked = alert.acked_at !== null;
        item.operator = alert.operator;
        item.resolved = false;
      } else {
        state.feed.unshift({
          alertId: alert.alert_id,
          stationId: snap.station_id,
          level: alert.level,
          raisedAt: alert.raised_at,
          count: alert.count_at_raise,
          acked: alert.acked_at !== null,
          operator: alert.operator,
          resolved: false,
          donors: [],
          message: "",
        });
      }
    }
  }
  // Anything we thought was open but the snapshot no longer lists got
  // resolved while we were away.
  for (const item of state.feed) {
    if (!item.resolved && !open.has(item.alertId)) item.resolved = true;
  }
  sortFeed(state);
}

function sortFeed(state: DashboardState): void {
  // Newest first; stable for equal timestamps.
  state.feed.sort((a, b) => b.raisedAt - a.raisedAt);
}

export function pushToast(state: DashboardState, kind: Toast["kind"],
                          text: string, at: number): void {
  state.toasts.unshift({ kind, text, at });
  state.toasts.length = Math.min(state.toasts.length, TOAST_KEEP);
}

function num(v: unknown): number {
  return typeof v === "number" ? v : 0;
}

function str(v: unknown): string {
  return typeof v === "string" ? v : "";
}

/** Apply one stream frame.  Frames must arrive in sequence order; the
 * reader enforces that. */
export function applyEvent(state: DashboardState, frame: EventFrame): void {
  const d = frame.data;
  const t = num(d["t"]);
  state.clock = Math.max(state.clock, t);
  const station = str(d["station"]);

  switch (frame.event) {
    case "observation": {
      const tile = state.tiles.get(station);
      if (!tile) break;
      tile.count = num(d["count"]);
      const status = str(d["status"]) as StatusLevel;
      if (status && status !== tile.status) {
        tile.status = status;
        tile.statusEnteredAt = t;
      }
      tile.lastUpdate = t;
      break;
    }
    case "status_change": {
      const tile = state.tiles.get(station);
      if (!tile) break;
      tile.status = str(d["to"]) as StatusLevel;
      tile.statusEnteredAt = t;
      break;
    }
    case "alert_raised": {
      state.feed.unshift({
        alertId: str(d["alert_id"]),
        stationId: station,
        level: str(d["level"]) as StatusLevel,
        raisedAt: t,
        count: num(d["count"]),
        acked: false,
        operator: null,
        resolved: false,
        donors: [],
        message: "",
      });
      sortFeed(state);
      break;
    }
    case "notification": {
      const item = state.feed.find((f) => f.alertId === str(d["alert_id"]));
      if (item) {
        item.donors = Array.isArray(d["donors"])
          ? (d["donors"] as unknown[]).map(String)
          : [];
        item.message = str(d["message"]);
      }
      break;
    }
    case "alert_resolved": {
      const item = state.feed.find((f) => f.alertId === str(d["alert_id"]));
      if (item) item.resolved = true;
      break;
    }
    case "ack": {
      const item = state.feed.find((f) => f.alertId === str(d["alert_id"]));
      if (item) {
        item.acked = true;
        item.operator = str(d["operator"]);
      }
      break;
    }
    case "dispatch": {
      pushToast(state, "info",
        `crew to ${station}: ${num(d["accepted"])} trolleys, ` +
        `ETA t=${num(d["eta_s"])}`, t);
      break;
    }
    case "rejection": {
      if (str(d["reason"]) === "depot_empty") {
        pushToast(state, "error", `dispatch to ${station} rejected: depot_empty`, t);
      }
      break;
    }
    case "deliver": {
      // The count itself arrives with the next observation; this is
      // just operator feedback that the crew landed.
      pushToast(state, "info",
        `delivery landed at ${station} (+${num(d["qty"])})`, t);
      break;
    }
    default:
      break; // overflow, occlusion markers etc. have no board effect
  }
}

/** True when the stream has gone quiet for longer than one heartbeat. */
export function isStale(state: DashboardState, nowMs: number,
                        heartbeatMs: number): boolean {
  if (!state.connected) return true;
  if (state.lastSignalAtMs === null) return true;
  return nowMs - state.lastSignalAtMs > heartbeatMs;
}

export function noteSignal(state: DashboardState, nowMs: number): void {
  state.connected = true;
  state.lastSignalAtMs = nowMs;
}

export function noteDisconnect(state: DashboardState): void {
  state.connected = false;
}
