/** View models for the station board. */

import type { DashboardState, TileState } from "./state.js";
import { isStale } from "./state.js";
import type { StatusLevel } from "./types.js";

export type TileColor = "green" | "yellow" | "red";

/** One color per status level, bijective by construction. */
export const STATUS_COLOR: Record<StatusLevel, TileColor> = {
  good: "green",
  warning: "yellow",
  critical: "red",
};

export interface TileModel {
  stationId: string;
  count: number;
  capacity: number;
  color: TileColor;
  secondsInStatus: number;
  stale: boolean;
}

export interface BoardModel {
  clock: number;
  depot: number | null;
  stale: boolean;
  lastUpdatedMs: number | null;
  tiles: TileModel[];
}

function tileModel(tile: TileState, clock: number, stale: boolean): TileModel {
  return {
    stationId: tile.stationId,
    count: tile.count,
    capacity: tile.capacity,
    color: STATUS_COLOR[tile.status],
    secondsInStatus: Math.max(0, clock - tile.statusEnteredAt),
    stale,
  };
}

export function boardModel(state: DashboardState, nowMs: number,
                           heartbeatMs: number): BoardModel {
  const stale = isStale(state, nowMs, heartbeatMs);
  const tiles = [...state.tiles.values()]
    .sort((a, b) => a.stationId.localeCompare(b.stationId))
    .map((t) => tileModel(t, state.clock, stale));
  return {
    clock: state.clock,
    depot: state.depot,
    stale,
    lastUpdatedMs: state.lastSignalAtMs,
    tiles,
  };
}
