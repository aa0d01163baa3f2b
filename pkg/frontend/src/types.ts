/** Document shapes served by the monitoring API (see backend docs/api.md).
 *
 * Field names stay snake_case exactly as served; the dashboard displays
 * these values, it never recomputes them.
 */

export type StatusLevel = "good" | "warning" | "critical";

export interface OpenAlert {
  alert_id: string;
  level: StatusLevel;
  raised_at: number;
  count_at_raise: number;
  acked_at: number | null;
  operator: string | null;
}

export interface StationSnapshot {
  station_id: string;
  capacity: number;
  count: number;
  status: StatusLevel;
  last_update: number;
  status_entered_at: number;
  warning_at: number;
  critical_at: number;
  open_alerts: OpenAlert[];
  displayed_count: number;
  pipeline_mode?: string;
}

export interface StationsDoc {
  t: number;
  depot: number;
  stations: StationSnapshot[];
}

export interface DispatchReceipt {
  dispatch_id: string | null;
  station: string;
  requested: number;
  accepted: number;
  eta_s: number | null;
}

export interface AckReceipt {
  alert_id: string;
  acked_at: number;
  operator: string;
}

export interface ReportRow {
  station_id: string;
  week_index: number;
  metric: string;
  value: number | null;
}

export interface AnalyticsDoc {
  rows: ReportRow[];
}

/** One parsed server-sent event with its broker sequence id. */
export interface EventFrame {
  event: string;
  seq: number;
  data: Record<string, unknown>;
}

export interface TimeWindow {
  start: number;
  end: number;
}
