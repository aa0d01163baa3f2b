/** Operator actions.  Only ack is optimistic; dispatch waits for the
 * server receipt, and tile counts move exclusively through the event
 * stream regardless of what these calls return.
 */

import type { ApiClient } from "./client.js";
import { ApiError } from "./client.js";
import type { DashboardState } from "./state.js";
import { pushToast } from "./state.js";

/** Acknowledge an alert.  Returns true when a POST was issued; a second
 * click on an already-acked item is a no-op. */
export async function ackAction(
  state: DashboardState,
  client: ApiClient,
  alertId: string,
  operator: string,
): Promise<boolean> {
  const item = state.feed.find((f) => f.alertId === alertId);
  if (item && item.acked) return false;
  if (item) {
    item.acked = true;
    item.operator = operator;
  }
  try {
    const receipt = await client.ack(alertId, operator);
    if (item) item.operator = receipt.operator;
  } catch (err) {
    if (item) {
      item.acked = false;
      item.operator = null;
    }
    const why = err instanceof ApiError
      ? `${err.status} ${JSON.stringify(err.detail)}`
      : String(err);
    pushToast(state, "error", `ack ${alertId} failed: ${why}`, state.clock);
  }
  return true;
}

/** Request a replenishment crew.  Success shows the ETA; a depot-empty
 * rejection surfaces the server's reason verbatim and changes nothing
 * else. */
export async function dispatchAction(
  state: DashboardState,
  client: ApiClient,
  stationId: string,
  qty: number,
): Promise<void> {
  try {
    const receipt = await client.replenish(stationId, qty);
    const eta = receipt.eta_s === null ? "n/a" : `t=${receipt.eta_s}`;
    pushToast(state, "info",
      `dispatch accepted: ${receipt.accepted}/${receipt.requested} ` +
      `to ${stationId}, ETA ${eta}`, state.clock);
  } catch (err) {
    if (err instanceof ApiError) {
      const detail = err.detail as { reason?: string } | null;
      const reason = detail && typeof detail.reason === "string"
        ? detail.reason
        : JSON.stringify(err.detail);
      pushToast(state, "error",
        `dispatch to ${stationId} rejected: ${reason}`, state.clock);
    } else {
      pushToast(state, "error",
        `dispatch to ${stationId} failed: ${String(err)}`, state.clock);
    }
  }
}
