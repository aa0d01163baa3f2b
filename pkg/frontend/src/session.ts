/** Operator token, entered once per browser session. */

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export const TOKEN_KEY = "trolleywatch.token";

export function loadToken(store: KeyValueStore): string | null {
  const token = store.getItem(TOKEN_KEY);
  return token && token.length > 0 ? token : null;
}

export function saveToken(store: KeyValueStore, token: string): void {
  store.setItem(TOKEN_KEY, token);
}

export function clearToken(store: KeyValueStore): void {
  store.removeItem(TOKEN_KEY);
}
