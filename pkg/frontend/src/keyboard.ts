// Keyboard shortcuts: every queued item must be resolvable without the mouse.

import type { Decision } from "./types.js";

export type UiAction = Decision | "clear-sketch" | "toggle-overlay";

export const KEY_BINDINGS: Record<string, UiAction> = {
  c: "confirm",
  r: "reject",
  s: "skip",
  x: "clear-sketch",
  o: "toggle-overlay",
};

export function actionForKey(key: string): UiAction | null {
  return KEY_BINDINGS[key.toLowerCase()] ?? null;
}
