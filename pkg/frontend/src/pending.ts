// Durable outbox for decisions that have not reached the server yet.
// Backed by (local)Storage so nothing is lost across reloads or network drops.

import type { PendingDecision } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const KEY = "wastefinder.pendingDecisions";

export class PendingStore {
  private storage: StorageLike;

  constructor(storage: StorageLike) {
    this.storage = storage;
  }

  all(): PendingDecision[] {
    const raw = this.storage.getItem(KEY);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as PendingDecision[];
    } catch {
      return [];
    }
  }

  enqueue(d: PendingDecision): void {
    const rest = this.all().filter((p) => p.siteId !== d.siteId);
    this.storage.setItem(KEY, JSON.stringify([...rest, d]));
  }

  remove(siteId: string): void {
    const rest = this.all().filter((p) => p.siteId !== siteId);
    if (rest.length === 0) this.storage.removeItem(KEY);
    else this.storage.setItem(KEY, JSON.stringify(rest));
  }
}

export interface FlushResult {
  sent: string[];
  conflicts: { siteId: string; existing: string }[];
  kept: string[]; // still pending (network failure), retried next flush
}

/** Push every pending decision; network errors keep entries queued for retry. */
export async function flushPending(
  store: PendingStore,
  submit: (d: PendingDecision) => Promise<void>,
  isConflict: (err: unknown) => string | null,
): Promise<FlushResult> {
  const result: FlushResult = { sent: [], conflicts: [], kept: [] };
  for (const d of store.all()) {
    try {
      await submit(d);
      store.remove(d.siteId);
      result.sent.push(d.siteId);
    } catch (err) {
      const existing = isConflict(err);
      if (existing !== null) {
        // the server already has a decision; local intent is obsolete
        store.remove(d.siteId);
        result.conflicts.push({ siteId: d.siteId, existing });
      } else {
        result.kept.push(d.siteId);
      }
    }
  }
  return result;
}
