import { describe, expect, it } from "vitest";

import { PendingStore, flushPending, type StorageLike } from "../src/pending.js";
import type { PendingDecision } from "../src/types.js";

class MemoryStorage implements StorageLike {
  private map = new Map<string, string>();
  getItem(k: string) { return this.map.get(k) ?? null; }
  setItem(k: string, v: string) { this.map.set(k, v); }
  removeItem(k: string) { this.map.delete(k); }
}

function decision(siteId: string, d: "confirm" | "reject" = "confirm"): PendingDecision {
  return { siteId, decision: d, note: "", polygon: null, queuedAt: 1 };
}

describe("PendingStore", () => {
  it("persists decisions across store instances (reload survival)", () => {
    const storage = new MemoryStorage();
    new PendingStore(storage).enqueue(decision("s1"));
    const reloaded = new PendingStore(storage);
    expect(reloaded.all().map((d) => d.siteId)).toEqual(["s1"]);
  });

  it("re-enqueueing the same site replaces the entry", () => {
    const store = new PendingStore(new MemoryStorage());
    store.enqueue(decision("s1", "confirm"));
    store.enqueue(decision("s1", "reject"));
    expect(store.all()).toHaveLength(1);
    expect(store.all()[0].decision).toBe("reject");
  });
});

describe("flushPending", () => {
  it("sends everything and clears the outbox", async () => {
    const store = new PendingStore(new MemoryStorage());
    store.enqueue(decision("s1"));
    store.enqueue(decision("s2"));
    const sent: string[] = [];
    const result = await flushPending(store, async (d) => { sent.push(d.siteId); }, () => null);
    expect(sent).toEqual(["s1", "s2"]);
    expect(result.sent).toEqual(["s1", "s2"]);
    expect(store.all()).toEqual([]);
  });

  it("keeps entries when the network fails, for the next retry", async () => {
    const store = new PendingStore(new MemoryStorage());
    store.enqueue(decision("s1"));
    let attempts = 0;
    const failOnce = async () => {
      attempts += 1;
      if (attempts === 1) throw new Error("network down");
    };
    const first = await flushPending(store, failOnce, () => null);
    expect(first.kept).toEqual(["s1"]);
    expect(store.all()).toHaveLength(1); // decision retained locally
    const second = await flushPending(store, failOnce, () => null);
    expect(second.sent).toEqual(["s1"]);
    expect(store.all()).toEqual([]);
  });

  it("drops conflicting decisions and reports the server's verdict", async () => {
    const store = new PendingStore(new MemoryStorage());
    store.enqueue(decision("s1"));
    const result = await flushPending(
      store,
      async () => { throw new Error("409"); },
      () => "reject",
    );
    expect(result.conflicts).toEqual([{ siteId: "s1", existing: "reject" }]);
    expect(store.all()).toEqual([]);
  });
});
