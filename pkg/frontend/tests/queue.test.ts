import { describe, expect, it } from "vitest";

import { ReviewQueue } from "../src/queue.js";
import type { ReviewQueueItem } from "../src/types.js";

function item(id: string, score: number): ReviewQueueItem {
  return { id, coordinates: [0, 0], pixelScore: score, patchScore: 0.5, mode: "high", firstMonth: "2020-07" };
}

describe("ReviewQueue", () => {
  it("orders by detection score descending with stable ties", () => {
    const q = new ReviewQueue();
    q.load([item("b", 0.5), item("a", 0.9), item("c", 0.5)]);
    expect(q.ids()).toEqual(["a", "b", "c"]);
  });

  it("pagination is stable", () => {
    const q = new ReviewQueue();
    q.load([item("a", 0.9), item("b", 0.8), item("c", 0.7), item("d", 0.6)]);
    expect(q.page(0, 2).map((i) => i.id)).toEqual(["a", "b"]);
    expect(q.page(2, 2).map((i) => i.id)).toEqual(["c", "d"]);
    expect(q.page(0, 2).map((i) => i.id)).toEqual(["a", "b"]); // unchanged by reads
  });

  it("skip re-queues the item at the end", () => {
    const q = new ReviewQueue();
    q.load([item("a", 0.9), item("b", 0.8), item("c", 0.7)]);
    q.skip("a");
    expect(q.ids()).toEqual(["b", "c", "a"]);
    expect(q.current()?.id).toBe("b");
  });

  it("resolve removes the item", () => {
    const q = new ReviewQueue();
    q.load([item("a", 0.9), item("b", 0.8)]);
    q.resolve("a");
    expect(q.ids()).toEqual(["b"]);
    expect(q.length).toBe(1);
  });

  it("empty queue exposes the empty state", () => {
    const q = new ReviewQueue();
    q.load([]);
    expect(q.isEmpty).toBe(true);
    expect(q.current()).toBeNull();
  });
});
