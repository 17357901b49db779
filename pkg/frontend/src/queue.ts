// Review queue ordering and paging. Pure state container so it is testable
// without a DOM: highest detection score first, skip re-queues at the end.

import type { ReviewQueueItem } from "./types.js";

export class ReviewQueue {
  private items: ReviewQueueItem[] = [];

  load(items: ReviewQueueItem[]): void {
    // score descending; id ties keep a stable, reproducible order
    this.items = [...items].sort(
      (a, b) => b.pixelScore - a.pixelScore || a.id.localeCompare(b.id),
    );
  }

  get length(): number {
    return this.items.length;
  }

  get isEmpty(): boolean {
    return this.items.length === 0;
  }

  current(): ReviewQueueItem | null {
    return this.items[0] ?? null;
  }

  page(offset: number, size: number): ReviewQueueItem[] {
    return this.items.slice(offset, offset + size);
  }

  /** Remove a resolved item (after the server acknowledged the decision). */
  resolve(id: string): void {
    this.items = this.items.filter((it) => it.id !== id);
  }

  /** Skip: the item reappears after the remaining queue. */
  skip(id: string): void {
    const idx = this.items.findIndex((it) => it.id === id);
    if (idx >= 0) {
      const [item] = this.items.splice(idx, 1);
      this.items.push(item);
    }
  }

  ids(): string[] {
    return this.items.map((it) => it.id);
  }
}
