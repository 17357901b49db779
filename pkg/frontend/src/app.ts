// DOM wiring for the review queue. State changes flow one way: user intent ->
// pending store -> review endpoint -> queue update; reloading always
// reproduces server truth plus the local outbox.

import { ApiClient, ConflictError } from "./api.js";
import { drawHeatmap } from "./heatmap.js";
import { actionForKey } from "./keyboard.js";
import { PendingStore, flushPending } from "./pending.js";
import { ReviewQueue } from "./queue.js";
import { PolygonSketch } from "./sketch.js";
import { toQueueItem, type HeatmapThumb, type ReviewQueueItem, type UiConfig } from "./types.js";

const THUMB_SCALE = 6;
const PIXEL_METERS = 10;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class App {
  private api = new ApiClient();
  private queue = new ReviewQueue();
  private pending = new PendingStore(window.localStorage);
  private sketch = new PolygonSketch();
  private config: UiConfig = { imagery_url_template: "", api_base: "" };
  private thumb: HeatmapThumb | null = null;
  private overlayOpacity = 0.7;

  async start(): Promise<void> {
    this.config = await this.api.loadConfig();
    if (this.config.api_base) this.api = new ApiClient(this.config.api_base);
    await this.retryPending();
    await this.reload();
    this.bind();
    window.setInterval(() => void this.retryPending(), 15_000);
  }

  private async reload(): Promise<void> {
    try {
      const mode = (el<HTMLSelectElement>("mode-filter")).value || undefined;
      const feats = await this.api.listCandidates(mode);
      const locallyDecided = new Set(this.pending.all().map((p) => p.siteId));
      this.queue.load(feats.map(toQueueItem).filter((it) => !locallyDecided.has(it.id)));
      this.setStatus("");
    } catch {
      this.setStatus("server unreachable - showing nothing; retry when it is back");
      el<HTMLButtonElement>("retry").hidden = false;
      return;
    }
    el<HTMLButtonElement>("retry").hidden = true;
    await this.render();
  }

  private async retryPending(): Promise<void> {
    const result = await flushPending(
      this.pending,
      (d) => this.api.submitReview(d.siteId, d.decision, d.note, d.polygon),
      (err) => (err instanceof ConflictError ? err.existing : null),
    );
    for (const c of result.conflicts) {
      this.setStatus(`site ${c.siteId} was already reviewed as ${c.existing}`);
    }
  }

  private bind(): void {
    el<HTMLButtonElement>("confirm").onclick = () => void this.decide("confirm");
    el<HTMLButtonElement>("reject").onclick = () => void this.decide("reject");
    el<HTMLButtonElement>("skip").onclick = () => void this.decide("skip");
    el<HTMLButtonElement>("clear-sketch").onclick = () => this.clearSketch();
    el<HTMLButtonElement>("retry").onclick = () => void this.reload();
    el<HTMLSelectElement>("mode-filter").onchange = () => void this.reload();
    const slider = el<HTMLInputElement>("opacity");
    slider.oninput = () => {
      this.overlayOpacity = Number(slider.value) / 100;
      this.renderOverlay();
    };
    el<HTMLCanvasElement>("overlay").onclick = (ev) => this.addSketchVertex(ev);
    document.addEventListener("keydown", (ev) => {
      if ((ev.target as HTMLElement)?.tagName === "TEXTAREA") return;
      const action = actionForKey(ev.key);
      if (action === "confirm" || action === "reject" || action === "skip") void this.decide(action);
      else if (action === "clear-sketch") this.clearSketch();
      else if (action === "toggle-overlay") {
        this.overlayOpacity = this.overlayOpacity > 0 ? 0 : 0.7;
        this.renderOverlay();
      }
    });
  }

  private async decide(decision: "confirm" | "reject" | "skip"): Promise<void> {
    const item = this.queue.current();
    if (!item) return;
    if (decision === "skip") {
      this.queue.skip(item.id);
      await this.render();
      return;
    }
    const { polygon, error } = this.sketch.finish();
    if (error) {
      this.setStatus(error);
      return;
    }
    const note = el<HTMLTextAreaElement>("note").value;
    this.pending.enqueue({
      siteId: item.id, decision, note,
      polygon: polygon ? polygon.map((p) => [p[0], p[1]]) : null,
      queuedAt: Date.now(),
    });
    this.queue.resolve(item.id);
    this.clearSketch();
    el<HTMLTextAreaElement>("note").value = "";
    await this.retryPending();
    await this.render();
  }

  private async render(): Promise<void> {
    const item = this.queue.current();
    el<HTMLElement>("queue-count").textContent = String(this.queue.length);
    const empty = el<HTMLElement>("empty-state");
    const view = el<HTMLElement>("site-view");
    if (!item) {
      empty.hidden = false;
      view.hidden = true;
      return;
    }
    empty.hidden = true;
    view.hidden = false;
    el<HTMLElement>("site-id").textContent = item.id;
    el<HTMLElement>("site-meta").textContent =
      `mode ${item.mode} | pixel ${item.pixelScore.toFixed(3)} | ` +
      `patch ${item.patchScore?.toFixed(3) ?? "-"} | since ${item.firstMonth} | ` +
      `(${item.coordinates[0].toFixed(0)}, ${item.coordinates[1].toFixed(0)})`;
    this.renderQueueList();
    this.renderImagery(item);
    this.thumb = await this.api.getHeatmap(item.id).catch(() => null);
    this.renderOverlay();
  }

  private renderQueueList(): void {
    const list = el<HTMLOListElement>("queue-list");
    list.replaceChildren(
      ...this.queue.page(0, 12).map((it) => {
        const li = document.createElement("li");
        li.textContent = `${it.id} (${it.pixelScore.toFixed(2)})`;
        return li;
      }),
    );
  }

  private renderImagery(item: ReviewQueueItem): void {
    const img = el<HTMLImageElement>("imagery");
    const note = el<HTMLElement>("imagery-missing");
    const template = this.config.imagery_url_template;
    if (!template) {
      img.hidden = true;
      note.hidden = false; // heatmap-only fallback
      return;
    }
    img.hidden = false;
    note.hidden = true;
    img.src = template
      .replace("{x}", String(Math.round(item.coordinates[0])))
      .replace("{y}", String(Math.round(item.coordinates[1])))
      .replace("{z}", "16");
    img.onerror = () => {
      img.hidden = true;
      note.hidden = false;
    };
  }

  private renderOverlay(): void {
    const canvas = el<HTMLCanvasElement>("overlay");
    if (!this.thumb) {
      canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
      return;
    }
    drawHeatmap(canvas, this.thumb.scores, this.overlayOpacity, THUMB_SCALE);
    this.drawSketch(canvas);
  }

  private addSketchVertex(ev: MouseEvent): void {
    const item = this.queue.current();
    if (!item || !this.thumb) return;
    const canvas = el<HTMLCanvasElement>("overlay");
    const rect = canvas.getBoundingClientRect();
    const px = this.thumb.origin_px[0] + (ev.clientX - rect.left) / THUMB_SCALE;
    const py = this.thumb.origin_px[1] + (ev.clientY - rect.top) / THUMB_SCALE;
    // raw geographic vertices; the site center anchors the local frame
    const [cx, cy] = item.coordinates;
    const geo: [number, number] = [
      cx + (px - (this.thumb.origin_px[0] + this.thumb.scores[0].length / 2)) * PIXEL_METERS,
      cy - (py - (this.thumb.origin_px[1] + this.thumb.scores.length / 2)) * PIXEL_METERS,
    ];
    this.sketch.add(geo);
    this.drawSketch(canvas);
  }

  private drawSketch(canvas: HTMLCanvasElement): void {
    const ctx = canvas.getContext("2d");
    const item = this.queue.current();
    if (!ctx || !item || !this.thumb) return;
    const pts = this.sketch.points();
    if (!pts.length) return;
    const [cx, cy] = item.coordinates;
    const toCanvas = (g: [number, number]): [number, number] => [
      ((g[0] - cx) / PIXEL_METERS + this.thumb!.scores[0].length / 2) * THUMB_SCALE,
      ((cy - g[1]) / PIXEL_METERS + this.thumb!.scores.length / 2) * THUMB_SCALE,
    ];
    ctx.strokeStyle = "#00e5ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.map(toCanvas).forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
    ctx.closePath();
    ctx.stroke();
  }

  private clearSketch(): void {
    this.sketch.clear();
    this.renderOverlay();
  }

  private setStatus(msg: string): void {
    el<HTMLElement>("status").textContent = msg;
  }
}

new App().start().catch((err) => {
  document.body.textContent = `failed to start: ${err}`;
});
