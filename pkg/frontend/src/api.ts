// Thin client over the site API. All mutation goes through submitReview;
// the UI never writes site state any other way.

import type { FeatureCollection, HeatmapThumb, SiteFeature, UiConfig } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ConflictError extends Error {
  existing: string;

  constructor(existing: string) {
    super(`site already reviewed as ${existing}`);
    this.existing = existing;
  }
}

export class ApiClient {
  private base: string;
  private fetchFn: FetchLike;

  constructor(base = "", fetchFn: FetchLike = (i, init) => fetch(i, init)) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async loadConfig(): Promise<UiConfig> {
    const r = await this.fetchFn(`${this.base}/ui-config.json`);
    if (!r.ok) return { imagery_url_template: "", api_base: "" };
    return (await r.json()) as UiConfig;
  }

  async listCandidates(mode?: string): Promise<SiteFeature[]> {
    const params = new URLSearchParams({ status: "candidate" });
    if (mode) params.set("mode", mode);
    const r = await this.fetchFn(`${this.base}/sites?${params}`);
    if (!r.ok) throw new Error(`list failed: ${r.status}`);
    const fc = (await r.json()) as FeatureCollection;
    return fc.features;
  }

  async getSite(id: string): Promise<SiteFeature> {
    const r = await this.fetchFn(`${this.base}/sites/${id}`);
    if (!r.ok) throw new Error(`site ${id}: ${r.status}`);
    return (await r.json()) as SiteFeature;
  }

  async getHeatmap(id: string): Promise<HeatmapThumb | null> {
    const r = await this.fetchFn(`${this.base}/sites/${id}/heatmap`);
    if (r.status === 404) return null;
    if (!r.ok) throw new Error(`heatmap ${id}: ${r.status}`);
    return (await r.json()) as HeatmapThumb;
  }

  async submitReview(
    id: string,
    decision: "confirm" | "reject",
    note = "",
    polygon: number[][] | null = null,
  ): Promise<void> {
    const r = await this.fetchFn(`${this.base}/sites/${id}/review`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ decision, note, polygon }),
    });
    if (r.status === 409) {
      const body = await r.json().catch(() => null);
      const existing = body?.detail?.existing ?? "unknown";
      throw new ConflictError(existing);
    }
    if (!r.ok) throw new Error(`review failed: ${r.status}`);
  }
}
