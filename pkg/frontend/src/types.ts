// Shapes exchanged with the site API.

export interface SiteProperties {
  id: string;
  mode: string;
  pixel_score: number;
  patch_score: number | null;
  blob_sigma: number;
  status: string;
  center_px: [number, number];
  first_month: string;
}

export interface SiteFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: SiteProperties;
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: SiteFeature[];
}

export interface HeatmapThumb {
  origin_px: [number, number];
  scores: number[][];
}

export interface ReviewQueueItem {
  id: string;
  coordinates: [number, number];
  pixelScore: number;
  patchScore: number | null;
  mode: string;
  firstMonth: string;
}

export type Decision = "confirm" | "reject" | "skip";

export interface PendingDecision {
  siteId: string;
  decision: "confirm" | "reject";
  note: string;
  polygon: number[][] | null;
  queuedAt: number;
}

export interface UiConfig {
  imagery_url_template: string;
  api_base: string;
}

export function toQueueItem(f: SiteFeature): ReviewQueueItem {
  return {
    id: f.properties.id,
    coordinates: f.geometry.coordinates,
    pixelScore: f.properties.pixel_score,
    patchScore: f.properties.patch_score,
    mode: f.properties.mode,
    firstMonth: f.properties.first_month,
  };
}
