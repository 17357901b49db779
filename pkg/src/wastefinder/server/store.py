"""Site persistence: an append-only JSON-lines event log plus materialized snapshots.

State is whatever replaying the log yields, so the log is the single source of
truth and trivially diffable. Review decisions append label records that the
data engine reads on its next assembly cycle.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from wastefinder.detect import CandidateSite

EVENTS_FILE = "events.jsonl"
LABELS_FILE = "labels.jsonl"
SNAPSHOT_FILE = "sites.geojson"

VALID_DECISIONS = ("confirm", "reject")
_STATUS_FOR = {"confirm": "confirmed", "reject": "rejected"}


class SiteNotFoundError(KeyError):
    pass


class ReviewConflictError(RuntimeError):
    def __init__(self, site_id: str, existing: str, attempted: str):
        super().__init__(
            f"site {site_id} already reviewed as {existing!r}; refusing conflicting {attempted!r}"
        )
        self.existing = existing
        self.attempted = attempted


@dataclass
class Review:
    decision: str
    note: str = ""
    polygon: list | None = None
    timestamp: float = 0.0


@dataclass
class LabelRecord:
    site_id: str
    label_class: str  # positive | negative
    center_geo: list
    polygon: list | None = None
    source: str = "review"
    timestamp: float = 0.0


@dataclass
class SiteRecord:
    site: CandidateSite
    reviews: list[Review] = field(default_factory=list)
    footprints: dict | None = None  # monthly contour GeoJSON payload
    waterway_m: float | None = None
    waterway_tag: str | None = None
    heatmap_thumb: dict | None = None  # small score grid for the review UI

    @property
    def status(self) -> str:
        return self.site.status

    def to_feature(self) -> dict:
        s = self.site
        return {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.center_geo[0], s.center_geo[1]]},
            "properties": {
                "id": s.id,
                "mode": s.mode,
                "pixel_score": s.pixel_score,
                "patch_score": s.patch_score,
                "blob_sigma": s.sigma,
                "status": s.status,
                "center_px": list(s.center_px),
                "first_month": s.first_month,
                "waterway_m": self.waterway_m,
                "waterway_tag": self.waterway_tag,
                "reviews": [asdict(r) for r in self.reviews],
            },
        }


def _site_to_dict(s: CandidateSite) -> dict:
    return {
        "id": s.id,
        "center_px": list(s.center_px),
        "center_geo": list(s.center_geo),
        "sigma": s.sigma,
        "pixel_score": s.pixel_score,
        "patch_score": s.patch_score,
        "mode": s.mode,
        "status": s.status,
        "first_month": s.first_month,
    }


def _site_from_dict(d: dict) -> CandidateSite:
    return CandidateSite(
        id=d["id"],
        center_px=tuple(d["center_px"]),
        center_geo=tuple(d["center_geo"]),
        sigma=d["sigma"],
        pixel_score=d["pixel_score"],
        patch_score=d.get("patch_score"),
        mode=d["mode"],
        status=d.get("status", "candidate"),
        first_month=d.get("first_month", ""),
    )


class SiteStore:
    """Single-writer event-sourced store; reads see a consistent in-memory state."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.records: dict[str, SiteRecord] = {}
        self._replay()

    # -- event machinery ----------------------------------------------------

    def _events_path(self) -> Path:
        return self.dir / EVENTS_FILE

    def _append_event(self, event: dict) -> None:
        with open(self._events_path(), "a") as f:
            f.write(json.dumps(event) + "\n")

    def _replay(self) -> None:
        self.records = {}
        path = self._events_path()
        if not path.exists():
            return
        for line in path.read_text().splitlines():
            if line.strip():
                self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "site_added":
            site = _site_from_dict(event["site"])
            if site.id not in self.records:
                rec = SiteRecord(site=site)
                rec.heatmap_thumb = event.get("heatmap_thumb")
                self.records[site.id] = rec
        elif kind == "review":
            rec = self.records[event["site_id"]]
            rec.reviews.append(
                Review(
                    decision=event["decision"],
                    note=event.get("note", ""),
                    polygon=event.get("polygon"),
                    timestamp=event.get("timestamp", 0.0),
                )
            )
            rec.site.status = _STATUS_FOR[event["decision"]]
        elif kind == "footprints":
            self.records[event["site_id"]].footprints = event["payload"]
        elif kind == "metadata":
            rec = self.records[event["site_id"]]
            rec.waterway_m = event.get("waterway_m", rec.waterway_m)
            rec.waterway_tag = event.get("waterway_tag", rec.waterway_tag)
        else:
            raise ValueError(f"unknown event type {kind!r}")

    # -- writes ---------------------------------------------------------------

    def add_candidates(self, cands: list[CandidateSite], heatmap_thumbs: dict | None = None) -> int:
        """Register new candidate sites; already-known ids are skipped."""
        added = 0
        for c in cands:
            if c.id in self.records:
                continue
            event = {"type": "site_added", "site": _site_to_dict(c), "timestamp": time.time()}
            if heatmap_thumbs and c.id in heatmap_thumbs:
                event["heatmap_thumb"] = heatmap_thumbs[c.id]
            self._append_event(event)
            self._apply(event)
            added += 1
        return added

    def submit_review(self, site_id: str, decision: str, note: str = "",
                      polygon: list | None = None) -> tuple[SiteRecord, LabelRecord | None]:
        """Record a curator decision; repeated identical submissions are no-ops.

        A conflicting second review raises and leaves the store unchanged.
        """
        if decision not in VALID_DECISIONS:
            raise ValueError(f"decision must be one of {VALID_DECISIONS}, got {decision!r}")
        rec = self.get(site_id)
        if rec.reviews:
            first = rec.reviews[0]
            if first.decision == decision and first.note == note and first.polygon == polygon:
                return rec, None  # idempotent replay of the same decision
            raise ReviewConflictError(site_id, first.decision, decision)
        ts = time.time()
        event = {
            "type": "review",
            "site_id": site_id,
            "decision": decision,
            "note": note,
            "polygon": polygon,
            "timestamp": ts,
        }
        self._append_event(event)
        self._apply(event)
        label = LabelRecord(
            site_id=site_id,
            label_class="positive" if decision == "confirm" else "negative",
            center_geo=list(rec.site.center_geo),
            polygon=polygon,
            timestamp=ts,
        )
        with open(self.dir / LABELS_FILE, "a") as f:
            f.write(json.dumps(asdict(label)) + "\n")
        return rec, label

    def attach_footprints(self, site_id: str, payload: dict) -> None:
        self.get(site_id)
        event = {"type": "footprints", "site_id": site_id, "payload": payload, "timestamp": time.time()}
        self._append_event(event)
        self._apply(event)

    def attach_waterway(self, site_id: str, meters: float, tag: str) -> None:
        self.get(site_id)
        event = {
            "type": "metadata",
            "site_id": site_id,
            "waterway_m": meters,
            "waterway_tag": tag,
            "timestamp": time.time(),
        }
        self._append_event(event)
        self._apply(event)

    # -- reads ----------------------------------------------------------------

    def get(self, site_id: str) -> SiteRecord:
        try:
            return self.records[site_id]
        except KeyError:
            raise SiteNotFoundError(site_id) from None

    def list_sites(self, status: str | None = None, mode: str | None = None,
                   bbox: tuple[float, float, float, float] | None = None) -> list[SiteRecord]:
        """Filters are conjunctive; ordering is stable (by id)."""
        if bbox is not None:
            if len(bbox) != 4 or bbox[0] > bbox[2] or bbox[1] > bbox[3]:
                raise ValueError(f"malformed bbox {bbox}; want (minx, miny, maxx, maxy)")
        out = []
        for sid in sorted(self.records):
            rec = self.records[sid]
            if status is not None and rec.status != status:
                continue
            if mode is not None and rec.site.mode != mode:
                continue
            if bbox is not None:
                x, y = rec.site.center_geo
                if not (bbox[0] <= x <= bbox[2] and bbox[1] <= y <= bbox[3]):
                    continue
            out.append(rec)
        return out

    def get_contours(self, site_id: str) -> dict:
        """Monthly footprint GeoJSON; an empty collection for sites with none computed."""
        rec = self.get(site_id)
        if rec.footprints is None:
            return {"format_version": 1, "site_id": site_id, "months": {}}
        return rec.footprints

    def labels(self) -> list[dict]:
        path = self.dir / LABELS_FILE
        if not path.exists():
            return []
        return [json.loads(x) for x in path.read_text().splitlines() if x.strip()]

    def snapshot(self) -> Path:
        """Materialize the current site set as GeoJSON next to the log."""
        fc = {
            "type": "FeatureCollection",
            "features": [self.records[sid].to_feature() for sid in sorted(self.records)],
        }
        out = self.dir / SNAPSHOT_FILE
        out.write_text(json.dumps(fc, indent=2))
        return out
