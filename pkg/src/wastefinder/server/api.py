"""HTTP+JSON API over the site store, mirroring the public endpoint shapes:

    GET  /sites                     list (filters: status, mode, bbox)
    GET  /sites/{id}                single site
    GET  /sites/{id}/contours       monthly footprint GeoJSON
    GET  /sites/{id}/heatmap        score thumbnail for the review overlay
    POST /sites/{id}/review         curator decision -> label record

The review UI is served statically when a build directory is supplied.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from wastefinder.server.store import (
    ReviewConflictError,
    SiteNotFoundError,
    SiteStore,
    VALID_DECISIONS,
)


class ReviewBody(BaseModel):
    decision: str
    note: str = ""
    polygon: list | None = None


def _parse_bbox(raw: str | None):
    if raw is None:
        return None
    try:
        parts = tuple(float(v) for v in raw.split(","))
        if len(parts) != 4:
            raise ValueError
    except ValueError:
        raise HTTPException(status_code=400, detail=f"malformed bbox {raw!r}; want minx,miny,maxx,maxy")
    return parts


def create_app(store: SiteStore, ui_config: dict | None = None,
               frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="wastefinder", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/sites")
    def list_sites(status: str | None = None, mode: str | None = None,
                   bbox: str | None = Query(default=None)):
        try:
            recs = store.list_sites(status=status, mode=mode, bbox=_parse_bbox(bbox))
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"type": "FeatureCollection", "features": [r.to_feature() for r in recs]}

    @app.get("/sites/{site_id}")
    def get_site(site_id: str):
        try:
            return store.get(site_id).to_feature()
        except SiteNotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown site {site_id}")

    @app.get("/sites/{site_id}/contours")
    def get_contours(site_id: str):
        try:
            return store.get_contours(site_id)
        except SiteNotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown site {site_id}")

    @app.get("/sites/{site_id}/heatmap")
    def get_heatmap(site_id: str):
        try:
            rec = store.get(site_id)
        except SiteNotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown site {site_id}")
        if rec.heatmap_thumb is None:
            raise HTTPException(status_code=404, detail="no heatmap stored for this site")
        return rec.heatmap_thumb

    @app.post("/sites/{site_id}/review")
    def submit_review(site_id: str, body: ReviewBody):
        if body.decision not in VALID_DECISIONS:
            raise HTTPException(status_code=400, detail=f"decision must be one of {VALID_DECISIONS}")
        try:
            rec, label = store.submit_review(site_id, body.decision, body.note, body.polygon)
        except SiteNotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown site {site_id}")
        except ReviewConflictError as e:
            raise HTTPException(status_code=409, detail={"error": str(e), "existing": e.existing})
        return {"site": rec.to_feature(), "label": asdict(label) if label else None}

    @app.get("/ui-config.json")
    def get_ui_config():
        return ui_config or {"imagery_url_template": "", "api_base": ""}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
