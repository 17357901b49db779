"""Persistence, HTTP API, and CLI orchestration around the detection pipeline."""

from wastefinder.server.store import (
    LabelRecord,
    ReviewConflictError,
    SiteNotFoundError,
    SiteRecord,
    SiteStore,
)

__all__ = [
    "LabelRecord",
    "ReviewConflictError",
    "SiteNotFoundError",
    "SiteRecord",
    "SiteStore",
]
