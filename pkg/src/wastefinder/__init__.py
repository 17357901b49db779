"""Detection and monitoring of terrestrial waste aggregations in multiband raster time series."""

__version__ = "0.1.0"
