"""EBP-GEXIT charts, Maxwell thresholds and spatially-coupled EXIT analysis."""

__version__ = "0.1.0"
