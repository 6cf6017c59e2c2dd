"""Phenology-aware global sampling of satellite scenes, plus embedding probes."""

__version__ = "0.1.0"

MANIFEST_FORMAT_VERSION = 1
GRID_FORMAT_VERSION = 1
