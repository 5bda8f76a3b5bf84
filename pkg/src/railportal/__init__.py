"""Desk-scale multi-camera rail inspection portal.

Three machine-vision pipelines (wagon-ID segmentation, thermal monitoring,
pantograph detection), a sensor-fleet coordination service over simulated
high-rate cameras, a tiled session store, and the CLI gluing them together.
"""

__version__ = "0.1.0"
