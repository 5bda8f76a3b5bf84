"""Pipeline configuration: TOML-shaped key/value files.

Every constant the portal needs but the deployment might tune lives here:
segmentation parameters, thermal blocking/thresholds, detector settings.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .pantograph import DetectorConfig
from .sift import SiftConfig
from .thermal import DEFAULT_ALARM_C, DEFAULT_BLOCK, DEFAULT_CROSS_TOL_C
from .wagonid import SegmentationParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ThermalConfig:
    block: int = DEFAULT_BLOCK
    alarm_threshold_c: float = DEFAULT_ALARM_C
    cross_tol_c: float = DEFAULT_CROSS_TOL_C


@dataclass(frozen=True)
class PipelineConfig:
    segmentation: SegmentationParams = SegmentationParams()
    thermal: ThermalConfig = ThermalConfig()
    detector: DetectorConfig = DetectorConfig()


def _apply(section: dict, template):
    known = {f.name for f in fields(template)}
    bad = set(section) - known
    if bad:
        raise ConfigError(f"unknown keys {sorted(bad)} "
                          f"(known: {sorted(known)})")
    return replace(template, **section)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a pipeline config; a missing path means all defaults."""
    if path is None:
        return PipelineConfig()
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    seg = _apply(doc.get("segmentation", {}), SegmentationParams())
    th = _apply(doc.get("thermal", {}), ThermalConfig())
    det_section = dict(doc.get("pantograph", {}))
    sift_section = det_section.pop("sift", {})
    det = _apply(det_section, DetectorConfig())
    if sift_section:
        det = replace(det, sift=_apply(sift_section, SiftConfig()))
    return PipelineConfig(segmentation=seg, thermal=th, detector=det)
