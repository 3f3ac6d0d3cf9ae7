"""Real-time multi-channel low-frequency oscillation detection and modal
analysis: three estimators under a sequential voting schema, a
consecutive-window false-alarm filter, density-based cross-channel mode
clustering, and a small operator-facing service."""

from .core import (
    ChannelWindow,
    DetectionResult,
    DetectorConfig,
    Mode,
    Quality,
    Verdict,
    damping_ratio,
    modes_match,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelWindow",
    "DetectionResult",
    "DetectorConfig",
    "Mode",
    "Quality",
    "Verdict",
    "damping_ratio",
    "modes_match",
    "__version__",
]
