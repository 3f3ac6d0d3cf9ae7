"""Shared domain types and elementary conversions.

Everything here is an immutable value type, safe to share across the
per-channel workers without locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum

TWO_PI = 2.0 * math.pi


class ModewatchError(Exception):
    """Base class for errors raised by this package."""


class InvalidModeError(ModewatchError):
    """A mode violates its invariants (e.g. non-positive frequency)."""


class InsufficientDataError(ModewatchError):
    """Too few samples for the requested operation."""


class NumericalDegeneracyError(ModewatchError):
    """A solve hit a degenerate system (all-zero matrix, rank collapse)."""


class FlatChannelError(ModewatchError):
    """Normalization requested on a channel with no variance."""


class UndefinedSnrError(ModewatchError):
    """SNR is undefined for an all-zero signal."""


class SequencingError(ModewatchError):
    """Window indices arrived out of order for a channel."""


class TriggerMissingError(ModewatchError):
    """The spectral trigger produced no candidates; EKF cannot start."""


class ConfigError(ModewatchError):
    """A configuration update violates the config invariants.

    ``diagnostics`` maps field name -> human-readable problem.
    """

    def __init__(self, diagnostics: dict[str, str]):
        self.diagnostics = dict(diagnostics)
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(self.diagnostics.items()))
        super().__init__(msg)


class ParseError(ModewatchError):
    """CSV input violates the wire format. Carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class StorageError(ModewatchError):
    """The event store failed to persist a record."""


class Quality(str, Enum):
    OK = "ok"
    STALE = "stale"
    FLAT = "flat"
    GAPPED = "gapped"
    INVALID = "invalid"


def wrap_phase(phase: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(phase, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class Mode:
    """One damped sinusoid: A * exp(-sigma*t) * cos(omega*t + phase).

    ``damping_factor`` (1/s) is positive for a decaying oscillation,
    ``angular_frequency`` is in rad/s, amplitude in normalized signal units.
    """

    amplitude: float
    damping_factor: float
    angular_frequency: float
    phase: float

    def __post_init__(self):
        if not (self.amplitude >= 0.0):
            raise InvalidModeError(f"amplitude must be >= 0, got {self.amplitude}")
        if not (self.angular_frequency > 0.0):
            raise InvalidModeError(
                f"angular_frequency must be > 0, got {self.angular_frequency}"
            )
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    @property
    def frequency_hz(self) -> float:
        return self.angular_frequency / TWO_PI


@dataclass(frozen=True)
class ChannelWindow:
    """A contiguous fixed-length slice of one measurement channel.

    ``samples`` is an immutable snapshot (tuple or read-only ndarray);
    ``start_time`` is in ms since epoch.
    """

    channel_id: str
    start_time: int
    sample_rate: float
    samples: object
    quality: Quality = Quality.OK

    def __post_init__(self):
        if not (self.sample_rate > 0.0):
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if len(self.samples) < 2:
            raise InsufficientDataError(
                f"window needs at least 2 samples, got {len(self.samples)}"
            )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def end_time(self) -> int:
        return int(self.start_time + round(1000.0 * len(self.samples) / self.sample_rate))


@dataclass(frozen=True)
class DetectorConfig:
    """Operator-tunable detection thresholds.

    ``sensitivity`` is the relative frequency-match tolerance used both for
    cross-detector agreement and the consecutive-window filter;
    ``amplitude_threshold`` is a fraction of the window standard deviation
    (windows are normalized, so it is an absolute amplitude after that).
    """

    freq_band: tuple[float, float] = (0.1, 2.5)
    sensitivity: float = 0.03
    amplitude_threshold: float = 0.2
    damping_ratio_alarm: float = 0.05
    ts_filter_depth: int = 2
    window_seconds: float = 5.0
    stride_seconds: float = 1.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self) -> dict[str, str]:
        """Field-level invariant violations (empty dict when valid)."""
        out: dict[str, str] = {}
        try:
            f_min, f_max = self.freq_band
        except (TypeError, ValueError):
            out["freq_band"] = "must be a (f_min, f_max) pair"
            return out
        if not (0.0 < f_min < f_max):
            out["freq_band"] = f"requires 0 < f_min < f_max, got ({f_min}, {f_max})"
        if not (0.0 < self.sensitivity <= 1.0):
            out["sensitivity"] = f"must be in (0, 1], got {self.sensitivity}"
        if not (self.amplitude_threshold >= 0.0):
            out["amplitude_threshold"] = (
                f"must be >= 0, got {self.amplitude_threshold}"
            )
        if not (isinstance(self.ts_filter_depth, int) and self.ts_filter_depth >= 1):
            out["ts_filter_depth"] = f"must be an integer >= 1, got {self.ts_filter_depth}"
        if not (self.window_seconds > 0.0):
            out["window_seconds"] = f"must be > 0, got {self.window_seconds}"
        if not (0.0 < self.stride_seconds <= self.window_seconds):
            out["stride_seconds"] = (
                f"must satisfy 0 < stride <= window, got {self.stride_seconds}"
            )
        return out

    def merged(self, updates: dict) -> "DetectorConfig":
        """A new config with ``updates`` applied; raises ConfigError if the
        result is invalid or an unknown field is given."""
        known = {f.name for f in fields(self)}
        unknown = set(updates) - known
        if unknown:
            raise ConfigError({k: "unknown field" for k in sorted(unknown)})
        cleaned = dict(updates)
        if "freq_band" in cleaned:
            band = cleaned["freq_band"]
            try:
                cleaned["freq_band"] = (float(band[0]), float(band[1]))
            except (TypeError, ValueError, IndexError):
                raise ConfigError({"freq_band": "must be a (f_min, f_max) pair"})
        if "ts_filter_depth" in cleaned:
            try:
                cleaned["ts_filter_depth"] = int(cleaned["ts_filter_depth"])
            except (TypeError, ValueError):
                raise ConfigError({"ts_filter_depth": "must be an integer"})
        return replace(self, **cleaned)

    def to_dict(self) -> dict:
        return {
            "freq_band": [self.freq_band[0], self.freq_band[1]],
            "sensitivity": self.sensitivity,
            "amplitude_threshold": self.amplitude_threshold,
            "damping_ratio_alarm": self.damping_ratio_alarm,
            "ts_filter_depth": self.ts_filter_depth,
            "window_seconds": self.window_seconds,
            "stride_seconds": self.stride_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        return cls().merged(dict(data))


class Verdict(str, Enum):
    NO_OSCILLATION = "no_oscillation"
    OSCILLATION = "oscillation"


@dataclass(frozen=True)
class DetectionResult:
    """Per-channel, per-window verdict with the surviving candidate modes."""

    channel_id: str
    start_time: int
    verdict: Verdict
    modes: tuple[Mode, ...]
    detectors_run: frozenset[str]
    diagnostics: tuple[str, ...] = field(default=())

    def __post_init__(self):
        has_modes = len(self.modes) > 0
        if (self.verdict is Verdict.OSCILLATION) != has_modes:
            raise ValueError("verdict=oscillation iff modes nonempty")


def damping_ratio(mode: Mode) -> float:
    """Dimensionless damping zeta = sigma / sqrt(sigma^2 + omega^2).

    Negative zeta means a growing oscillation.
    """
    sigma = mode.damping_factor
    omega = mode.angular_frequency
    if not (omega > 0.0):
        raise InvalidModeError(f"angular_frequency must be > 0, got {omega}")
    return sigma / math.sqrt(sigma * sigma + omega * omega)


def modes_match(a: Mode, b: Mode, rel_tol: float) -> bool:
    """True iff the two mode frequencies agree within ``rel_tol`` relative
    to the smaller of the two (symmetric by construction)."""
    if not (rel_tol > 0.0):
        raise ValueError(f"rel_tol must be > 0, got {rel_tol}")
    f_a = a.frequency_hz
    f_b = b.frequency_hz
    # The boundary itself matches; the (1 + 1e-12) guard keeps that true
    # under the ulp noise of the rad/s <-> Hz round-trip.
    return abs(f_a - f_b) <= rel_tol * min(f_a, f_b) * (1.0 + 1e-12)


def rms_amplitude(mode: Mode, duration_seconds: float) -> float:
    """Root-mean-square contribution of the mode over a window.

    For an undamped mode this is A/sqrt(2); decay discounts it, so a
    heavily damped fit artifact with a large start amplitude but no energy
    across the window scores low.
    """
    sigma = mode.damping_factor
    if duration_seconds <= 0:
        return mode.amplitude / math.sqrt(2.0)
    x = 2.0 * sigma * duration_seconds
    if abs(x) < 1e-12:
        decay_mean = 1.0
    else:
        decay_mean = -math.expm1(-x) / x
    return mode.amplitude * math.sqrt(max(decay_mean, 0.0) / 2.0)


def passes_mode_filter(mode: Mode, config: DetectorConfig, duration_seconds: float) -> bool:
    """Shared detector-output filter: in-band, above the amplitude floor,
    and either poorly damped or a strong (energy-wise) ringdown."""
    f = mode.frequency_hz
    f_min, f_max = config.freq_band
    if not (f_min <= f <= f_max):
        return False
    if mode.amplitude < config.amplitude_threshold:
        return False
    if damping_ratio(mode) < config.damping_ratio_alarm:
        return True
    # Well-damped modes are still reported when they carry real energy:
    # equivalent to amplitude >= 3x threshold for an undamped mode.
    return rms_amplitude(mode, duration_seconds) >= (
        3.0 * config.amplitude_threshold / math.sqrt(2.0)
    )


def filter_modes(modes, config: DetectorConfig, duration_seconds: float) -> tuple[Mode, ...]:
    """Apply :func:`passes_mode_filter` and return modes sorted by frequency."""
    kept = [m for m in modes if passes_mode_filter(m, config, duration_seconds)]
    kept.sort(key=lambda m: (m.angular_frequency, -m.amplitude))
    return tuple(kept)
