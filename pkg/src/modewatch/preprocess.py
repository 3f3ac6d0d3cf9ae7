"""Per-window measurement screening and normalization.

Order of the quality rules matters: non-finite values first, then the
stale-data patterns (repeated values, repeated 1 s blocks), then the flat
test. Only ``ok`` windows proceed to detection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import ChannelWindow, FlatChannelError, Quality

FLAT_REL = 1e-9
FLAT_ABS = 1e-12


@dataclass(frozen=True)
class WindowStats:
    mean: float
    std_dev: float
    nan_count: int
    longest_repeat_run: int


def window_stats(window: ChannelWindow) -> WindowStats:
    y = np.asarray(window.samples, dtype=float)
    finite = np.isfinite(y)
    nan_count = int((~finite).sum())
    if nan_count:
        clean = y[finite]
        mean = float(clean.mean()) if len(clean) else float("nan")
        std = float(clean.std()) if len(clean) else float("nan")
    else:
        mean = float(y.mean())
        std = float(y.std())
    return WindowStats(
        mean=mean,
        std_dev=std,
        nan_count=nan_count,
        longest_repeat_run=kernels.longest_repeat_run(y),
    )


def detect_stale(window: ChannelWindow, max_repeat: int | None = None) -> bool:
    """True when the window looks like frozen or replayed telemetry.

    Two patterns: (a) one value repeated in >= max_repeat consecutive
    samples (default: one second's worth), (b) the whole window being the
    same >= 1 s block played back to back.
    """
    y = np.asarray(window.samples, dtype=float)
    if max_repeat is None:
        max_repeat = int(round(window.sample_rate))
    max_repeat = max(2, max_repeat)
    if kernels.longest_repeat_run(y) >= max_repeat:
        return True
    return _block_replay(y, int(round(window.sample_rate)))


def _block_replay(y: np.ndarray, block: int) -> bool:
    """Whole-window periodic repetition of its first ``block`` samples."""
    if block < 1 or len(y) < 2 * block:
        return False
    n_full = len(y) // block
    head = y[:block]
    for b in range(1, n_full):
        seg = y[b * block : (b + 1) * block]
        if not np.array_equal(seg, head):
            return False
    tail = y[n_full * block :]
    if len(tail) and not np.array_equal(tail, head[: len(tail)]):
        return False
    return True


def validate(window: ChannelWindow) -> Quality:
    """Quality verdict for one window; pure in the window contents."""
    y = np.asarray(window.samples, dtype=float)
    if not np.all(np.isfinite(y)):
        return Quality.INVALID
    if detect_stale(window):
        return Quality.STALE
    mean = float(y.mean())
    std = float(y.std())
    if std < FLAT_REL * abs(mean) + FLAT_ABS:
        return Quality.FLAT
    return Quality.OK


def normalize(window: ChannelWindow) -> tuple[ChannelWindow, WindowStats]:
    """Zero-mean, unit-variance copy of the window plus the stats needed to
    undo the map. Population standard deviation, for reproducibility."""
    y = np.asarray(window.samples, dtype=float)
    stats = window_stats(window)
    if not np.isfinite(stats.std_dev) or stats.std_dev < FLAT_REL * abs(stats.mean) + FLAT_ABS:
        raise FlatChannelError(
            f"channel {window.channel_id}: std {stats.std_dev} below flat threshold"
        )
    normalized = (y - stats.mean) / stats.std_dev
    normalized.setflags(write=False)
    return replace(window, samples=normalized), stats


def denormalize(samples, stats: WindowStats) -> np.ndarray:
    return np.asarray(samples, dtype=float) * stats.std_dev + stats.mean
