"""Windowing, CSV ingestion, and the per-stride orchestration loop.

Each stride: validate and normalize every channel window, run the voting
schema per channel, feed verdicts through the consecutive-window filter,
cluster the stride's confirmed modes across channels, and emit events.
Channels are independent until the clustering barrier, so the per-channel
stage can fan out across worker threads without changing the results.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .cluster import SystemMode, cluster_modes
from .core import (
    ChannelWindow,
    DetectionResult,
    DetectorConfig,
    Mode,
    ParseError,
    Quality,
    Verdict,
)
from .ekf import ekf_detect
from .ensemble import TsFilterState, consensus_modes, ts_filter_update, vote
from .events import EventMode, OscillationEvent, event_mode_from_system_mode
from .htls import htls_detect
from .preprocess import normalize, validate
from .prony import prony_detect


@dataclass(frozen=True)
class Dataset:
    """Aligned multi-channel record: one sample matrix, one clock."""

    channel_ids: tuple[str, ...]
    data: np.ndarray  # shape (channels, samples)
    sample_rate: float
    start_time: int = 0

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channel_ids):
            raise ValueError("data must be (channels, samples) matching channel_ids")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.n_samples / self.sample_rate if self.sample_rate > 0 else 0.0


def dataset_from_channels(
    channels: dict[str, np.ndarray], sample_rate: float, start_time: int = 0
) -> Dataset:
    ids = tuple(channels)
    data = np.vstack([np.asarray(channels[c], dtype=float) for c in ids]) if ids else np.zeros((0, 0))
    return Dataset(channel_ids=ids, data=data, sample_rate=sample_rate, start_time=start_time)


def ingest_csv(path: str) -> Dataset:
    """Parse the wire CSV: header ``t_ms,<id>,...`` then integer-ms rows.

    Unparseable measurement cells become NaN (screened later by window
    validation); structural problems (missing header, ragged rows,
    non-monotone timestamps) raise ParseError with the line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ParseError("empty file, expected header", 1)
        header = header_line.rstrip("\n").rstrip("\r").split(",")
        if header[0] != "t_ms" or len(header) < 2:
            raise ParseError("header must be t_ms,<channel_id>,...", 1)
        channel_ids = tuple(header[1:])
        if len(set(channel_ids)) != len(channel_ids):
            raise ParseError("duplicate channel ids in header", 1)

        timestamps: list[int] = []
        rows: list[list[float]] = []
        for line_no, line in enumerate(fh, start=2):
            stripped = line.rstrip("\n").rstrip("\r")
            if not stripped:
                continue
            cells = stripped.split(",")
            if len(cells) != len(channel_ids) + 1:
                raise ParseError(
                    f"expected {len(channel_ids) + 1} columns, got {len(cells)}", line_no
                )
            try:
                t_ms = int(cells[0])
            except ValueError:
                raise ParseError(f"timestamp {cells[0]!r} is not an integer", line_no)
            if timestamps and t_ms <= timestamps[-1]:
                raise ParseError(
                    f"timestamp {t_ms} not after previous {timestamps[-1]}", line_no
                )
            values = []
            for cell in cells[1:]:
                try:
                    values.append(float(cell))
                except ValueError:
                    values.append(float("nan"))
            timestamps.append(t_ms)
            rows.append(values)

    if not rows:
        return Dataset(channel_ids=channel_ids, data=np.zeros((len(channel_ids), 0)),
                       sample_rate=1.0, start_time=0)
    if len(rows) == 1:
        raise ParseError("need at least 2 rows to establish the sample period", 2)
    span_ms = timestamps[-1] - timestamps[0]
    sample_rate = 1000.0 * (len(rows) - 1) / span_ms
    data = np.asarray(rows, dtype=float).T
    return Dataset(
        channel_ids=channel_ids,
        data=data,
        sample_rate=sample_rate,
        start_time=timestamps[0],
    )


def write_csv(dataset: Dataset, path: str) -> None:
    """Write the wire CSV (integer ms timestamps, repr-precision values)."""
    period = 1000.0 / dataset.sample_rate
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_ms," + ",".join(dataset.channel_ids) + "\n")
        for k in range(dataset.n_samples):
            t_ms = dataset.start_time + int(round(k * period))
            cells = [str(t_ms)]
            for c in range(len(dataset.channel_ids)):
                cells.append(repr(float(dataset.data[c, k])))
            fh.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class StrideBatch:
    stride_index: int
    offset: int
    windows: tuple[ChannelWindow, ...]


def windows(
    dataset: Dataset, window_seconds: float, stride_seconds: float
) -> Iterator[StrideBatch]:
    """Sliding per-channel window batches; the final partial window is
    dropped rather than padded (padding would bias damping estimates)."""
    fs = dataset.sample_rate
    if window_seconds * fs < 2:
        raise ValueError("window_seconds * sample_rate must be >= 2")
    w = int(round(window_seconds * fs))
    s = max(1, int(round(stride_seconds * fs)))
    total = dataset.n_samples
    stride_index = 0
    for offset in range(0, total - w + 1, s):
        start_ms = dataset.start_time + int(round(1000.0 * offset / fs))
        batch = tuple(
            ChannelWindow(
                channel_id=cid,
                start_time=start_ms,
                sample_rate=fs,
                samples=dataset.data[c, offset : offset + w],
            )
            for c, cid in enumerate(dataset.channel_ids)
        )
        yield StrideBatch(stride_index=stride_index, offset=offset, windows=batch)
        stride_index += 1


@dataclass
class CostCounters:
    """Detector invocation counts and stride timings for cost accounting."""

    prony_calls: int = 0
    htls_calls: int = 0
    ekf_calls: int = 0
    windows_total: int = 0
    windows_ok: int = 0
    strides: int = 0
    channel_count: int = 0
    duration_seconds: float = 0.0
    stride_seconds: float = 0.0
    quality_counts: dict[str, int] = field(default_factory=dict)
    stride_wall_seconds: list[float] = field(default_factory=list)

    @property
    def n_total(self) -> int:
        """Scan budget: channels times (record length / stride)."""
        if self.stride_seconds <= 0:
            return 0
        return self.channel_count * int(round(self.duration_seconds / self.stride_seconds))

    @property
    def total_detector_calls(self) -> int:
        return self.prony_calls + self.htls_calls + self.ekf_calls

    def to_dict(self) -> dict:
        return {
            "prony_calls": self.prony_calls,
            "htls_calls": self.htls_calls,
            "ekf_calls": self.ekf_calls,
            "total_detector_calls": self.total_detector_calls,
            "n_total": self.n_total,
            "windows_total": self.windows_total,
            "windows_ok": self.windows_ok,
            "strides": self.strides,
            "channel_count": self.channel_count,
            "duration_seconds": self.duration_seconds,
            "stride_seconds": self.stride_seconds,
            "quality_counts": dict(sorted(self.quality_counts.items())),
            "max_stride_wall_seconds": max(self.stride_wall_seconds, default=0.0),
        }


@dataclass(frozen=True)
class StrideStatus:
    """Per-stride channel-health summary pushed to stream subscribers."""

    stride_index: int
    timestamp: int
    quality_counts: dict[str, int]
    event_count: int


@dataclass(frozen=True)
class RunResult:
    events: tuple[OscillationEvent, ...]
    counters: CostCounters


def config_hash(config: DetectorConfig) -> str:
    import json

    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _channel_stage_voting(window: ChannelWindow, config: DetectorConfig):
    """Validate, normalize, vote. Returns (quality, result, counts)."""
    quality = validate(window)
    if quality is not Quality.OK:
        return quality, None, (0, 0, 0)
    normalized, _ = normalize(window)
    result, trace = vote(normalized, config)
    counts = (
        1,
        1 if "htls" in trace.detectors_run else 0,
        1 if "ekf" in trace.detectors_run else 0,
    )
    return quality, result, counts


def _channel_stage_crosscheck(window: ChannelWindow, config: DetectorConfig):
    """All three detectors on every window, majority rule."""
    quality = validate(window)
    if quality is not Quality.OK:
        return quality, None, (0, 0, 0)
    normalized, _ = normalize(window)
    res_a = prony_detect(normalized, config)
    res_b = htls_detect(normalized, config)
    res_c = ekf_detect(normalized, config)
    approvals = [r.verdict is Verdict.OSCILLATION for r in (res_a, res_b, res_c)]
    modes: tuple[Mode, ...] = ()
    if sum(approvals) >= 2:
        for first, second in ((res_a, res_b), (res_a, res_c), (res_b, res_c)):
            if first.verdict is Verdict.OSCILLATION and second.verdict is Verdict.OSCILLATION:
                modes = consensus_modes(normalized, config, first.modes, second.modes)
                if modes:
                    break
    verdict = Verdict.OSCILLATION if modes else Verdict.NO_OSCILLATION
    result = DetectionResult(
        channel_id=window.channel_id,
        start_time=window.start_time,
        verdict=verdict,
        modes=modes,
        detectors_run=frozenset({"prony", "htls", "ekf"}),
    )
    return quality, result, (1, 1, 1)


class StrideProcessor:
    """Owns the mutable per-channel filter state and the event numbering.

    One instance per run; ``process`` is called once per stride with all of
    that stride's channel windows.
    """

    def __init__(
        self,
        config: DetectorConfig,
        *,
        strategy: str = "voting",
        workers: int | None = None,
        next_event_id: int = 1,
    ):
        if strategy not in ("voting", "crosscheck"):
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.config = config
        self.workers = workers
        self.ts_state = TsFilterState()
        self.counters = CostCounters(stride_seconds=config.stride_seconds)
        self.next_event_id = next_event_id

    def process(
        self, batch: StrideBatch, config: DetectorConfig | None = None
    ) -> tuple[OscillationEvent | None, StrideStatus]:
        """One stride: per-channel detection, filtering, clustering."""
        cfg = config if config is not None else self.config
        stage = (
            _channel_stage_voting if self.strategy == "voting" else _channel_stage_crosscheck
        )
        t0 = time.perf_counter()

        if self.workers and self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                staged = list(pool.map(lambda w: stage(w, cfg), batch.windows))
        else:
            staged = [stage(w, cfg) for w in batch.windows]

        quality_counts: dict[str, int] = {}
        confirmed: dict[str, list[Mode]] = {}
        window_end = 0
        for window, (quality, result, counts) in zip(batch.windows, staged):
            quality_counts[quality.value] = quality_counts.get(quality.value, 0) + 1
            self.counters.quality_counts[quality.value] = (
                self.counters.quality_counts.get(quality.value, 0) + 1
            )
            self.counters.windows_total += 1
            self.counters.prony_calls += counts[0]
            self.counters.htls_calls += counts[1]
            self.counters.ekf_calls += counts[2]
            window_end = max(window_end, window.end_time)
            if quality is not Quality.OK:
                # A skipped window still advances the filter clock so that
                # stale pending modes expire.
                result = DetectionResult(
                    channel_id=window.channel_id,
                    start_time=window.start_time,
                    verdict=Verdict.NO_OSCILLATION,
                    modes=(),
                    detectors_run=frozenset(),
                    diagnostics=(f"quality: {quality.value}",),
                )
            else:
                self.counters.windows_ok += 1
            new_modes = ts_filter_update(
                self.ts_state, window.channel_id, batch.stride_index, result, cfg
            )
            if new_modes:
                confirmed[window.channel_id] = new_modes

        event = None
        if confirmed:
            system_modes = cluster_modes(confirmed, eps_rel=cfg.sensitivity)
            if system_modes:
                event = OscillationEvent(
                    event_id=self.next_event_id,
                    detected_at=window_end,
                    system_modes=tuple(
                        event_mode_from_system_mode(sm) for sm in system_modes
                    ),
                    detectors_run={
                        "prony": self.counters.prony_calls,
                        "htls": self.counters.htls_calls,
                        "ekf": self.counters.ekf_calls,
                    },
                    config_hash=config_hash(cfg),
                )
                self.next_event_id += 1

        self.counters.strides += 1
        self.counters.stride_wall_seconds.append(time.perf_counter() - t0)
        status = StrideStatus(
            stride_index=batch.stride_index,
            timestamp=window_end,
            quality_counts=quality_counts,
            event_count=1 if event else 0,
        )
        return event, status


def run(
    dataset: Dataset,
    config: DetectorConfig,
    *,
    workers: int | None = None,
    strategy: str = "voting",
    on_event: Callable[[OscillationEvent], None] | None = None,
    on_status: Callable[[StrideStatus], None] | None = None,
) -> RunResult:
    """Replay a whole dataset through the detection pipeline."""
    processor = StrideProcessor(config, strategy=strategy, workers=workers)
    processor.counters.channel_count = len(dataset.channel_ids)
    processor.counters.duration_seconds = dataset.duration_seconds
    events: list[OscillationEvent] = []
    for batch in windows(dataset, config.window_seconds, config.stride_seconds):
        event, status = processor.process(batch)
        if event is not None:
            events.append(event)
            if on_event is not None:
                on_event(event)
        if on_status is not None:
            on_status(status)
    return RunResult(events=tuple(events), counters=processor.counters)


def bench(
    dataset: Dataset, strategy: str, config: DetectorConfig
) -> RunResult:
    """Cost-accounting run under either scheduling strategy."""
    return run(dataset, config, strategy=strategy)
