"""Operator-facing service: live detection feed, config tuning, history.

The pipeline runs on a background thread; request handlers only touch a
versioned config snapshot (swapped atomically at stride boundaries), the
append-only event store, and per-subscriber bounded queues. Slow consumers
lose oldest records and receive an explicit gap marker so the UI knows to
backfill from the history endpoint.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass

from fastapi import FastAPI, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .core import ConfigError, DetectorConfig
from .events import EventStore, OscillationEvent
from .pipeline import Dataset, StrideProcessor, StrideStatus, windows

logger = logging.getLogger(__name__)

QUEUE_LIMIT = 256


class Subscriber:
    """Bounded drop-oldest message queue with a gap marker."""

    def __init__(self, limit: int = QUEUE_LIMIT):
        self._queue: deque[dict] = deque()
        self._limit = limit
        self._gap = False
        self._cond = threading.Condition()
        self.closed = False

    def push(self, message: dict) -> None:
        with self._cond:
            if len(self._queue) >= self._limit:
                self._queue.popleft()
                self._gap = True
            self._queue.append(message)
            self._cond.notify()

    def pop(self, timeout: float) -> dict | None:
        with self._cond:
            if self._gap:
                self._gap = False
                return {"type": "gap"}
            if not self._queue:
                self._cond.wait(timeout)
            if self._gap:
                self._gap = False
                return {"type": "gap"}
            if self._queue:
                return self._queue.popleft()
            return None


@dataclass(frozen=True)
class ConfigSnapshot:
    active: DetectorConfig
    version: int
    pending: DetectorConfig | None


class DetectorService:
    """Shared state between the replay/pipeline thread and the API."""

    def __init__(self, config: DetectorConfig, store: EventStore | None = None):
        self._lock = threading.Lock()
        self._active = config
        self._pending: DetectorConfig | None = None
        self._version = 1
        self._subscribers: list[Subscriber] = []
        self.store = store
        self.last_status: StrideStatus | None = None

    # -- configuration ----------------------------------------------------

    def config_snapshot(self) -> ConfigSnapshot:
        with self._lock:
            return ConfigSnapshot(self._active, self._version, self._pending)

    def put_config(self, updates: dict) -> ConfigSnapshot:
        """Validate a partial update; it becomes active at the next stride."""
        with self._lock:
            base = self._pending if self._pending is not None else self._active
            merged = base.merged(updates)  # raises ConfigError on bad input
            self._pending = merged
            return ConfigSnapshot(self._active, self._version, self._pending)

    def begin_stride(self) -> DetectorConfig:
        """Promote any pending config exactly at a stride boundary."""
        with self._lock:
            if self._pending is not None:
                self._active = self._pending
                self._pending = None
                self._version += 1
            return self._active

    # -- streaming ---------------------------------------------------------

    def subscribe(self) -> Subscriber:
        sub = Subscriber()
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        sub.closed = True
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def _broadcast(self, message: dict) -> None:
        with self._lock:
            targets = list(self._subscribers)
        for sub in targets:
            sub.push(message)

    def publish_event(self, event: OscillationEvent) -> None:
        if self.store is not None:
            self.store.append(event)
        self._broadcast({"type": "event", "event": event.to_dict()})

    def publish_status(self, status: StrideStatus) -> None:
        self.last_status = status
        self._broadcast(
            {
                "type": "status",
                "stride_index": status.stride_index,
                "timestamp": status.timestamp,
                "quality_counts": status.quality_counts,
                "event_count": status.event_count,
            }
        )

    # -- history -----------------------------------------------------------

    def query_history(self, from_ms: int, to_ms: int) -> list[OscillationEvent]:
        if self.store is None:
            return []
        return self.store.read_range(from_ms, to_ms)


class ReplayRunner(threading.Thread):
    """Drives the pipeline over a dataset, pacing strides like real time.

    ``speed`` is a multiplier over real time; 0 means as fast as possible.
    The active config is re-read from the service at every stride boundary.
    """

    def __init__(
        self,
        service: DetectorService,
        dataset: Dataset,
        *,
        speed: float = 1.0,
        workers: int | None = None,
    ):
        super().__init__(daemon=True)
        self.service = service
        self.dataset = dataset
        self.speed = speed
        self.workers = workers
        self.finished = threading.Event()
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def run(self) -> None:
        config = self.service.config_snapshot().active
        processor = StrideProcessor(config, workers=self.workers)
        processor.counters.channel_count = len(self.dataset.channel_ids)
        processor.counters.duration_seconds = self.dataset.duration_seconds
        try:
            for batch in windows(
                self.dataset, config.window_seconds, config.stride_seconds
            ):
                if self._stop.is_set():
                    break
                stride_config = self.service.begin_stride()
                started = time.perf_counter()
                event, status = processor.process(batch, stride_config)
                if event is not None:
                    self.service.publish_event(event)
                self.service.publish_status(status)
                if self.speed > 0:
                    budget = stride_config.stride_seconds / self.speed
                    remaining = budget - (time.perf_counter() - started)
                    if remaining > 0:
                        self._stop.wait(remaining)
        finally:
            self.finished.set()


class FollowRunner(threading.Thread):
    """Tails a growing wire-format CSV, processing strides as rows land.

    Pacing comes from data arrival. Partial trailing lines are left in the
    file until completed; the sample period is taken from the first two
    rows.
    """

    def __init__(
        self,
        service: DetectorService,
        path: str,
        *,
        poll_seconds: float = 0.2,
        workers: int | None = None,
    ):
        super().__init__(daemon=True)
        self.service = service
        self.path = path
        self.poll_seconds = poll_seconds
        self.workers = workers
        self.finished = threading.Event()
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def _complete_lines(self, fh) -> list[str]:
        lines = []
        while True:
            position = fh.tell()
            line = fh.readline()
            if not line:
                break
            if not line.endswith("\n"):
                fh.seek(position)
                break
            lines.append(line.rstrip("\n").rstrip("\r"))
        return lines

    def run(self) -> None:
        import numpy as np

        from .core import ChannelWindow
        from .pipeline import StrideBatch

        try:
            fh = None
            while fh is None and not self._stop.is_set():
                try:
                    fh = open(self.path, "r", encoding="utf-8")
                except FileNotFoundError:
                    self._stop.wait(self.poll_seconds)
            if fh is None:
                return

            channel_ids: tuple[str, ...] | None = None
            timestamps: list[int] = []
            rows: list[list[float]] = []
            sample_rate: float | None = None
            processor: StrideProcessor | None = None
            next_offset = 0
            stride_index = 0

            while not self._stop.is_set():
                for line in self._complete_lines(fh):
                    if not line:
                        continue
                    cells = line.split(",")
                    if channel_ids is None:
                        channel_ids = tuple(cells[1:])
                        continue
                    if len(cells) != len(channel_ids) + 1:
                        logger.warning("follow: skipping ragged row %r", line[:80])
                        continue
                    try:
                        t_ms = int(cells[0])
                    except ValueError:
                        logger.warning("follow: bad timestamp %r", cells[0])
                        continue
                    if timestamps and t_ms <= timestamps[-1]:
                        logger.warning("follow: non-monotone timestamp %d", t_ms)
                        continue
                    timestamps.append(t_ms)
                    rows.append(
                        [
                            float(cell) if _is_float(cell) else float("nan")
                            for cell in cells[1:]
                        ]
                    )

                if sample_rate is None and len(timestamps) >= 2:
                    sample_rate = 1000.0 / (timestamps[1] - timestamps[0])

                if sample_rate is not None and channel_ids is not None:
                    while True:
                        config = self.service.config_snapshot().active
                        w = int(round(config.window_seconds * sample_rate))
                        s = max(1, int(round(config.stride_seconds * sample_rate)))
                        if next_offset + w > len(rows):
                            break
                        config = self.service.begin_stride()
                        if processor is None:
                            processor = StrideProcessor(config, workers=self.workers)
                            processor.counters.channel_count = len(channel_ids)
                        block = np.asarray(
                            rows[next_offset : next_offset + w], dtype=float
                        ).T
                        start_ms = timestamps[next_offset]
                        batch = StrideBatch(
                            stride_index=stride_index,
                            offset=next_offset,
                            windows=tuple(
                                ChannelWindow(
                                    channel_id=cid,
                                    start_time=start_ms,
                                    sample_rate=sample_rate,
                                    samples=block[c],
                                )
                                for c, cid in enumerate(channel_ids)
                            ),
                        )
                        event, status = processor.process(batch, config)
                        if event is not None:
                            self.service.publish_event(event)
                        self.service.publish_status(status)
                        next_offset += s
                        stride_index += 1

                self._stop.wait(self.poll_seconds)
            fh.close()
        finally:
            self.finished.set()


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def create_app(service: DetectorService) -> FastAPI:
    app = FastAPI(title="modewatch", version="0.1.0")

    def config_payload() -> dict:
        snap = service.config_snapshot()
        return {
            "active": snap.active.to_dict(),
            "pending": snap.pending.to_dict() if snap.pending else None,
            "version": snap.version,
        }

    @app.get("/config")
    def get_config():
        return config_payload()

    @app.put("/config")
    def put_config(updates: dict):
        try:
            service.put_config(updates)
        except ConfigError as exc:
            return JSONResponse(
                status_code=422, content={"diagnostics": exc.diagnostics}
            )
        return config_payload()

    @app.get("/history")
    def history(
        from_ms: int = Query(alias="from", default=0),
        to_ms: int = Query(alias="to", default=2**62),
    ):
        if from_ms > to_ms:
            return JSONResponse(
                status_code=422, content={"diagnostics": {"from": "must be <= to"}}
            )
        events = service.query_history(from_ms, to_ms)
        return {"events": [e.to_dict() for e in events]}

    @app.websocket("/stream")
    async def stream(websocket: WebSocket):
        await websocket.accept()
        subscriber = service.subscribe()
        try:
            while True:
                message = await run_in_threadpool(subscriber.pop, 0.2)
                if message is not None:
                    await websocket.send_json(message)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            service.unsubscribe(subscriber)

    return app
