"""Confirmed-event model and append-only newline-delimited persistence.

One JSON object per line; floats serialize via repr so a round-trip is
lossless. The log is crash-tolerant: a torn trailing line is skipped with a
warning on read, everything before it stays intact.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from .core import Mode, StorageError
from .cluster import Classification, SystemMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EventMode:
    """One system mode inside a confirmed event."""

    frequency_hz: float
    damping_ratio: float
    classification: Classification
    member_channels: tuple[str, ...]
    mode_shape: dict[str, tuple[float, float]]

    def to_dict(self) -> dict:
        return {
            "frequency_hz": self.frequency_hz,
            "damping_ratio": self.damping_ratio,
            "classification": self.classification.value,
            "member_channels": list(self.member_channels),
            "mode_shape": {ch: [a, p] for ch, (a, p) in sorted(self.mode_shape.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EventMode":
        return cls(
            frequency_hz=float(data["frequency_hz"]),
            damping_ratio=float(data["damping_ratio"]),
            classification=Classification(data["classification"]),
            member_channels=tuple(data["member_channels"]),
            mode_shape={ch: (float(a), float(p)) for ch, (a, p) in data["mode_shape"].items()},
        )


@dataclass(frozen=True)
class OscillationEvent:
    """A confirmed, clustered, classified system-level oscillation."""

    event_id: int
    detected_at: int
    system_modes: tuple[EventMode, ...]
    detectors_run: dict[str, int]
    config_hash: str

    def __post_init__(self):
        if not self.system_modes:
            raise ValueError("an event must carry at least one system mode")

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "detected_at": self.detected_at,
            "system_modes": [m.to_dict() for m in self.system_modes],
            "detectors_run": dict(sorted(self.detectors_run.items())),
            "config_hash": self.config_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "OscillationEvent":
        return cls(
            event_id=int(data["event_id"]),
            detected_at=int(data["detected_at"]),
            system_modes=tuple(EventMode.from_dict(m) for m in data["system_modes"]),
            detectors_run={k: int(v) for k, v in data["detectors_run"].items()},
            config_hash=str(data["config_hash"]),
        )


def event_mode_from_system_mode(sm: SystemMode) -> EventMode:
    from .core import damping_ratio

    rep_mode = max(sm.members.values(), key=lambda m: m.amplitude)
    return EventMode(
        frequency_hz=sm.frequency_hz,
        damping_ratio=damping_ratio(rep_mode),
        classification=sm.classification,
        member_channels=tuple(sorted(sm.members)),
        mode_shape=dict(sm.mode_shape),
    )


class EventStore:
    """Append-only event log: single writer, any number of readers."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._retry_queue: list[OscillationEvent] = []
        self._last_id: int | None = None

    def append(self, event: OscillationEvent) -> None:
        """Durably append one event; strictly increasing ids enforced.

        On a write failure the event is kept in memory and retried before
        the next append.
        """
        if self._last_id is not None and event.event_id <= self._last_id:
            raise ValueError(
                f"event ids must increase: {event.event_id} after {self._last_id}"
            )
        batch = self._retry_queue + [event]
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                for item in batch:
                    fh.write(item.to_json() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            self._retry_queue = batch
            raise StorageError(f"append failed, {len(batch)} event(s) queued: {exc}")
        self._retry_queue = []
        self._last_id = event.event_id

    def read_all(self) -> list[OscillationEvent]:
        events: list[OscillationEvent] = []
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    stripped = line.strip()
                    if not stripped:
                        continue
                    try:
                        events.append(OscillationEvent.from_dict(json.loads(stripped)))
                    except (json.JSONDecodeError, KeyError, ValueError) as exc:
                        logger.warning(
                            "skipping corrupt event-log line %d in %s: %s",
                            line_no,
                            self.path,
                            exc,
                        )
        except FileNotFoundError:
            return []
        return events

    def read_range(self, from_ms: int, to_ms: int) -> list[OscillationEvent]:
        """Events with detected_at in [from_ms, to_ms], chronological."""
        if from_ms > to_ms:
            raise ValueError(f"from ({from_ms}) must be <= to ({to_ms})")
        hits = [e for e in self.read_all() if from_ms <= e.detected_at <= to_ms]
        hits.sort(key=lambda e: (e.detected_at, e.event_id))
        return hits
