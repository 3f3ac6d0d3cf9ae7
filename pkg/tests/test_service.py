import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from modewatch.core import DetectorConfig, TWO_PI
from modewatch.events import EventStore
from modewatch.pipeline import dataset_from_channels, write_csv
from modewatch.service import (
    DetectorService,
    FollowRunner,
    ReplayRunner,
    Subscriber,
    create_app,
)

from conftest import single_mode


def stream_dataset(
    n_channels=4,
    duration=20.0,
    fs=25.0,
    seed=0,
    inject=None,  # (freq_hz, amplitude, start_s, stop_s, channel_indices)
):
    rng = np.random.default_rng(seed)
    n = int(duration * fs)
    t = np.arange(n) / fs
    channels = {}
    for i in range(n_channels):
        y = rng.standard_normal(n)
        if inject is not None:
            freq, amp, start_s, stop_s, indices = inject
            if i in indices:
                gate = (t >= start_s) & (t < stop_s)
                y = y + gate * amp * np.cos(TWO_PI * freq * t)
        channels[f"ch{i:02d}"] = y
    return dataset_from_channels(channels, fs, start_time=1_700_000_000_000)


def drain_runner(service, dataset, **kwargs):
    runner = ReplayRunner(service, dataset, speed=0.0, **kwargs)
    runner.start()
    assert runner.finished.wait(timeout=120)
    return runner


class TestConfigEndpoint:
    def test_get_returns_active_config(self):
        service = DetectorService(DetectorConfig())
        client = TestClient(create_app(service))
        body = client.get("/config").json()
        assert body["active"]["damping_ratio_alarm"] == 0.05
        assert body["pending"] is None
        assert body["version"] == 1

    def test_put_is_pending_until_stride_boundary(self):
        service = DetectorService(DetectorConfig())
        client = TestClient(create_app(service))
        response = client.put("/config", json={"damping_ratio_alarm": 0.10})
        assert response.status_code == 200
        body = response.json()
        assert body["active"]["damping_ratio_alarm"] == 0.05
        assert body["pending"]["damping_ratio_alarm"] == 0.10
        active = service.begin_stride()
        assert active.damping_ratio_alarm == 0.10
        assert client.get("/config").json()["version"] == 2

    def test_invalid_update_rejected_with_diagnostics(self):
        service = DetectorService(DetectorConfig())
        client = TestClient(create_app(service))
        response = client.put("/config", json={"freq_band": [2.0, 0.1]})
        assert response.status_code == 422
        assert "freq_band" in response.json()["diagnostics"]
        assert client.get("/config").json()["active"]["freq_band"] == [0.1, 2.5]
        assert client.get("/config").json()["pending"] is None

    def test_config_changes_apply_at_stride_boundaries_only(self):
        service = DetectorService(DetectorConfig())
        seen = []
        original_begin = service.begin_stride

        def spy():
            config = original_begin()
            seen.append(config.damping_ratio_alarm)
            return config

        service.begin_stride = spy
        dataset = stream_dataset(n_channels=2, duration=8.0)
        runner = ReplayRunner(service, dataset, speed=0.0)
        service.put_config({"damping_ratio_alarm": 0.2})
        runner.start()
        assert runner.finished.wait(timeout=60)
        # Every stride saw exactly one config; the new value appears from
        # some boundary onward and never mid-stride.
        assert set(seen) <= {0.05, 0.2}
        if 0.2 in seen:
            first = seen.index(0.2)
            assert all(v == 0.2 for v in seen[first:])


class TestStream:
    def test_persistent_mode_yields_exactly_one_event_after_depth_strides(self):
        service = DetectorService(DetectorConfig())
        sub = service.subscribe()
        onset_s = 8.0
        dataset = stream_dataset(
            n_channels=4,
            duration=20.0,
            inject=(1.0, 3.0, onset_s, 20.0, {1}),
        )
        drain_runner(service, dataset)
        events = []
        statuses = []
        while True:
            message = sub.pop(timeout=0.05)
            if message is None:
                break
            if message["type"] == "event":
                events.append(message["event"])
            elif message["type"] == "status":
                statuses.append(message)
        assert len(events) == 1
        event = events[0]
        assert len(event["system_modes"]) == 1
        assert abs(event["system_modes"][0]["frequency_hz"] - 1.0) <= 0.03
        assert statuses, "status summaries expected"
        # Latency bound: confirmation takes ts_filter_depth consecutive
        # windows. Earliest: detection begins on the first window touching
        # injected data; latest: on the first fully-injected window.
        config = DetectorConfig()
        depth_lag = (config.ts_filter_depth - 1) * config.stride_seconds
        earliest = dataset.start_time + int(
            1000 * (onset_s - config.window_seconds + config.stride_seconds
                    + depth_lag + config.window_seconds)
        )
        latest = dataset.start_time + int(
            1000 * (onset_s + depth_lag + config.window_seconds)
        )
        assert earliest <= event["detected_at"] <= latest

    def test_ambient_stream_has_statuses_but_no_events(self):
        service = DetectorService(DetectorConfig())
        sub = service.subscribe()
        drain_runner(service, stream_dataset(n_channels=3, duration=12.0))
        kinds = []
        while True:
            message = sub.pop(timeout=0.05)
            if message is None:
                break
            kinds.append(message["type"])
        assert "status" in kinds
        assert "event" not in kinds

    def test_two_subscribers_see_identical_sequences(self):
        service = DetectorService(DetectorConfig())
        sub_a = service.subscribe()
        sub_b = service.subscribe()
        dataset = stream_dataset(
            n_channels=3, duration=16.0, inject=(1.2, 3.0, 6.0, 16.0, {0})
        )
        drain_runner(service, dataset)

        def drain(sub):
            out = []
            while True:
                message = sub.pop(timeout=0.05)
                if message is None:
                    return out
                out.append(json.dumps(message, sort_keys=True))

        assert drain(sub_a) == drain(sub_b)

    def test_slow_subscriber_gets_gap_marker(self):
        sub = Subscriber(limit=3)
        for i in range(6):
            sub.push({"type": "status", "stride_index": i})
        messages = []
        while True:
            message = sub.pop(timeout=0.01)
            if message is None:
                break
            messages.append(message)
        assert messages[0] == {"type": "gap"}
        assert [m["stride_index"] for m in messages[1:]] == [3, 4, 5]

    def test_websocket_transport(self):
        service = DetectorService(DetectorConfig())
        app = create_app(service)
        client = TestClient(app)
        dataset = stream_dataset(n_channels=2, duration=8.0)
        with client.websocket_connect("/stream") as ws:
            runner = ReplayRunner(service, dataset, speed=0.0)
            runner.start()
            message = ws.receive_json()
            assert message["type"] in ("status", "event")
            runner.finished.wait(timeout=60)


class TestHistoryEndpoint:
    def test_history_round_trip(self, tmp_path):
        store = EventStore(tmp_path / "events.jsonl")
        service = DetectorService(DetectorConfig(), store=store)
        client = TestClient(create_app(service))
        dataset = stream_dataset(
            n_channels=4, duration=20.0, inject=(1.0, 3.0, 8.0, 20.0, {1})
        )
        drain_runner(service, dataset)
        body = client.get(
            "/history", params={"from": 0, "to": 2**60}
        ).json()
        assert len(body["events"]) == 1
        empty = client.get(
            "/history", params={"from": 0, "to": 10}
        ).json()
        assert empty["events"] == []

    def test_bad_range_rejected(self):
        service = DetectorService(DetectorConfig())
        client = TestClient(create_app(service))
        response = client.get("/history", params={"from": 10, "to": 5})
        assert response.status_code == 422


class TestFollowRunner:
    def test_follow_processes_appended_rows(self, tmp_path):
        path = tmp_path / "live.csv"
        dataset = stream_dataset(
            n_channels=3, duration=14.0, inject=(1.1, 3.0, 0.0, 14.0, {0})
        )
        write_csv(dataset, str(path))

        service = DetectorService(DetectorConfig())
        sub = service.subscribe()
        runner = FollowRunner(service, str(path), poll_seconds=0.05)
        runner.start()
        deadline = time.time() + 60
        events = []
        while time.time() < deadline:
            message = sub.pop(timeout=0.1)
            if message and message["type"] == "event":
                events.append(message["event"])
                break
        runner.stop()
        runner.finished.wait(timeout=10)
        assert events and abs(events[0]["system_modes"][0]["frequency_hz"] - 1.1) < 0.05
