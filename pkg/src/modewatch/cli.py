"""Command-line entry points: synthesize benchmark data, replay detection,
cost benchmarking, and serving the operator API."""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone

from .core import ConfigError, DetectorConfig, ModewatchError
from .events import EventStore
from .pipeline import bench, dataset_from_channels, ingest_csv, run, write_csv
from .synth import BENCHMARK_CASES, generate, make_benchmark_case


def load_config_file(path: str) -> DetectorConfig:
    """Flat key=value text, field names as in DetectorConfig; freq_band is
    a comma pair. '#' starts a comment."""
    updates: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError({f"line {line_no}": f"expected key=value, got {line!r}"})
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "freq_band":
                parts = value.split(",")
                if len(parts) != 2:
                    raise ConfigError({"freq_band": "expected f_min,f_max"})
                updates[key] = (float(parts[0]), float(parts[1]))
            elif key == "ts_filter_depth":
                updates[key] = int(value)
            else:
                updates[key] = float(value)
    return DetectorConfig().merged(updates)


def _resolve_config(args) -> DetectorConfig:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return DetectorConfig()


def _format_time(ms: int) -> str:
    return datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc).strftime(
        "%Y-%m-%d %H:%M:%S"
    )


def _print_event_table(events) -> None:
    print(f"{'Time':<20} {'Type':<22} {'Frequency(Hz)':<14} Channels")
    for event in events:
        for mode in event.system_modes:
            kind = (
                "Local Oscillation"
                if mode.classification.value == "local"
                else "Inter-area Oscillation"
            )
            channels = "; ".join(mode.member_channels)
            print(
                f"{_format_time(event.detected_at):<20} {kind:<22} "
                f"{mode.frequency_hz:<14.4f} {channels}"
            )


def cmd_synth(args) -> int:
    spec = make_benchmark_case(
        args.case,
        seed=args.seed,
        channel_count=args.channels,
        duration=args.duration,
        sample_rate=args.sample_rate,
    )
    data = generate(spec)
    dataset = dataset_from_channels(
        data, spec.sample_rate, start_time=args.start_time
    )
    write_csv(dataset, args.out)
    print(
        f"wrote {args.case}: {len(dataset.channel_ids)} channels x "
        f"{dataset.n_samples} samples at {dataset.sample_rate:g} Hz -> {args.out}"
    )
    return 0


def cmd_detect(args) -> int:
    config = _resolve_config(args)
    dataset = ingest_csv(args.input)
    store = EventStore(args.events) if args.events else None
    result = run(dataset, config, workers=args.workers)
    for event in result.events:
        if store is not None:
            store.append(event)
    _print_event_table(result.events)
    print(
        f"\n{len(result.events)} event(s); detector calls: "
        f"prony {result.counters.prony_calls}, htls {result.counters.htls_calls}, "
        f"ekf {result.counters.ekf_calls}"
    )
    return 0


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    dataset = ingest_csv(args.input)
    started = time.perf_counter()
    result = bench(dataset, args.strategy, config)
    elapsed = time.perf_counter() - started
    counters = result.counters.to_dict()
    print(f"strategy: {args.strategy}")
    for key in (
        "n_total",
        "prony_calls",
        "htls_calls",
        "ekf_calls",
        "total_detector_calls",
        "windows_total",
        "windows_ok",
        "strides",
        "max_stride_wall_seconds",
    ):
        print(f"  {key}: {counters[key]}")
    print(f"  events: {len(result.events)}")
    print(f"  wall_seconds: {elapsed:.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import DetectorService, FollowRunner, ReplayRunner, create_app

    config = _resolve_config(args)
    store = EventStore(args.events) if args.events else None
    service = DetectorService(config, store=store)
    if args.follow:
        runner = FollowRunner(service, args.follow, workers=args.workers)
    else:
        dataset = ingest_csv(args.input)
        runner = ReplayRunner(
            service, dataset, speed=args.speed, workers=args.workers
        )
    runner.start()
    app = create_app(service)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        runner.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modewatch",
        description="Multi-channel low-frequency oscillation detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic benchmark dataset")
    p_synth.add_argument("--case", required=True, choices=BENCHMARK_CASES)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=2018)
    p_synth.add_argument("--channels", type=int, default=None)
    p_synth.add_argument("--duration", type=float, default=None)
    p_synth.add_argument("--sample-rate", type=float, default=None)
    p_synth.add_argument("--start-time", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_detect = sub.add_parser("detect", help="replay a CSV through the pipeline")
    p_detect.add_argument("--input", required=True)
    p_detect.add_argument("--config", default=None)
    p_detect.add_argument("--events", default=None, help="event log to append to")
    p_detect.add_argument("--workers", type=int, default=None)
    p_detect.set_defaults(func=cmd_detect)

    p_bench = sub.add_parser("bench", help="cost accounting for a strategy")
    p_bench.add_argument("--input", required=True)
    p_bench.add_argument(
        "--strategy", required=True, choices=("voting", "crosscheck")
    )
    p_bench.add_argument("--config", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="replay behind the operator API")
    source = p_serve.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", default=None, help="replay this CSV")
    source.add_argument("--follow", default=None, help="tail a growing CSV")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--speed", type=float, default=1.0)
    p_serve.add_argument("--config", default=None)
    p_serve.add_argument("--events", default=None)
    p_serve.add_argument("--workers", type=int, default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModewatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
