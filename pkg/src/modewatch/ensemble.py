"""Sequential voting across the three detectors and the consecutive-window
false-alarm filter.

Voting order is fixed: the linear-prediction detector scans everything
(most sensitive, cheap to be wrong), the subspace detector confirms, and
the Kalman tracker breaks ties. Rejection by the first voter ends the vote,
so ambient data costs one detector call per window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (
    ChannelWindow,
    DetectionResult,
    DetectorConfig,
    Mode,
    SequencingError,
    Verdict,
    damping_ratio,
    modes_match,
    passes_mode_filter,
    wrap_phase,
)
from .ekf import ekf_detect, has_spectral_support
from .htls import htls_detect
from .prony import prony_detect


@dataclass(frozen=True)
class VoteTrace:
    """Which detectors ran and what each said, for cost accounting."""

    a_verdict: Verdict
    b_verdict: Verdict | None
    c_verdict: Verdict | None
    final: Verdict
    detectors_run: tuple[str, ...]


def _pair_modes(
    a_modes: tuple[Mode, ...],
    b_modes: tuple[Mode, ...],
    rel_tol: float,
) -> list[tuple[Mode, Mode]]:
    """Greedy one-to-one pairing by closest relative frequency."""
    candidates = []
    for i, ma in enumerate(a_modes):
        for j, mb in enumerate(b_modes):
            if modes_match(ma, mb, rel_tol):
                gap = abs(ma.frequency_hz - mb.frequency_hz) / min(
                    ma.frequency_hz, mb.frequency_hz
                )
                candidates.append((gap, i, j))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((a_modes[i], b_modes[j]))
    return pairs


def merge_modes(a: Mode, b: Mode) -> Mode:
    """Average two agreeing estimates: arithmetic mean of damping and
    frequency, mean amplitude, circular mean of phase."""
    phase = math.atan2(
        0.5 * (math.sin(a.phase) + math.sin(b.phase)),
        0.5 * (math.cos(a.phase) + math.cos(b.phase)),
    )
    return Mode(
        amplitude=0.5 * (a.amplitude + b.amplitude),
        damping_factor=0.5 * (a.damping_factor + b.damping_factor),
        angular_frequency=0.5 * (a.angular_frequency + b.angular_frequency),
        phase=wrap_phase(phase),
    )


def vote(
    window: ChannelWindow,
    config: DetectorConfig,
    *,
    detect_a=prony_detect,
    detect_b=htls_detect,
    detect_c=ekf_detect,
) -> tuple[DetectionResult, VoteTrace]:
    """Run the sequential schema on one normalized window.

    The second voter approves only when it confirms the first voter's
    finding, i.e. at least one mode pair matches within the configured
    sensitivity; a disjoint detection counts as disagreement and sends the
    decision to the tie-breaker.
    """
    result_a = detect_a(window, config)
    if result_a.verdict is Verdict.NO_OSCILLATION:
        trace = VoteTrace(
            a_verdict=Verdict.NO_OSCILLATION,
            b_verdict=None,
            c_verdict=None,
            final=Verdict.NO_OSCILLATION,
            detectors_run=("prony",),
        )
        return (
            DetectionResult(
                channel_id=window.channel_id,
                start_time=window.start_time,
                verdict=Verdict.NO_OSCILLATION,
                modes=(),
                detectors_run=frozenset({"prony"}),
                diagnostics=result_a.diagnostics,
            ),
            trace,
        )

    result_b = detect_b(window, config)
    merged = consensus_modes(window, config, result_a.modes, result_b.modes)
    b_agrees = result_b.verdict is Verdict.OSCILLATION and bool(merged)
    if b_agrees:
        trace = VoteTrace(
            a_verdict=Verdict.OSCILLATION,
            b_verdict=Verdict.OSCILLATION,
            c_verdict=None,
            final=Verdict.OSCILLATION,
            detectors_run=("prony", "htls"),
        )
        return (
            DetectionResult(
                channel_id=window.channel_id,
                start_time=window.start_time,
                verdict=Verdict.OSCILLATION,
                modes=merged,
                detectors_run=frozenset({"prony", "htls"}),
            ),
            trace,
        )

    result_c = detect_c(window, config)
    # The tie-breaker's approval is held to the same materiality bar as an
    # A-and-B consensus.
    c_modes = tuple(
        m
        for m in result_c.modes
        if has_spectral_support(
            window.samples,
            window.sample_rate,
            m.frequency_hz,
            config.freq_band,
            factor=CONSENSUS_SUPPORT_FACTOR,
        )
    )
    final = Verdict.OSCILLATION if c_modes else Verdict.NO_OSCILLATION
    trace = VoteTrace(
        a_verdict=Verdict.OSCILLATION,
        b_verdict=Verdict.NO_OSCILLATION,
        c_verdict=final,
        final=final,
        detectors_run=("prony", "htls", "ekf"),
    )
    return (
        DetectionResult(
            channel_id=window.channel_id,
            start_time=window.start_time,
            verdict=final,
            modes=c_modes,
            detectors_run=frozenset({"prony", "htls", "ekf"}),
            diagnostics=result_c.diagnostics,
        ),
        trace,
    )


@dataclass
class _PendingMode:
    mode: Mode
    count: int
    last_seen: int
    active: bool = False


# A vote-approved mode must stand well out of the window spectrum. The
# tracking trigger uses 4x the in-band median to merely *look*; approving
# an alarm takes more. Magnitude bins are Rayleigh-ish, so the false-fire
# chance per bin is about 2^(-factor^2): 5.5 puts noise in the 1e-9 class
# while any mode worth alarming on (SNR >= 0 dB) clears 6x comfortably.
CONSENSUS_SUPPORT_FACTOR = 5.5

# Consecutive detections must describe the same physical mode, not just the
# same frequency bin: damping ratio within this absolute gap and amplitudes
# within this ratio. Noise artifacts re-matched across overlapping windows
# rarely keep both stable.
ZETA_CONSISTENCY_ABS = 0.05
AMPLITUDE_CONSISTENCY_RATIO = 3.0


def consensus_modes(
    window: ChannelWindow,
    config: DetectorConfig,
    modes_a: tuple[Mode, ...],
    modes_b: tuple[Mode, ...],
) -> tuple[Mode, ...]:
    """Matched-pair merge of two detectors' mode lists, kept only when the
    merged estimate clears the mode filter and has spectral support.

    A pair failing either check was two detectors latching onto different
    noise artifacts; discarding it is the conservative choice.
    """
    pairs = _pair_modes(modes_a, modes_b, config.sensitivity)
    return tuple(
        sorted(
            (
                m
                for m in (merge_modes(ma, mb) for ma, mb in pairs)
                if passes_mode_filter(m, config, window.duration_seconds)
                and has_spectral_support(
                    window.samples,
                    window.sample_rate,
                    m.frequency_hz,
                    config.freq_band,
                    factor=CONSENSUS_SUPPORT_FACTOR,
                )
            ),
            key=lambda m: m.angular_frequency,
        )
    )


def _consistent_characteristics(a: Mode, b: Mode) -> bool:
    if abs(damping_ratio(a) - damping_ratio(b)) > ZETA_CONSISTENCY_ABS:
        return False
    hi = max(a.amplitude, b.amplitude)
    lo = min(a.amplitude, b.amplitude)
    return hi <= AMPLITUDE_CONSISTENCY_RATIO * lo


@dataclass
class TsFilterState:
    """Per-channel consecutive-detection bookkeeping.

    Owned by exactly one worker (the stride aggregator); entries expire as
    soon as a window passes without a matching detection.
    """

    pending: dict[str, list[_PendingMode]] = field(default_factory=dict)
    last_index: dict[str, int] = field(default_factory=dict)


def _smooth(old: Mode, new: Mode) -> Mode:
    """Exponential smoothing (weight 0.5) of a re-detected mode."""
    phase = math.atan2(
        0.5 * (math.sin(old.phase) + math.sin(new.phase)),
        0.5 * (math.cos(old.phase) + math.cos(new.phase)),
    )
    return Mode(
        amplitude=0.5 * (old.amplitude + new.amplitude),
        damping_factor=0.5 * (old.damping_factor + new.damping_factor),
        angular_frequency=0.5 * (old.angular_frequency + new.angular_frequency),
        phase=wrap_phase(phase),
    )


def ts_filter_update(
    state: TsFilterState,
    channel_id: str,
    window_index: int,
    result: DetectionResult,
    config: DetectorConfig,
) -> list[Mode]:
    """Update the consecutive-hit counters; return newly confirmed modes.

    A mode is confirmed once it has matched across ``ts_filter_depth``
    consecutive windows; it will not fire again until it lapses (one window
    without a match drops it).
    """
    last = state.last_index.get(channel_id)
    if last is not None and window_index <= last:
        raise SequencingError(
            f"channel {channel_id}: window index {window_index} after {last}"
        )
    state.last_index[channel_id] = window_index

    previous = [
        entry
        for entry in state.pending.get(channel_id, [])
        if entry.last_seen == window_index - 1
    ]
    detected = list(result.modes)

    # Greedy one-to-one matching of new detections onto pending entries.
    candidates = []
    for i, entry in enumerate(previous):
        for j, mode in enumerate(detected):
            if modes_match(entry.mode, mode, config.sensitivity) and _consistent_characteristics(
                entry.mode, mode
            ):
                gap = abs(entry.mode.frequency_hz - mode.frequency_hz) / min(
                    entry.mode.frequency_hz, mode.frequency_hz
                )
                candidates.append((gap, i, j))
    candidates.sort()
    matched_entries: set[int] = set()
    matched_modes: set[int] = set()
    next_pending: list[_PendingMode] = []
    confirmed: list[Mode] = []
    for _, i, j in candidates:
        if i in matched_entries or j in matched_modes:
            continue
        matched_entries.add(i)
        matched_modes.add(j)
        entry = previous[i]
        smoothed = _smooth(entry.mode, detected[j])
        count = entry.count + 1
        active = entry.active
        if count >= config.ts_filter_depth and not active:
            confirmed.append(smoothed)
            active = True
        next_pending.append(
            _PendingMode(mode=smoothed, count=count, last_seen=window_index, active=active)
        )

    for j, mode in enumerate(detected):
        if j in matched_modes:
            continue
        active = False
        count = 1
        if count >= config.ts_filter_depth:
            confirmed.append(mode)
            active = True
        next_pending.append(
            _PendingMode(mode=mode, count=count, last_seen=window_index, active=active)
        )

    state.pending[channel_id] = next_pending
    confirmed.sort(key=lambda m: m.angular_frequency)
    return confirmed
