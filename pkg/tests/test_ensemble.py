import numpy as np
import pytest

from modewatch.core import (
    DetectionResult,
    DetectorConfig,
    Mode,
    SequencingError,
    TWO_PI,
    Verdict,
)
from modewatch.ensemble import (
    TsFilterState,
    merge_modes,
    ts_filter_update,
    vote,
)

from conftest import make_window, single_mode, synth_window


def _result(window, modes, detector="prony"):
    modes = tuple(modes)
    return DetectionResult(
        channel_id=window.channel_id,
        start_time=window.start_time,
        verdict=Verdict.OSCILLATION if modes else Verdict.NO_OSCILLATION,
        modes=modes,
        detectors_run=frozenset({detector}),
    )


def _fake(modes_or_none, calls, name):
    def detector(window, config):
        calls.append(name)
        return _result(window, modes_or_none or ())

    return detector


class TestVote:
    def setup_method(self):
        self.window = synth_window(
            [single_mode(freq_hz=1.4, sigma=0.1)], snr_db=25.0, seed=0, normalized=True
        )
        self.mode = single_mode(amplitude=1.4, freq_hz=1.4, sigma=0.1)

    def test_first_voter_rejection_is_final(self, config):
        calls = []
        result, trace = vote(
            self.window,
            config,
            detect_a=_fake(None, calls, "a"),
            detect_b=_fake([self.mode], calls, "b"),
            detect_c=_fake([self.mode], calls, "c"),
        )
        assert result.verdict is Verdict.NO_OSCILLATION
        assert calls == ["a"]
        assert trace.detectors_run == ("prony",)
        assert trace.b_verdict is None and trace.c_verdict is None

    def test_second_voter_agreement_skips_third(self, config):
        calls = []
        close = single_mode(amplitude=1.3, freq_hz=1.41, sigma=0.1)
        result, trace = vote(
            self.window,
            config,
            detect_a=_fake([self.mode], calls, "a"),
            detect_b=_fake([close], calls, "b"),
            detect_c=_fake([self.mode], calls, "c"),
        )
        assert result.verdict is Verdict.OSCILLATION
        assert calls == ["a", "b"]
        assert trace.detectors_run == ("prony", "htls")
        # merged mode averages the pair
        assert result.modes[0].frequency_hz == pytest.approx(1.405, rel=1e-6)

    def test_third_voter_breaks_disagreement(self, config):
        calls = []
        result, trace = vote(
            self.window,
            config,
            detect_a=_fake([self.mode], calls, "a"),
            detect_b=_fake(None, calls, "b"),
            detect_c=_fake([self.mode], calls, "c"),
        )
        assert result.verdict is Verdict.OSCILLATION
        assert calls == ["a", "b", "c"]
        assert trace.detectors_run == ("prony", "htls", "ekf")

    def test_third_voter_rejection_is_final(self, config):
        calls = []
        result, trace = vote(
            self.window,
            config,
            detect_a=_fake([self.mode], calls, "a"),
            detect_b=_fake(None, calls, "b"),
            detect_c=_fake(None, calls, "c"),
        )
        assert result.verdict is Verdict.NO_OSCILLATION
        assert calls == ["a", "b", "c"]

    def test_decision_table_is_exhaustive(self, config):
        # All four reachable (A, B, C) combinations map to the schema result.
        cases = [
            ((None, None, None), Verdict.NO_OSCILLATION, 1),
            (([self.mode], [self.mode], None), Verdict.OSCILLATION, 2),
            (([self.mode], None, [self.mode]), Verdict.OSCILLATION, 3),
            (([self.mode], None, None), Verdict.NO_OSCILLATION, 3),
        ]
        for (a, b, c), want, n_run in cases:
            calls = []
            result, trace = vote(
                self.window,
                config,
                detect_a=_fake(a, calls, "a"),
                detect_b=_fake(b, calls, "b"),
                detect_c=_fake(c, calls, "c"),
            )
            assert result.verdict is want
            assert len(calls) == n_run

    def test_disjoint_detections_fall_through_to_third(self, config):
        # B fires on a frequency that cannot be the same physical mode as
        # A's finding; that is disagreement, not confirmation.
        calls = []
        other = single_mode(amplitude=1.0, freq_hz=2.2)
        result, trace = vote(
            self.window,
            config,
            detect_a=_fake([self.mode], calls, "a"),
            detect_b=_fake([other], calls, "b"),
            detect_c=_fake(None, calls, "c"),
        )
        assert calls == ["a", "b", "c"]
        assert result.verdict is Verdict.NO_OSCILLATION

    def test_laziness_on_rejecting_stream(self, config):
        rng = np.random.default_rng(1)
        b_calls, c_calls = [], []

        def never(window, cfg):
            return _result(window, ())

        for _ in range(20):
            y = rng.standard_normal(150)
            window = make_window((y - y.mean()) / y.std())
            vote(
                window,
                config,
                detect_a=never,
                detect_b=_fake(None, b_calls, "b"),
                detect_c=_fake(None, c_calls, "c"),
            )
        assert b_calls == [] and c_calls == []


class TestMergeModes:
    def test_parameter_averaging(self):
        a = Mode(1.0, 0.10, TWO_PI * 1.40, 0.0)
        b = Mode(2.0, 0.20, TWO_PI * 1.42, 0.2)
        merged = merge_modes(a, b)
        assert merged.amplitude == pytest.approx(1.5)
        assert merged.damping_factor == pytest.approx(0.15)
        assert merged.frequency_hz == pytest.approx(1.41)
        assert merged.phase == pytest.approx(0.1, abs=1e-9)

    def test_circular_phase_mean_across_wrap(self):
        a = Mode(1.0, 0.0, 1.0, np.pi - 0.1)
        b = Mode(1.0, 0.0, 1.0, -np.pi + 0.1)
        merged = merge_modes(a, b)
        assert abs(merged.phase) == pytest.approx(np.pi, abs=1e-9)


class TestTsFilter:
    def _result_at(self, channel, index, freqs, amp=1.0, sigma=0.01):
        modes = tuple(single_mode(amplitude=amp, sigma=sigma, freq_hz=f) for f in freqs)
        return DetectionResult(
            channel_id=channel,
            start_time=index * 1000,
            verdict=Verdict.OSCILLATION if modes else Verdict.NO_OSCILLATION,
            modes=modes,
            detectors_run=frozenset({"prony"}),
        )

    def test_confirmation_after_depth_consecutive_matches(self, config):
        state = TsFilterState()
        out0 = ts_filter_update(state, "c", 0, self._result_at("c", 0, [1.00]), config)
        assert out0 == []
        out1 = ts_filter_update(state, "c", 1, self._result_at("c", 1, [1.01]), config)
        assert len(out1) == 1
        assert out1[0].frequency_hz == pytest.approx(1.005)

    def test_single_window_detection_never_confirms(self, config):
        state = TsFilterState()
        assert ts_filter_update(state, "c", 0, self._result_at("c", 0, [1.0]), config) == []
        assert ts_filter_update(state, "c", 1, self._result_at("c", 1, []), config) == []
        assert ts_filter_update(state, "c", 2, self._result_at("c", 2, [1.0]), config) == []

    def test_frequency_jump_resets_counter(self, config):
        state = TsFilterState()
        ts_filter_update(state, "c", 0, self._result_at("c", 0, [1.00]), config)
        out = ts_filter_update(state, "c", 1, self._result_at("c", 1, [1.50]), config)
        assert out == []
        out = ts_filter_update(state, "c", 2, self._result_at("c", 2, [1.50]), config)
        assert len(out) == 1  # 1.50 matched itself across windows 1-2

    def test_no_refire_while_mode_stays_active(self, config):
        state = TsFilterState()
        for index in range(6):
            out = ts_filter_update(
                state, "c", index, self._result_at("c", index, [1.0]), config
            )
            if index == 1:
                assert len(out) == 1
            else:
                assert out == []

    def test_refire_after_lapse(self, config):
        state = TsFilterState()
        for index in range(2):
            out = ts_filter_update(
                state, "c", index, self._result_at("c", index, [1.0]), config
            )
        assert len(out) == 1
        ts_filter_update(state, "c", 2, self._result_at("c", 2, []), config)
        ts_filter_update(state, "c", 3, self._result_at("c", 3, [1.0]), config)
        out = ts_filter_update(state, "c", 4, self._result_at("c", 4, [1.0]), config)
        assert len(out) == 1

    def test_depth_one_equals_raw_approvals(self):
        config = DetectorConfig(ts_filter_depth=1)
        state = TsFilterState()
        out = ts_filter_update(state, "c", 0, self._result_at("c", 0, [1.0]), config)
        assert len(out) == 1

    def test_monotone_in_depth(self):
        rng = np.random.default_rng(2)
        stream = []
        for index in range(40):
            freqs = []
            if rng.random() < 0.5:
                freqs.append(float(rng.uniform(0.9, 1.1)))
            stream.append(freqs)
        counts = {}
        for depth in (1, 2, 3):
            config = DetectorConfig(ts_filter_depth=depth)
            state = TsFilterState()
            confirmed = 0
            for index, freqs in enumerate(stream):
                confirmed += len(
                    ts_filter_update(
                        state, "c", index, self._result_at("c", index, freqs), config
                    )
                )
            counts[depth] = confirmed
        assert counts[1] >= counts[2] >= counts[3]

    def test_inconsistent_damping_is_not_a_match(self, config):
        state = TsFilterState()
        ts_filter_update(
            state, "c", 0, self._result_at("c", 0, [1.0], sigma=0.01), config
        )
        # Same frequency but wildly different damping: not the same mode.
        wild = DetectionResult(
            channel_id="c",
            start_time=1000,
            verdict=Verdict.OSCILLATION,
            modes=(Mode(1.0, 2.5, TWO_PI * 1.0, 0.0),),
            detectors_run=frozenset({"prony"}),
        )
        assert ts_filter_update(state, "c", 1, wild, config) == []

    def test_out_of_order_window_rejected(self, config):
        state = TsFilterState()
        ts_filter_update(state, "c", 3, self._result_at("c", 3, []), config)
        with pytest.raises(SequencingError):
            ts_filter_update(state, "c", 3, self._result_at("c", 3, []), config)

    def test_channels_tracked_independently(self, config):
        state = TsFilterState()
        ts_filter_update(state, "a", 0, self._result_at("a", 0, [1.0]), config)
        out = ts_filter_update(state, "b", 1, self._result_at("b", 1, [1.0]), config)
        assert out == []  # channel b has no pending history
