import math

import numpy as np
import pytest

from modewatch.core import (
    InsufficientDataError,
    NumericalDegeneracyError,
    TWO_PI,
    Verdict,
)
from modewatch.htls import (
    build_hankel,
    estimate_modes,
    htls_detect,
    shift_solve,
    truncate_rank,
)
from modewatch import prony

from conftest import single_mode, synth_window


class TestBuildHankel:
    def test_index_arithmetic(self):
        # rows + cols - 2 must equal the last sample index so the
        # bottom-right element is the last sample.
        y = np.arange(5.0)  # L = ceil(0.6 * 5) = 3, M = 5 + 1 - 3 = 3
        h = build_hankel(y)
        assert h.shape == (3, 3)
        assert h[0, 0] == y[0]
        assert h[-1, -1] == y[-1]

    def test_rows_exceed_cols(self):
        h = build_hankel(np.arange(150.0))
        assert h.shape[0] > h.shape[1]
        assert h.shape[0] + h.shape[1] == 150 + 1

    def test_antidiagonal_constancy(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(40)
        h = build_hankel(y)
        rows, cols = h.shape
        for i in range(rows):
            for j in range(cols):
                assert h[i, j] == y[i + j]

    def test_rank_equals_twice_mode_count(self):
        window = synth_window(
            [single_mode(freq_hz=0.5), single_mode(freq_hz=1.7)], seed=1
        )
        h = build_hankel(np.asarray(window.samples))
        s = np.linalg.svd(h, compute_uv=False)
        assert np.count_nonzero(s / s[0] > 1e-8) == 4

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            build_hankel(np.arange(3.0))


class TestTruncateRank:
    def test_single_mode_rank_two(self):
        window = synth_window([single_mode()])
        decomp = truncate_rank(build_hankel(np.asarray(window.samples)))
        assert decomp.rank == 2

    def test_tau_one_keeps_only_leading_direction(self):
        rng = np.random.default_rng(2)
        h = build_hankel(rng.standard_normal(60))
        assert truncate_rank(h, tau=1.0).rank == 1

    def test_noise_hits_the_cap(self):
        rng = np.random.default_rng(3)
        ranks = [
            truncate_rank(build_hankel(rng.standard_normal(150))).rank
            for _ in range(20)
        ]
        assert max(ranks) == 10  # cap = 2 directions x 5 modes
        assert np.median(ranks) == 10

    def test_zero_matrix_degenerate(self):
        with pytest.raises(NumericalDegeneracyError):
            truncate_rank(np.zeros((6, 4)))

    def test_singular_values_nonincreasing(self):
        window = synth_window([single_mode()], snr_db=20.0, seed=4)
        decomp = truncate_rank(build_hankel(np.asarray(window.samples)))
        assert np.all(np.diff(decomp.singular_values) <= 0)


class TestShiftSolve:
    def test_pole_matches_ground_truth(self):
        fs = 30.0
        window = synth_window([single_mode(sigma=0.1, freq_hz=1.4)], sample_rate=fs)
        decomp = truncate_rank(build_hankel(np.asarray(window.samples)))
        z_shift, pairs = shift_solve(decomp, fs)
        expected = np.exp((-0.1 + 1j * TWO_PI * 1.4) / fs)
        eigs = np.linalg.eigvals(z_shift)
        assert min(abs(e - expected) for e in eigs) < 1e-6
        sigma, omega = pairs[0]
        assert sigma == pytest.approx(0.1, abs=1e-6)
        assert omega == pytest.approx(TWO_PI * 1.4, rel=1e-6)

    def test_conjugate_symmetric_spectrum(self):
        window = synth_window([single_mode()], snr_db=25.0, seed=5)
        decomp = truncate_rank(build_hankel(np.asarray(window.samples)))
        z_shift, _ = shift_solve(decomp, 30.0)
        eigs = np.linalg.eigvals(z_shift)
        for e in eigs:
            assert min(abs(eigs - np.conj(e))) < 1e-9

    def test_orthogonal_basis_rotation_invariance(self):
        # Replacing the singular block U by U @ Q leaves the eigenvalues of
        # the shift solution unchanged (similarity transform).
        from dataclasses import replace

        window = synth_window(
            [single_mode(freq_hz=0.9), single_mode(freq_hz=1.9)], seed=6
        )
        decomp = truncate_rank(build_hankel(np.asarray(window.samples)))
        rng = np.random.default_rng(7)
        q, _ = np.linalg.qr(rng.standard_normal((decomp.rank, decomp.rank)))
        rotated = replace(decomp, u_hat=decomp.u_hat @ q)
        z1, _ = shift_solve(decomp, 30.0)
        z2, _ = shift_solve(rotated, 30.0)
        e1 = np.sort_complex(np.linalg.eigvals(z1))
        e2 = np.sort_complex(np.linalg.eigvals(z2))
        assert np.allclose(e1, e2, atol=1e-8)


class TestEstimateModes:
    def test_agrees_with_prony_on_exact_rank_data(self):
        window = synth_window(
            [single_mode(freq_hz=0.37, sigma=0.05), single_mode(freq_hz=1.4)],
            seed=8,
        )
        y = np.asarray(window.samples)
        got_htls = estimate_modes(y, 30.0)
        got_prony = prony.estimate_modes(y, 30.0, order=4)
        assert len(got_htls) == len(got_prony) == 2
        for mh, mp in zip(got_htls, got_prony):
            assert mh.angular_frequency == pytest.approx(
                mp.angular_frequency, rel=1e-6
            )
            assert mh.damping_factor == pytest.approx(mp.damping_factor, abs=1e-6)

    def test_scaling_leaves_poles_unchanged(self):
        window = synth_window([single_mode()], snr_db=25.0, seed=9)
        y = np.asarray(window.samples)
        base = estimate_modes(y, 30.0)
        scaled = estimate_modes(100.0 * y, 30.0)
        assert len(base) == len(scaled)
        for mb, ms in zip(base, scaled):
            assert ms.angular_frequency == pytest.approx(
                mb.angular_frequency, rel=1e-8
            )
            assert ms.damping_factor == pytest.approx(mb.damping_factor, abs=1e-8)

    def test_multi_mode_recovery_within_1e4(self):
        truth = [
            single_mode(amplitude=1.0, sigma=0.05, freq_hz=0.37, phase=0.4),
            single_mode(amplitude=0.8, sigma=0.10, freq_hz=1.4, phase=-1.0),
        ]
        window = synth_window(truth, seed=10)
        got = estimate_modes(np.asarray(window.samples), 30.0)
        assert len(got) == 2
        for want, mode in zip(truth, got):
            assert mode.angular_frequency == pytest.approx(
                want.angular_frequency, rel=1e-4
            )
            assert mode.damping_factor == pytest.approx(want.damping_factor, abs=1e-4)
            assert mode.amplitude == pytest.approx(want.amplitude, rel=1e-4)


class TestHtlsDetect:
    def test_interarea_mode_detected(self, config):
        window = synth_window(
            [single_mode(freq_hz=0.3703, sigma=0.05)],
            snr_db=30.0,
            seed=11,
            normalized=True,
        )
        result = htls_detect(window, config)
        assert result.verdict is Verdict.OSCILLATION
        assert any(
            abs(m.frequency_hz - 0.3703) / 0.3703 <= 0.03 for m in result.modes
        )

    def test_degrades_gracefully_on_zero_window(self, config):
        from conftest import make_window

        result = htls_detect(make_window(np.zeros(150)), config)
        assert result.verdict is Verdict.NO_OSCILLATION
        assert result.diagnostics
