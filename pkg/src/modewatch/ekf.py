"""Extended Kalman filter tracking of mode frequency and damping.

A spectral trigger proposes candidate frequencies; the filter then tracks,
per candidate, an oscillatory (re, im) pair plus its angular frequency and
damping factor through the window. The pair rotates by omega/fs and shrinks
by exp(-sigma/fs) each step, so its real part reproduces a damped cosine
exactly and the measurement is just the sum of the re components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import (
    TWO_PI,
    ChannelWindow,
    DetectionResult,
    DetectorConfig,
    Mode,
    TriggerMissingError,
    Verdict,
    filter_modes,
    wrap_phase,
)


@dataclass(frozen=True)
class EkfTuning:
    """Filter constants, sized for unit-variance normalized windows."""

    amplitude_var: float = 1.0
    omega_var: float = (TWO_PI * 0.1) ** 2
    sigma_var: float = 1.0
    process_noise_osc: float = 1e-6
    process_noise_rate: float = 1e-8
    measurement_var: float = 1e-2
    trigger_factor: float = 4.0
    max_candidates: int = 3
    convergence_tail: float = 0.2
    convergence_rel_std: float = 0.01


DEFAULT_TUNING = EkfTuning()


@dataclass(frozen=True)
class EkfState:
    """Joint filter state over L tracked modes (state dimension 4L)."""

    re: np.ndarray
    im: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    cov: np.ndarray
    q_diag: np.ndarray
    r: float
    sample_rate: float

    @property
    def n_modes(self) -> int:
        return len(self.re)

    @property
    def dim(self) -> int:
        return 4 * self.n_modes

    def vector(self) -> np.ndarray:
        return np.concatenate([self.re, self.im, self.omega, self.sigma])

    def with_vector(self, x: np.ndarray, cov: np.ndarray) -> "EkfState":
        L = self.n_modes
        return replace(
            self,
            re=x[:L].copy(),
            im=x[L : 2 * L].copy(),
            omega=x[2 * L : 3 * L].copy(),
            sigma=x[3 * L :].copy(),
            cov=cov,
        )


def spectral_magnitudes(samples, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Hann-tapered magnitude spectrum and its bin frequencies."""
    y = np.asarray(samples, dtype=float)
    taper = np.hanning(len(y))
    spectrum = np.abs(np.fft.rfft(y * taper))
    freqs = np.fft.rfftfreq(len(y), d=1.0 / sample_rate)
    return freqs, spectrum


def has_spectral_support(
    samples,
    sample_rate: float,
    frequency_hz: float,
    freq_band: tuple[float, float],
    factor: float = DEFAULT_TUNING.trigger_factor,
) -> bool:
    """Whether a claimed mode frequency stands out of the window spectrum.

    True iff some bin within one bin-width of the frequency reaches
    ``factor`` times the median in-band magnitude -- the same materiality
    rule the tracking trigger uses.
    """
    freqs, spectrum = spectral_magnitudes(samples, sample_rate)
    f_min, f_max = freq_band
    in_band = (freqs >= f_min) & (freqs <= f_max)
    if not in_band.any():
        return False
    floor = float(np.median(spectrum[in_band]))
    bin_width = freqs[1] if len(freqs) > 1 else sample_rate
    near = np.abs(freqs - frequency_hz) <= bin_width
    if not near.any():
        return False
    return bool(np.max(spectrum[near]) >= factor * floor)


def fft_trigger(
    window: ChannelWindow,
    config: DetectorConfig,
    tuning: EkfTuning = DEFAULT_TUNING,
) -> list[float]:
    """In-band spectral peaks worth tracking, strongest first.

    Hann-tapered magnitude spectrum; a bin qualifies when it is a local
    maximum and at least ``trigger_factor`` times the median in-band
    magnitude. At most ``max_candidates`` frequencies are returned.
    """
    freqs, spectrum = spectral_magnitudes(window.samples, window.sample_rate)
    f_min, f_max = config.freq_band
    in_band = (freqs >= f_min) & (freqs <= f_max)
    if not in_band.any():
        return []
    floor = float(np.median(spectrum[in_band]))
    candidates = []
    for idx in np.flatnonzero(in_band):
        mag = spectrum[idx]
        left = spectrum[idx - 1] if idx > 0 else -np.inf
        right = spectrum[idx + 1] if idx + 1 < len(spectrum) else -np.inf
        if mag >= left and mag > right and mag >= tuning.trigger_factor * floor:
            candidates.append((float(mag), float(freqs[idx])))
    candidates.sort(key=lambda c: (-c[0], c[1]))
    return [freq for _, freq in candidates[: tuning.max_candidates]]


def ekf_init(
    window: ChannelWindow,
    candidates: list[float],
    tuning: EkfTuning = DEFAULT_TUNING,
) -> EkfState:
    """Initial state from the DFT bins of the candidate frequencies.

    omega starts at the candidate, sigma at zero, and the oscillatory pair
    at the bin's complex amplitude.
    """
    if not candidates:
        raise TriggerMissingError("no candidate frequencies; EKF skipped")
    y = np.asarray(window.samples, dtype=float)
    n = len(y)
    taper = np.hanning(n)
    spectrum = np.fft.rfft(y * taper)
    freqs = np.fft.rfftfreq(n, d=1.0 / window.sample_rate)
    taper_sum = float(taper.sum())

    L = len(candidates)
    re = np.empty(L)
    im = np.empty(L)
    omega = np.empty(L)
    for l, f_c in enumerate(candidates):
        idx = int(np.argmin(np.abs(freqs - f_c)))
        amp = 2.0 * abs(spectrum[idx]) / taper_sum
        phase = float(np.angle(spectrum[idx]))
        re[l] = amp * math.cos(phase)
        im[l] = amp * math.sin(phase)
        omega[l] = TWO_PI * f_c
    sigma = np.zeros(L)

    d = 4 * L
    cov = np.zeros((d, d))
    q_diag = np.empty(d)
    for l in range(L):
        cov[l, l] = tuning.amplitude_var
        cov[L + l, L + l] = tuning.amplitude_var
        cov[2 * L + l, 2 * L + l] = tuning.omega_var
        cov[3 * L + l, 3 * L + l] = tuning.sigma_var
        q_diag[l] = tuning.process_noise_osc
        q_diag[L + l] = tuning.process_noise_osc
        q_diag[2 * L + l] = tuning.process_noise_rate
        q_diag[3 * L + l] = tuning.process_noise_rate
    return EkfState(
        re=re,
        im=im,
        omega=omega,
        sigma=sigma,
        cov=cov,
        q_diag=q_diag,
        r=tuning.measurement_var,
        sample_rate=window.sample_rate,
    )


def _predict(x: np.ndarray, n_modes: int, sample_rate: float):
    from .kernels import _pure

    return _pure._predict_state(np.asarray(x, dtype=float), n_modes, sample_rate)


def transition(x: np.ndarray, n_modes: int, sample_rate: float) -> np.ndarray:
    """One-step state transition (pure function of the state vector)."""
    out, _ = _predict(x, n_modes, sample_rate)
    return out


def transition_jacobian(x: np.ndarray, n_modes: int, sample_rate: float) -> np.ndarray:
    """Analytic Jacobian of :func:`transition` at ``x``."""
    _, jac = _predict(x, n_modes, sample_rate)
    return jac


def measurement_update(state: EkfState, y_k: float) -> tuple[EkfState, float]:
    """Standard gain/state/covariance update against one sample."""
    L = state.n_modes
    d = state.dim
    x = state.vector()
    p = state.cov
    h = np.zeros(d)
    h[:L] = 1.0
    innovation = float(y_k - np.sum(x[:L]))
    ph = p @ h
    s = float(h @ ph) + state.r
    gain = ph / s
    x_new = x + gain * innovation
    a = np.eye(d) - np.outer(gain, h)
    p_new = a @ p @ a.T + state.r * np.outer(gain, gain)
    p_new = 0.5 * (p_new + p_new.T)
    return state.with_vector(x_new, p_new), innovation


def ekf_step(state: EkfState, y_k: float) -> tuple[EkfState, float]:
    """Predict then update. Raises on divergence (non-finite results)."""
    L = state.n_modes
    x = state.vector()
    x_pred, jac = _predict(x, L, state.sample_rate)
    p_pred = jac @ state.cov @ jac.T + np.diag(state.q_diag)
    predicted = state.with_vector(x_pred, p_pred)
    updated, innovation = measurement_update(predicted, y_k)
    if not (math.isfinite(innovation) and np.all(np.isfinite(updated.cov))):
        raise FloatingPointError("EKF diverged: non-finite innovation or covariance")
    return updated, innovation


def run_window(state: EkfState, samples) -> dict:
    """Filter a whole window through the selected kernel.

    The initial state refers to the first sample, so step 0 is update-only.
    Returns post-update trajectories, innovations, and a divergence flag.
    """
    re_t, im_t, om_t, sg_t, innov, p_final, ok = kernels.ekf_filter(
        np.asarray(samples, dtype=float),
        state.re,
        state.im,
        state.omega,
        state.sigma,
        state.cov,
        state.q_diag,
        state.r,
        state.sample_rate,
    )
    return {
        "re": re_t,
        "im": im_t,
        "omega": om_t,
        "sigma": sg_t,
        "innovations": innov,
        "cov_final": p_final,
        "ok": ok,
    }


def ekf_detect(
    window: ChannelWindow,
    config: DetectorConfig,
    tuning: EkfTuning = DEFAULT_TUNING,
) -> DetectionResult:
    """Trigger, init, filter, then the shared mode filter.

    A mode is reported only when its frequency estimate has settled: over
    the final 20% of the window the omega trajectory's standard deviation
    must stay below 1% of its mean.
    """

    def rejection(diag: str) -> DetectionResult:
        return DetectionResult(
            channel_id=window.channel_id,
            start_time=window.start_time,
            verdict=Verdict.NO_OSCILLATION,
            modes=(),
            detectors_run=frozenset({"ekf"}),
            diagnostics=(diag,),
        )

    candidates = fft_trigger(window, config, tuning)
    if not candidates:
        return rejection("ekf: trigger missing")

    state = ekf_init(window, candidates, tuning)
    traj = run_window(state, window.samples)
    if not traj["ok"]:
        return rejection("ekf: diverged")

    n = len(window.samples)
    tail_start = n - max(1, int(round(tuning.convergence_tail * n)))
    mid = n // 2
    fs = window.sample_rate
    modes = []
    for l in range(state.n_modes):
        omega_tail = traj["omega"][tail_start:, l]
        omega_hat = float(np.mean(omega_tail))
        if omega_hat <= 0.0:
            continue
        if float(np.std(omega_tail)) >= tuning.convergence_rel_std * omega_hat:
            continue
        sigma_hat = float(np.mean(traj["sigma"][tail_start:, l]))
        re_mid = float(traj["re"][mid, l])
        im_mid = float(traj["im"][mid, l])
        t_mid = mid / fs
        amplitude = math.hypot(re_mid, im_mid) * math.exp(sigma_hat * t_mid)
        phase = wrap_phase(math.atan2(im_mid, re_mid) - omega_hat * t_mid)
        modes.append(Mode(amplitude, sigma_hat, omega_hat, phase))

    kept = filter_modes(modes, config, window.duration_seconds)
    verdict = Verdict.OSCILLATION if kept else Verdict.NO_OSCILLATION
    return DetectionResult(
        channel_id=window.channel_id,
        start_time=window.start_time,
        verdict=verdict,
        modes=kept,
        detectors_run=frozenset({"ekf"}),
        diagnostics=() if kept else ("ekf: no converged in-band mode",),
    )
