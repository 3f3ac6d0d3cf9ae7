import numpy as np
import pytest

from modewatch.core import ChannelWindow, DetectorConfig, Mode, TWO_PI
from modewatch.preprocess import normalize
from modewatch.synth import SynthSpec, generate


@pytest.fixture
def config():
    return DetectorConfig()


def make_window(samples, sample_rate=30.0, channel_id="ch0", start_time=0):
    return ChannelWindow(
        channel_id=channel_id,
        start_time=start_time,
        sample_rate=sample_rate,
        samples=np.asarray(samples, dtype=float),
    )


def synth_window(
    modes,
    sample_rate=30.0,
    duration=5.0,
    snr_db=None,
    seed=0,
    normalized=False,
    channel_id="ch0",
):
    """One-channel ground-truth window, optionally noisy and normalized."""
    spec = SynthSpec(
        channel_modes=(tuple(modes),),
        sample_rate=sample_rate,
        duration=duration,
        snr_db=snr_db,
        seed=seed,
    )
    samples = generate(spec)["ch000"]
    window = make_window(samples, sample_rate=sample_rate, channel_id=channel_id)
    if normalized:
        window, _ = normalize(window)
    return window


def single_mode(amplitude=1.0, sigma=0.1, freq_hz=1.4, phase=0.0):
    return Mode(amplitude, sigma, TWO_PI * freq_hz, phase)
