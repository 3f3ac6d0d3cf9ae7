"""Hankel/SVD subspace identification of damped sinusoids.

Embed the window in a Hankel matrix, truncate its SVD at a relative
singular-value threshold, solve the one-row shift relation of the left
singular block in least squares, and read the poles off the eigenvalues of
that solution. Amplitudes and phases come from the same Vandermonde residue
solve the Prony detector uses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .core import (
    ChannelWindow,
    DetectionResult,
    DetectorConfig,
    InsufficientDataError,
    Mode,
    NumericalDegeneracyError,
    Verdict,
    filter_modes,
)
from .prony import modes_from_poles, pole_to_sigma_omega

# Row fraction for the Hankel embedding; keeps rows > cols.
ROW_FRACTION = 0.6

DEFAULT_TAU = 0.05
# Rank cap: two singular directions per tracked mode, up to 5 modes.
DEFAULT_RANK_CAP = 10


@dataclass(frozen=True)
class HankelDecomposition:
    rows: int
    cols: int
    rank: int
    u_hat: np.ndarray
    singular_values: np.ndarray


def build_hankel(samples) -> np.ndarray:
    """Hankel embedding H[i, j] = x(i+j) with L = ceil(0.6 * count) rows;
    the bottom-right element is the last sample."""
    y = np.ascontiguousarray(samples, dtype=float)
    count = len(y)
    if count < 4:
        raise InsufficientDataError(f"need at least 4 samples, got {count}")
    rows = math.ceil(ROW_FRACTION * count)
    cols = count + 1 - rows
    stride = y.strides[0]
    return as_strided(y, shape=(rows, cols), strides=(stride, stride)).copy()


def truncate_rank(
    hankel: np.ndarray,
    tau: float = DEFAULT_TAU,
    rank_cap: int = DEFAULT_RANK_CAP,
) -> HankelDecomposition:
    """Numerical rank by the relative threshold s_i/s_1 >= tau, capped."""
    if not hankel.any():
        raise NumericalDegeneracyError("all-zero Hankel matrix")
    u, s, _ = np.linalg.svd(hankel, full_matrices=False)
    rows, cols = hankel.shape
    rank = int(np.count_nonzero(s >= tau * s[0]))
    rank = min(rank, rank_cap, rows - 1, cols)
    if rank < 1:
        raise NumericalDegeneracyError("no singular value above threshold")
    return HankelDecomposition(
        rows=rows,
        cols=cols,
        rank=rank,
        u_hat=u[:, :rank],
        singular_values=s[:rank],
    )


def shift_solve(
    decomp: HankelDecomposition, sample_rate: float
) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Least-squares solve of the row-shift relation on the signal subspace.

    u_hat without its first row equals u_hat without its last row times the
    shift matrix; its eigenvalues estimate the poles. Returns the shift
    matrix and the collapsed (sigma, omega) pairs.
    """
    u = decomp.u_hat
    if decomp.rank < 1 or u.shape[0] < decomp.rank + 1:
        raise NumericalDegeneracyError("subspace too small for the shift solve")
    u_down = u[:-1]
    u_up = u[1:]
    if np.linalg.matrix_rank(u_down) < decomp.rank:
        raise NumericalDegeneracyError("rank-deficient shifted subspace")
    z_shift, _, _, _ = np.linalg.lstsq(u_down, u_up, rcond=None)
    eigenvalues = np.linalg.eigvals(z_shift)
    pairs = []
    for z in eigenvalues:
        if z.imag < 0.0 or abs(z) <= 1e-300:
            continue
        sigma, omega = pole_to_sigma_omega(z, sample_rate)
        if omega < 1e-6:
            continue
        pairs.append((sigma, omega))
    pairs.sort(key=lambda p: p[1])
    return z_shift, pairs


def estimate_modes(
    samples,
    sample_rate: float,
    tau: float = DEFAULT_TAU,
    rank_cap: int = DEFAULT_RANK_CAP,
) -> tuple[Mode, ...]:
    """Full subspace chain on an already-normalized sample array."""
    y = np.asarray(samples, dtype=float)
    decomp = truncate_rank(build_hankel(y), tau=tau, rank_cap=rank_cap)
    z_shift, _ = shift_solve(decomp, sample_rate)
    poles = np.linalg.eigvals(z_shift)
    return modes_from_poles(y, poles, sample_rate)


def htls_detect(window: ChannelWindow, config: DetectorConfig) -> DetectionResult:
    """Same contract and mode filtering as the Prony detector."""
    diagnostics: tuple[str, ...] = ()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            modes = estimate_modes(window.samples, window.sample_rate)
        kept = filter_modes(modes, config, window.duration_seconds)
    except (NumericalDegeneracyError, InsufficientDataError, np.linalg.LinAlgError) as exc:
        kept = ()
        diagnostics = (f"htls: {exc}",)
    verdict = Verdict.OSCILLATION if kept else Verdict.NO_OSCILLATION
    return DetectionResult(
        channel_id=window.channel_id,
        start_time=window.start_time,
        verdict=verdict,
        modes=kept,
        detectors_run=frozenset({"htls"}),
        diagnostics=diagnostics,
    )
