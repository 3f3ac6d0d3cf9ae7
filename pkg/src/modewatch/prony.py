"""Prony's method: linear-prediction fit, polynomial rooting, residue solve.

The window is modeled as y(k) = sum_i R_i z_i^k. Three steps: least-squares
linear-prediction coefficients, companion-matrix roots for the poles z_i,
then a Vandermonde least-squares solve for the complex residues, which carry
per-mode amplitude and phase.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import lstsq as scipy_lstsq

from .core import (
    DetectionResult,
    DetectorConfig,
    ChannelWindow,
    InsufficientDataError,
    Mode,
    NumericalDegeneracyError,
    Verdict,
    filter_modes,
)

# Angular frequencies below this are treated as non-oscillatory (DC) poles.
OMEGA_FLOOR = 1e-6

MAX_ORDER = 24


def default_order(n_samples: int) -> int:
    """Overdetermined model order: N/4 capped at 24.

    The cap rules for any window of 96+ samples; the N/4 slope only
    matters for short (about one second) windows, where a steeper order
    would fit noise aggressively and flood the first voter with false
    positives. Spurious modes are pruned later by the band/amplitude
    filter.
    """
    return max(1, min(n_samples // 4, MAX_ORDER))


def build_lp_system(samples, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear-prediction system: each sample as a combination of its
    ``order`` predecessors.

    Row r is [y(order-1+r), ..., y(r)], the right-hand side  is
    [y(order), ..., y(N-1)]; shape (N-order) x order.
    """
    y = np.asarray(samples, dtype=float)
    n_samples = len(y)
    if n_samples < 2 * order + 1:
        raise InsufficientDataError(
            f"need at least {2 * order + 1} samples for order {order}, got {n_samples}"
        )
    rows = n_samples - order
    matrix = np.empty((rows, order))
    for c in range(order):
        matrix[:, c] = y[order - 1 - c : order - 1 - c + rows]
    rhs = y[order:]
    return matrix, rhs


# A linear-prediction fit whose relative residual is below this is treated
# as exactly consistent (noiseless data): only then do the extra digits
# from extended-precision refinement and root polishing matter.
CONSISTENT_RESIDUAL = 1e-6


def solve_lp(matrix: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution and its residual norm.

    SVD-based rank-revealing solve. On a near-consistent system one
    extended-precision refinement pass buys back the digits the
    ill-conditioned prediction matrix eats, which the exact-recovery
    guarantees rely on; on noisy data the noise floor dwarfs the solve
    error and the pass is skipped.
    """
    if matrix.size == 0:
        raise NumericalDegeneracyError("empty linear-prediction system")
    if not matrix.any():
        if not np.any(rhs):
            return np.zeros(matrix.shape[1]), 0.0
        raise NumericalDegeneracyError("all-zero coefficient matrix")
    coeffs, _, _, _ = scipy_lstsq(
        matrix, rhs, lapack_driver="gelsy", check_finite=False
    )
    rhs_norm = float(np.linalg.norm(rhs))
    residual = float(np.linalg.norm(matrix @ coeffs - rhs))
    if rhs_norm > 0 and residual < CONSISTENT_RESIDUAL * rhs_norm:
        # Near-consistent system: redo with an SVD pseudoinverse plus one
        # extended-precision refinement pass to reach the accuracy the
        # exact-recovery guarantees need.
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
        cutoff = np.finfo(float).eps * max(matrix.shape) * s[0]
        inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)

        def apply_pinv(vec):
            return vt.T @ (inv_s * (u.T @ vec))

        coeffs = apply_pinv(rhs)
        wide = np.longdouble
        residual_wide = rhs.astype(wide) - matrix.astype(wide) @ coeffs.astype(wide)
        coeffs = coeffs + apply_pinv(residual_wide.astype(float))
        residual = float(np.linalg.norm(matrix @ coeffs - rhs))
    return coeffs, residual


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    for c in coeffs:
        out = out * z + c
    return out


def _polish_roots(poly: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Newton-polish eigenvalue roots in extended precision.

    The eigen solve is limited by the polynomial's root condition number;
    Newton steps in long-double claw back the last digits (1e-8 down to
    about 1e-9 pole error, which residue phases amplify by the window
    length). Each root keeps its polish only if |p(z)| did not grow.
    """
    p = poly.astype(np.clongdouble)
    dp = np.polyder(poly).astype(np.clongdouble)
    z = roots.astype(np.clongdouble)
    for _ in range(3):
        dpz = _horner(dp, z)
        safe = np.abs(dpz) > 0
        z = z - np.where(safe, _horner(p, z) / np.where(safe, dpz, 1.0), 0.0)
    better = np.abs(_horner(p, z)) <= np.abs(_horner(p, roots.astype(np.clongdouble)))
    return np.where(better, z, roots).astype(complex)


def companion_roots(lp_coeffs: np.ndarray, extended_polish: bool = True) -> np.ndarray:
    """Roots of z^n - (a_1 z^{n-1} + ... + a_n) via companion-matrix
    eigenvalues. Zero roots (log singularity downstream) are discarded.

    ``extended_polish`` adds a long-double Newton polish; worthwhile only
    when the coefficients came from noiseless data (the eigenvalues' 1e-8
    accuracy already sits far below any noise floor).
    """
    a = np.asarray(lp_coeffs, dtype=float)
    poly = np.concatenate(([1.0], -a))
    roots = np.roots(poly)
    if len(roots) and extended_polish:
        roots = _polish_roots(poly, roots)
    nonzero = np.abs(roots) > 1e-300
    if not np.all(nonzero):
        warnings.warn("discarding zero pole(s) from linear-prediction polynomial")
        roots = roots[nonzero]
    return roots


def pole_to_sigma_omega(z: complex, sample_rate: float) -> tuple[float, float]:
    """Continuous-time (sigma, omega) of one discrete pole, principal branch."""
    lam = np.log(complex(z)) * sample_rate
    return -lam.real, abs(lam.imag)


def roots_to_modes(lp_coeffs, sample_rate: float) -> list[tuple[float, float]]:
    """(sigma, omega) pairs for the oscillatory poles, one per conjugate
    pair; real poles (omega below the floor) are dropped."""
    roots = companion_roots(np.asarray(lp_coeffs, dtype=float))
    out = []
    for z in roots:
        if z.imag < 0.0:
            continue
        sigma, omega = pole_to_sigma_omega(z, sample_rate)
        if omega < OMEGA_FLOOR:
            continue
        out.append((sigma, omega))
    out.sort(key=lambda p: p[1])
    return out


def solve_residues(samples, poles) -> np.ndarray:
    """Least-squares Vandermonde solve for the complex residues R_i.

    ``poles`` is the full pole set (conjugates included). Near-coincident
    poles make the system ill-conditioned; that is reported as a warning
    with the condition number, not an error.
    """
    y = np.asarray(samples, dtype=float)
    z = np.asarray(poles, dtype=complex)
    if len(z) == 0:
        raise ValueError("poles must be nonempty")
    vander = _vandermonde(z, len(y))
    if len(z) > 1:
        diffs = np.abs(z[:, None] - z[None, :])
        diffs[np.diag_indices(len(z))] = np.inf
        if diffs.min() < 1e-9:
            warnings.warn(
                f"near-coincident poles (min separation {diffs.min():.3e}); "
                f"Vandermonde condition number {np.linalg.cond(vander):.3e}"
            )
    # Normal equations are the fast least-squares route here (the basis is
    # mildly conditioned for distinct poles); fall back to an orthogonal
    # solve when they go numerically bad.
    gram = vander.conj().T @ vander
    rhs_c = vander.conj().T @ y
    try:
        residues = np.linalg.solve(gram, rhs_c)
        check = float(np.linalg.norm(gram @ residues - rhs_c))
        if not np.all(np.isfinite(residues)) or check > 1e-8 * (
            float(np.linalg.norm(rhs_c)) + 1e-300
        ):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        residues, _, _, _ = scipy_lstsq(
            vander, y.astype(complex), lapack_driver="gelsy", check_finite=False
        )
    return residues


def _vandermonde(z: np.ndarray, n_rows: int) -> np.ndarray:
    """Columns z_i^k for k = 0..n_rows-1, built by cumulative products
    (much cheaper than broadcast exponentiation)."""
    vander = np.empty((n_rows, len(z)), dtype=complex)
    vander[0] = 1.0
    for k in range(1, n_rows):
        np.multiply(vander[k - 1], z, out=vander[k])
    return vander


def modes_from_poles(samples, poles, sample_rate: float) -> tuple[Mode, ...]:
    """Oscillatory modes with amplitude/phase from the residue solve.

    For a real signal the poles come in conjugate pairs; each pair collapses
    to one mode with amplitude 2|R| and phase arg(R).
    """
    z = np.asarray(poles, dtype=complex)
    keep = np.abs(z) > 1e-300
    z = z[keep]
    if len(z) == 0:
        return ()
    residues = solve_residues(samples, z)
    modes = []
    for zi, ri in zip(z, residues):
        if zi.imag < 0.0:
            continue
        sigma, omega = pole_to_sigma_omega(zi, sample_rate)
        if omega < OMEGA_FLOOR:
            continue
        pair_factor = 2.0 if zi.imag > 0.0 else 1.0
        amplitude = pair_factor * abs(ri)
        phase = float(np.angle(ri))
        modes.append(Mode(amplitude, sigma, omega, phase))
    modes.sort(key=lambda m: m.angular_frequency)
    return tuple(modes)


def estimate_modes(samples, sample_rate: float, order: int | None = None) -> tuple[Mode, ...]:
    """Full Prony chain on an already-normalized sample array."""
    y = np.asarray(samples, dtype=float)
    if order is None:
        order = default_order(len(y))
    matrix, rhs = build_lp_system(y, order)
    coeffs, residual = solve_lp(matrix, rhs)
    rhs_norm = float(np.linalg.norm(rhs))
    consistent = rhs_norm > 0 and residual < CONSISTENT_RESIDUAL * rhs_norm
    poles = companion_roots(coeffs, extended_polish=consistent)
    if len(poles) == 0:
        return ()
    return modes_from_poles(y, poles, sample_rate)


def prony_detect(window: ChannelWindow, config: DetectorConfig) -> DetectionResult:
    """Detector verdict for one normalized, quality-ok window.

    Numerical failures degrade to a no-oscillation verdict with a
    diagnostic; they never propagate out of the detector.
    """
    diagnostics: tuple[str, ...] = ()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            modes = estimate_modes(window.samples, window.sample_rate)
        kept = filter_modes(modes, config, window.duration_seconds)
    except (NumericalDegeneracyError, InsufficientDataError, np.linalg.LinAlgError) as exc:
        kept = ()
        diagnostics = (f"prony: {exc}",)
    verdict = Verdict.OSCILLATION if kept else Verdict.NO_OSCILLATION
    return DetectionResult(
        channel_id=window.channel_id,
        start_time=window.start_time,
        verdict=verdict,
        modes=kept,
        detectors_run=frozenset({"prony"}),
        diagnostics=diagnostics,
    )
