"""Pure-Python (numpy) implementations of the hot kernels.

Selected at import time when the compiled extension is unavailable or when
MODEWATCH_PURE_PYTHON is set. Must stay numerically equivalent to
``_native.pyx`` -- agreement is pinned by tests at tight tolerance.
"""

from __future__ import annotations

import numpy as np

NATIVE = False


def longest_repeat_run(samples) -> int:
    """Length of the longest run of consecutive, exactly equal values."""
    y = np.asarray(samples)
    n = len(y)
    if n == 0:
        return 0
    eq = y[1:] == y[:-1]
    if not eq.any():
        return 1
    # Boundaries of equal-runs: pad with False on both ends and diff.
    padded = np.concatenate(([False], eq, [False]))
    changes = np.flatnonzero(padded[1:] != padded[:-1])
    run_lengths = changes[1::2] - changes[0::2]
    return int(run_lengths.max()) + 1


def ekf_filter(samples, re0, im0, omega0, sigma0, p0, q_diag, r, fs):
    """Run the full EKF recursion over one window.

    State layout for L tracked modes (dimension d = 4L):
    [re_0..re_{L-1}, im_0..im_{L-1}, omega_0.., sigma_0..]. The initial
    state refers to the first sample, so step 0 is update-only; every later
    step is predict-then-update. The observation sums the re components.

    Returns (re_traj, im_traj, omega_traj, sigma_traj, innovations,
    p_final, ok) where trajectories are (N, L) arrays of post-update
    states and ok=False flags divergence (non-finite values or a tracked
    frequency leaving (0, inf)).
    """
    y = np.asarray(samples, dtype=float)
    n = len(y)
    L = len(re0)
    d = 4 * L
    x = np.concatenate([
        np.asarray(re0, dtype=float),
        np.asarray(im0, dtype=float),
        np.asarray(omega0, dtype=float),
        np.asarray(sigma0, dtype=float),
    ])
    p = np.array(p0, dtype=float)
    q = np.asarray(q_diag, dtype=float)

    re_traj = np.empty((n, L))
    im_traj = np.empty((n, L))
    omega_traj = np.empty((n, L))
    sigma_traj = np.empty((n, L))
    innovations = np.empty(n)

    h = np.zeros(d)
    h[:L] = 1.0
    eye = np.eye(d)

    for k in range(n):
        if k > 0:
            x, f = _predict_state(x, L, fs)
            p = f @ p @ f.T
            p[np.diag_indices(d)] += q

        nu = y[k] - float(np.sum(x[:L]))
        ph = p @ h
        s = float(h @ ph) + r
        gain = ph / s
        x = x + gain * nu
        a = eye - np.outer(gain, h)
        p = a @ p @ a.T + r * np.outer(gain, gain)
        p = 0.5 * (p + p.T)

        if not (np.all(np.isfinite(x)) and np.isfinite(s) and s > 0.0):
            return re_traj, im_traj, omega_traj, sigma_traj, innovations, p, False
        if np.any(x[2 * L : 3 * L] <= 0.0):
            return re_traj, im_traj, omega_traj, sigma_traj, innovations, p, False

        re_traj[k] = x[:L]
        im_traj[k] = x[L : 2 * L]
        omega_traj[k] = x[2 * L : 3 * L]
        sigma_traj[k] = x[3 * L :]
        innovations[k] = nu

    return re_traj, im_traj, omega_traj, sigma_traj, innovations, p, True


def _predict_state(x, L, fs):
    """One-step transition and its Jacobian.

    Each oscillatory pair rotates by omega/fs and shrinks by
    exp(-sigma/fs); omega and sigma are random-walk states.
    """
    d = 4 * L
    out = x.copy()
    f = np.eye(d)
    for l in range(L):
        re = x[l]
        im = x[L + l]
        omega = x[2 * L + l]
        sigma = x[3 * L + l]
        theta = omega / fs
        decay = np.exp(-sigma / fs)
        c = decay * np.cos(theta)
        s = decay * np.sin(theta)
        re_new = re * c - im * s
        im_new = re * s + im * c
        out[l] = re_new
        out[L + l] = im_new
        f[l, l] = c
        f[l, L + l] = -s
        f[l, 2 * L + l] = -im_new / fs
        f[l, 3 * L + l] = -re_new / fs
        f[L + l, l] = s
        f[L + l, L + l] = c
        f[L + l, 2 * L + l] = re_new / fs
        f[L + l, 3 * L + l] = -im_new / fs
    return out, f
