# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``_pure``.

Same contracts and state layout; the EKF recursion is the only per-sample
sequential loop in the pipeline, so it is the part worth compiling.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, isfinite, sin

cnp.import_array()

NATIVE = True


def longest_repeat_run(samples):
    """Length of the longest run of consecutive, exactly equal values."""
    cdef const double[::1] y = np.ascontiguousarray(samples, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    if n == 0:
        return 0
    cdef Py_ssize_t best = 1, run = 1, k
    for k in range(1, n):
        if y[k] == y[k - 1]:
            run += 1
            if run > best:
                best = run
        else:
            run = 1
    return int(best)


def ekf_filter(samples, re0, im0, omega0, sigma0, p0, q_diag, r, fs):
    """Full EKF recursion over one window; see ``_pure.ekf_filter``."""
    cdef const double[::1] y = np.ascontiguousarray(samples, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t L = len(re0)
    cdef Py_ssize_t d = 4 * L

    x_arr = np.concatenate([
        np.asarray(re0, dtype=np.float64),
        np.asarray(im0, dtype=np.float64),
        np.asarray(omega0, dtype=np.float64),
        np.asarray(sigma0, dtype=np.float64),
    ])
    p_arr = np.array(p0, dtype=np.float64, order="C")
    q_arr = np.ascontiguousarray(q_diag, dtype=np.float64)

    re_traj = np.empty((n, L))
    im_traj = np.empty((n, L))
    omega_traj = np.empty((n, L))
    sigma_traj = np.empty((n, L))
    innovations = np.empty(n)

    cdef double[::1] x = x_arr
    cdef double[:, ::1] p = p_arr
    cdef double[::1] q = q_arr
    cdef double[:, ::1] re_v = re_traj
    cdef double[:, ::1] im_v = im_traj
    cdef double[:, ::1] om_v = omega_traj
    cdef double[:, ::1] sg_v = sigma_traj
    cdef double[::1] nu_v = innovations

    f_arr = np.zeros((d, d))
    tmp_arr = np.zeros((d, d))
    a_arr = np.zeros((d, d))
    gain_arr = np.zeros(d)
    cdef double[:, ::1] f = f_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] a = a_arr
    cdef double[::1] gain = gain_arr

    cdef double rr = float(r)
    cdef double fsd = float(fs)
    cdef Py_ssize_t k, i, j, l
    cdef double theta, decay, c, s, re_new, im_new
    cdef double yhat, nu, sv, acc, half
    cdef bint ok = True

    with nogil:
        for k in range(n):
            if k > 0:
                # Transition: rotate and shrink each oscillatory pair.
                for i in range(d):
                    for j in range(d):
                        f[i, j] = 0.0
                    f[i, i] = 1.0
                for l in range(L):
                    theta = x[2 * L + l] / fsd
                    decay = exp(-x[3 * L + l] / fsd)
                    c = decay * cos(theta)
                    s = decay * sin(theta)
                    re_new = x[l] * c - x[L + l] * s
                    im_new = x[l] * s + x[L + l] * c
                    f[l, l] = c
                    f[l, L + l] = -s
                    f[l, 2 * L + l] = -im_new / fsd
                    f[l, 3 * L + l] = -re_new / fsd
                    f[L + l, l] = s
                    f[L + l, L + l] = c
                    f[L + l, 2 * L + l] = re_new / fsd
                    f[L + l, 3 * L + l] = -im_new / fsd
                    x[l] = re_new
                    x[L + l] = im_new
                # P <- F P F^T + diag(q)
                for i in range(d):
                    for j in range(d):
                        acc = 0.0
                        for l in range(d):
                            acc += f[i, l] * p[l, j]
                        tmp[i, j] = acc
                for i in range(d):
                    for j in range(d):
                        acc = 0.0
                        for l in range(d):
                            acc += tmp[i, l] * f[j, l]
                        p[i, j] = acc
                    p[i, i] += q[i]

            yhat = 0.0
            for l in range(L):
                yhat += x[l]
            nu = y[k] - yhat

            # gain = P h / (h P h + r), h = sum of re components
            sv = rr
            for i in range(d):
                acc = 0.0
                for l in range(L):
                    acc += p[i, l]
                gain[i] = acc
            for l in range(L):
                sv += gain[l]
            if not (isfinite(sv) and sv > 0.0):
                ok = False
                break
            for i in range(d):
                gain[i] = gain[i] / sv
                x[i] = x[i] + gain[i] * nu

            # Joseph form: P <- A P A^T + r g g^T with A = I - g h^T
            for i in range(d):
                for j in range(d):
                    a[i, j] = -gain[i] if j < L else 0.0
                a[i, i] += 1.0
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += a[i, l] * p[l, j]
                    tmp[i, j] = acc
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += tmp[i, l] * a[j, l]
                    p[i, j] = acc + rr * gain[i] * gain[j]
            for i in range(d):
                for j in range(i + 1, d):
                    half = 0.5 * (p[i, j] + p[j, i])
                    p[i, j] = half
                    p[j, i] = half

            for i in range(d):
                if not isfinite(x[i]):
                    ok = False
                    break
            if not ok:
                break
            for l in range(L):
                if x[2 * L + l] <= 0.0:
                    ok = False
                    break
            if not ok:
                break

            for l in range(L):
                re_v[k, l] = x[l]
                im_v[k, l] = x[L + l]
                om_v[k, l] = x[2 * L + l]
                sg_v[k, l] = x[3 * L + l]
            nu_v[k] = nu

    return re_traj, im_traj, omega_traj, sigma_traj, innovations, p_arr, bool(ok)
