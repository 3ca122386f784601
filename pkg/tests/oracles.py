"""Literal nested-loop transcriptions used as independent oracles."""

import numpy as np


def win(a, b):
    """1 if a < b, 1/2 on ties, 0 otherwise."""
    return 1.0 if a < b else 0.5 if a == b else 0.0


def theta_loop(x, y):
    nx, T, K = x.shape
    ny = y.shape[0]
    out = np.zeros((T, K))
    for t in range(T):
        for k in range(K):
            s = 0.0
            for i in range(nx):
                for j in range(ny):
                    s += 2.0 * win(x[i, t, k], y[j, t, k]) - 1.0
            out[t, k] = s / (nx * ny)
    return out


def _control_placement(x, y, i, t, k):
    return sum(win(y[j, t, k], x[i, t, k]) for j in range(y.shape[0])) / y.shape[0]


def _dose_placement(x, y, j, t, k):
    return sum(win(x[i, t, k], y[j, t, k]) for i in range(x.shape[0])) / x.shape[0]


def c_loop(x, y):
    nx, T, K = x.shape
    th = theta_loop(x, y)
    out = np.zeros((T, K, T, K))
    for t1 in range(T):
        for k1 in range(K):
            for t2 in range(T):
                for k2 in range(K):
                    s = 0.0
                    for i in range(nx):
                        a = _control_placement(x, y, i, t1, k1) - (1 - th[t1, k1]) / 2
                        b = _control_placement(x, y, i, t2, k2) - (1 - th[t2, k2]) / 2
                        s += a * b
                    out[t1, k1, t2, k2] = s / nx
    return out


def d_loop(x, y):
    ny, T, K = y.shape
    th = theta_loop(x, y)
    out = np.zeros((T, K, T, K))
    for t1 in range(T):
        for k1 in range(K):
            for t2 in range(T):
                for k2 in range(K):
                    s = 0.0
                    for j in range(ny):
                        a = _dose_placement(x, y, j, t1, k1) - (1 + th[t1, k1]) / 2
                        b = _dose_placement(x, y, j, t2, k2) - (1 + th[t2, k2]) / 2
                        s += a * b
                    out[t1, k1, t2, k2] = s / ny
    return out


def c_cross_loop(x, y, z):
    nx, T, K = x.shape
    ty, tz = theta_loop(x, y), theta_loop(x, z)
    out = np.zeros((T, K, T, K))
    for t1 in range(T):
        for k1 in range(K):
            for t2 in range(T):
                for k2 in range(K):
                    s = 0.0
                    for i in range(nx):
                        a = _control_placement(x, y, i, t1, k1) - (1 - ty[t1, k1]) / 2
                        b = _control_placement(x, z, i, t2, k2) - (1 - tz[t2, k2]) / 2
                        s += a * b
                    out[t1, k1, t2, k2] = s / nx
    return out


def random_small_arrays(rng, n_arms, ties):
    """Arrays with n <= 5, T <= 3, K <= 2."""
    T, K = rng.integers(1, 4), rng.integers(1, 3)
    if ties:
        return [rng.integers(0, 3, (rng.integers(1, 6), T, K)).astype(float) for _ in range(n_arms)]
    return [rng.standard_normal((rng.integers(1, 6), T, K)) for _ in range(n_arms)]
