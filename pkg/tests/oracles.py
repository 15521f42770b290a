"""Independent reference computations used by the tests.

Nothing here imports the package's numerical routines; each oracle is a
separate derivation (closed form, brute force, or a different rule).
"""

import math

import numpy as np


def bound_t1(L, F, A1, A2, A3, n_c, delta_c, n, norm_x):
    eig = 0.0 if n_c == 0 else math.pi * n_c / delta_c
    return L * F ** (L - 1) * math.sqrt(A1) * (A2 + eig) / math.sqrt(n) * norm_x \
        + A3 / math.sqrt(3) / math.sqrt(n)


def bound_t2(L, F, A1, A2, A3, n_c, delta_c, n1, n2, norm_x):
    s = 1 / math.sqrt(n1) + 1 / math.sqrt(n2)
    eig = 0.0 if n_c == 0 else math.pi * n_c / delta_c
    return L * F ** (L - 1) * math.sqrt(A1) * (A2 + eig) * s * norm_x + A3 / math.sqrt(3) * s


def product_kernel_step_distance(n):
    """||uv - W_n|| by a per-cell Gauss rule that is exact for the degree-4 integrand."""
    x, w = np.polynomial.legendre.leggauss(3)
    x, w = (x + 1) / (2 * n), w / (2 * n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            a, b = i / n, j / n
            u, v = a + x[:, None], b + x[None, :]
            total += np.sum(w[:, None] * w[None, :] * (u * v - a * b) ** 2)
    return math.sqrt(total)


def linear_signal_step_distance(n):
    """||u - X_n|| = 1 / (n sqrt(3)) for left-endpoint sampling."""
    return 1.0 / (n * math.sqrt(3))


def min_kernel_eigenvalues(k):
    return np.array([1.0 / ((j - 0.5) ** 2 * math.pi ** 2) for j in range(1, k + 1)])


def folded_normal_std(sigma):
    return sigma * math.sqrt(1 - 2 / math.pi)


def step_l2_bruteforce(a, b, samples=1 << 14):
    """Midpoint rule on a grid fine enough to be exact for dyadic step signals."""
    u = (np.arange(samples) + 0.5) / samples
    va = np.asarray(a)[np.floor(u * len(a)).astype(int)]
    vb = np.asarray(b)[np.floor(u * len(b)).astype(int)]
    return math.sqrt(np.mean((va - vb) ** 2))


def central_difference(fun, theta, rel_step=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        h = rel_step * max(1.0, abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g
