"""Independent numerical oracles: finite differences of the metric values only."""

import math

import numpy as np

_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFF = (-2, -1, 0, 1, 2)


def fd(func, x, k, h):
    """Fourth-order central derivative of ``func`` along coordinate k."""
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[k] = h
    return sum(w * np.asarray(func(x + o * e)) for w, o in zip(_W1, _OFF) if w) / h


def fd_christoffel(model, x, h=1e-3):
    """Gamma^k_ij from finite differences of g."""
    n = model.n
    dg = np.array([fd(model.metric_matrix, x, k, h) for k in range(n)])  # [k, i, j]
    gi = np.linalg.inv(model.metric_matrix(x))
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", gi, low)


def fd_riemann(model, x, h=2e-3):
    """R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik."""
    n = model.n
    G = fd_christoffel(model, x)
    dG = np.array([fd(lambda y: fd_christoffel(model, y), x, m, h) for m in range(n)])  # [m, l, i, j]
    R = (np.einsum("iljk->lkij", dG) - np.einsum("jlik->lkij", dG)
         + np.einsum("lim,mjk->lkij", G, G) - np.einsum("ljm,mik->lkij", G, G))
    return R


def fd_ricci(model, x):
    return np.einsum("ikij->jk", fd_riemann(model, x))


def fd_hessian(func, x, h=1e-3):
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.empty((n, n))
    for a in range(n):
        H[a] = fd(lambda y: np.array([fd(func, y, b, h) for b in range(n)]), x, a, h)
    return 0.5 * (H + H.T)


def fd_box(model, func, x):
    """Wave operator g^{ij}(d_i d_j u - Gamma^k_ij d_k u) from finite differences."""
    n = model.n
    grad = np.array([fd(func, x, k, 1e-3) for k in range(n)])
    H = fd_hessian(func, x)
    gi = np.linalg.inv(model.metric_matrix(x))
    G = fd_christoffel(model, x)
    return float(np.sum(gi * (H - np.einsum("kij,k->ij", G, grad)))), grad


def simpson(func, a, b, m=2000):
    """Composite Simpson rule (m even)."""
    xs = np.linspace(a, b, m + 1)
    ys = np.array([func(x) for x in xs])
    return (b - a) / (3 * m) * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-1:2].sum())


def weighted_length_affine(a, alpha, t):
    """int_0^t exp(-2 a tau / alpha) d tau for f = a t along a unit-speed comoving line."""
    c = 2.0 * a / alpha
    return (1.0 - math.exp(-c * t)) / c
