"""Independent numeric oracles for the test-suite.

Everything here works on plain numpy callables and finite differences; none
of it touches the symbolic engine, so agreement with the package is a real
two-route check.
"""

from __future__ import annotations

import numpy as np

STENCIL = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


def fd_partial(fun, p, axis, h=1e-4):
    """Five-point central difference of ``fun`` (any array-valued callable) along ``axis``."""
    p = np.asarray(p, dtype=float)
    acc = 0.0
    for k, w in STENCIL:
        q = p.copy()
        q[axis] += k * h
        acc = acc + w * np.asarray(fun(q), dtype=float)
    return acc / h


def fd_gradient(fun, p, h=1e-4):
    """``out[..., i] = d fun / dx^i`` for an array-valued callable."""
    return np.stack([fd_partial(fun, p, i, h) for i in range(3)], axis=-1)


def fd_bracket(X, Y, p, h=1e-4):
    """``[X, Y]^j = X^i d_i Y^j - Y^i d_i X^j`` for vector-valued callables."""
    dX = fd_gradient(X, p, h)  # dX[j, i] = d_i X^j
    dY = fd_gradient(Y, p, h)
    return dY @ X(p) - dX @ Y(p)


def frame_metric(rows):
    """Metric making the rows of a numeric B-matrix function orthonormal: ``W W^T``."""

    def g(p):
        W = np.linalg.inv(np.asarray(rows(p), dtype=float))
        return W @ W.T

    return g


def christoffel_fd(g, p, h=1e-4):
    """``Gamma[k, i, j]`` from finite differences of a numeric metric function."""
    G = np.asarray(g(p), dtype=float)
    dG = fd_gradient(g, p, h)  # dG[i, j, l] = d_l g_ij
    Ginv = np.linalg.inv(G)
    low = 0.5 * (np.einsum("jli->ijl", dG) + np.einsum("ilj->ijl", dG) - dG)
    return np.einsum("kl,ijl->kij", Ginv, low)


def covariant(g, X, Y, p, h=1e-4):
    """``nabla_X Y`` at ``p`` for numeric vector fields and metric."""
    Gam = christoffel_fd(g, p, h)
    x, y = X(p), Y(p)
    dY = fd_gradient(Y, p, h)
    return dY @ x + np.einsum("kij,i,j->k", Gam, x, y)


# --- the worked example with K = 1, in closed form


def ex_rows(p):
    x1, x2, _ = p
    return np.array([[0.0, x2, 0.0], [1.0, x1, -1.0 / x2**2], [1.0, 0.0, 0.0]])


def ex_e1(p):
    return ex_rows(p)[0]


def ex_e2(p):
    return ex_rows(p)[1]


def ex_e3(p):
    return ex_rows(p)[2]


ex_metric = frame_metric(ex_rows)


def ex_zeta(x2, K=1.0):
    return -1.0 / (np.asarray(x2, dtype=float) ** 2 * K)


def ex_scalar_reference(x2):
    return -10.0 - (1.0 + 8.0 * x2) / (2.0 * x2**2)


def scalar_curvature_fd(g, p, h=1e-3):
    """Scalar curvature by nested finite differences of a numeric metric (round sphere gives +6)."""
    p = np.asarray(p, dtype=float)
    Gam = christoffel_fd(g, p)
    dGam = np.stack([fd_partial(lambda q: christoffel_fd(g, q), p, i, h) for i in range(3)])  # [i, l, j, k]
    R = (np.einsum("iljk->lijk", dGam) - np.einsum("jlik->lijk", dGam)
         + np.einsum("lim,mjk->lijk", Gam, Gam) - np.einsum("ljm,mik->lijk", Gam, Gam))
    ricci = np.einsum("iijk->jk", R)
    return float(np.einsum("jk,jk->", np.linalg.inv(g(p)), ricci))


def sphere_metric(p):
    s1, s2 = np.sin(p[0]), np.sin(p[1])
    return np.diag([1.0, s1**2, s1**2 * s2**2])
