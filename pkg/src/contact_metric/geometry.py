"""Levi-Civita connection, connection relations of a phi-eigenbasis, and curvature.

Curvature conventions: ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``,
``R^l_ijk`` is the ``d_l`` component of ``R(d_i, d_j) d_k``, ``R_ijkl = g(R(d_i, d_j) d_k, d_l)``,
``Ric_jk = R^i_ijk`` and the sectional curvature is
``K(X, Y) = g(R(X, Y)Y, X) / (|X|^2 |Y|^2 - g(X, Y)^2)``, which is ``+1`` on the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrix
from .expr_dsl import as_field, differentiate, evaluate_many
from .frames import evaluate_matrix, vector
from .structure_builder import ContactStructure, MetricField, frame_invariants

__all__ = [
    "ChristoffelAtPoint",
    "CurvatureReport",
    "LemmaReport",
    "christoffel",
    "christoffel_fd",
    "covariant_derivative_field",
    "verify_lemma_aux1",
    "nabla_xi_residual",
    "curvature",
]

#: determinant of g at or below this is treated as singular
SINGULAR_TOL = 1e-14


def _points(p):
    P = np.asarray(p, dtype=float)
    return P.reshape(-1, 3), P.shape[:-1]


def _metric_jets(g: MetricField, X, second: bool):
    """``G[n,i,j]``, ``dG[n,k,i,j] = d_k g_ij`` and optionally ``ddG[n,k,m,i,j]``."""
    fields = [g[i, j] for i in range(3) for j in range(3)]
    first = [differentiate(f, k) for k in (1, 2, 3) for f in fields]
    allf = fields + first
    if second:
        allf += [differentiate(d, m) for d in first[:] for m in (1, 2, 3)]
    vals = np.moveaxis(evaluate_many(allf, X), 0, -1)
    n = X.shape[0]
    G = vals[:, :9].reshape(n, 3, 3)
    dG = vals[:, 9:36].reshape(n, 3, 3, 3)
    ddG = None
    if second:
        # ordering: (k, i, j) outer, m inner
        ddG = vals[:, 36:].reshape(n, 3, 3, 3, 3).transpose(0, 1, 4, 2, 3)
    return G, dG, ddG


def _inverse_metric(G, X):
    det = np.linalg.det(G)
    if np.any(det <= SINGULAR_TOL):
        k = int(np.argmax(det <= SINGULAR_TOL))
        raise SingularMatrix("metric is singular", X[k], determinant=float(det[k]))
    return np.linalg.inv(G)


def _gamma_from(Ginv, dG):
    # A[l,i,j] = d_i g_jl + d_j g_il - d_l g_ij
    A = np.einsum("...ijl->...lij", dG) + np.einsum("...jil->...lij", dG) - dG
    return 0.5 * np.einsum("...kl,...lij->...kij", Ginv, A), A


@dataclass
class ChristoffelAtPoint:
    """``gamma[..., k, i, j] = Gamma^k_ij`` with residuals of its defining identities."""

    gamma: np.ndarray
    compatibility: np.ndarray
    torsion: np.ndarray

    def __getitem__(self, index):
        return self.gamma[index]


def christoffel(g: MetricField, p) -> ChristoffelAtPoint:
    """``Gamma^k_ij = (1/2) g^kl (d_i g_jl + d_j g_il - d_l g_ij)`` with symbolic ``d g``."""
    X, lead = _points(p)
    G, dG, _ = _metric_jets(g, X, second=False)
    Ginv = _inverse_metric(G, X)
    gamma, _ = _gamma_from(Ginv, dG)
    # d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
    compat = dG - np.einsum("...lki,...lj->...kij", gamma, G) - np.einsum("...lkj,...il->...kij", gamma, G)
    torsion = gamma - np.swapaxes(gamma, -1, -2)
    return ChristoffelAtPoint(
        gamma.reshape(lead + (3, 3, 3)),
        np.max(np.abs(compat).reshape(len(X), -1), axis=1).reshape(lead),
        np.max(np.abs(torsion).reshape(len(X), -1), axis=1).reshape(lead),
    )


def christoffel_fd(g: MetricField, p, h: float = 1e-4) -> np.ndarray:
    """Christoffel symbols from 4th-order central differences of the evaluated metric."""
    X, lead = _points(p)
    dG = np.empty((len(X), 3, 3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        Gp2, Gp1, Gm1, Gm2 = (g.evaluate(X + s * e) for s in (2, 1, -1, -2))
        dG[:, k] = (-Gp2 + 8 * Gp1 - 8 * Gm1 + Gm2) / (12 * h)
    Ginv = _inverse_metric(g.evaluate(X), X)
    gamma, _ = _gamma_from(Ginv, dG)
    return gamma.reshape(lead + (3, 3, 3))


def covariant_derivative_field(g: MetricField, X, Y, p) -> np.ndarray:
    """``(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j`` at the points."""
    X, Y = vector(X), vector(Y)
    P, lead = _points(p)
    dY = [differentiate(Y[k], i + 1) for k in range(3) for i in range(3)]
    vals = np.moveaxis(evaluate_many(list(X) + list(Y) + dY, P), 0, -1)
    Xv, Yv = vals[:, 0:3], vals[:, 3:6]
    DY = vals[:, 6:].reshape(-1, 3, 3)  # DY[n, k, i] = d_i Y^k
    gamma = christoffel(g, P).gamma
    out = np.einsum("ni,nki->nk", Xv, DY) + np.einsum("nkij,ni,nj->nk", gamma, Xv, Yv)
    return out.reshape(lead + (3,))


def _frame_connection(structure: ContactStructure, P):
    """``N[n, a, b, k]``: coordinate components of ``nabla_{e_a} e_b``."""
    rows = structure.frame.matrix
    flat = [f for row in rows for f in row] + [differentiate(f, i + 1) for row in rows for f in row for i in range(3)]
    vals = np.moveaxis(evaluate_many(flat, P), 0, -1)
    E = vals[:, :9].reshape(-1, 3, 3)  # E[n, a, k] = e_a^k
    DE = vals[:, 9:].reshape(-1, 3, 3, 3)  # DE[n, b, k, i] = d_i e_b^k
    gamma = christoffel(structure.g, P).gamma
    N = np.einsum("nai,nbki->nabk", E, DE) + np.einsum("nkij,nai,nbj->nabk", gamma, E, E)
    return E, N


def _g_norm(G, v):
    return np.sqrt(np.abs(np.einsum("...i,...ij,...j->...", v, G, v)))


AUX1_NAMES = (
    "nabla_e_e",
    "nabla_e_phie",
    "nabla_e_xi",
    "nabla_phie_e",
    "nabla_phie_phie",
    "nabla_phie_xi",
    "nabla_xi_e",
    "nabla_xi_phie",
)


@dataclass
class LemmaReport:
    """g-norm residuals of the eight connection relations of a phi-eigenbasis."""

    residuals: dict
    a_from_connection: np.ndarray
    minus_lambda_plus_one: np.ndarray
    xi_geodesic: np.ndarray
    tol: float

    @property
    def maxima(self) -> dict:
        out = {k: float(np.max(v)) for k, v in self.residuals.items()}
        out["nabla_xi_xi"] = float(np.max(self.xi_geodesic))
        return out

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.maxima.values())


def verify_lemma_aux1(structure: ContactStructure, p, tol: float = 1e-7) -> LemmaReport:
    """Check the covariant derivatives of ``(e, phi e, xi) = (e1, e2, e3)``.

    With ``lambda, a, b, c`` from :func:`frame_invariants`::

        nabla_e e = b phi e          nabla_e phi e = -b e + (lambda+1) xi
        nabla_e xi = -(lambda+1) phi e
        nabla_phie e = -c phi e + (lambda-1) xi
        nabla_phie phie = c e        nabla_phie xi = (1-lambda) e
        nabla_xi e = a phi e         nabla_xi phi e = -a e
    """
    P, lead = _points(p)
    inv = frame_invariants(structure, P)
    lam, a, b, c = inv.lam, inv.a, inv.b, inv.c
    E, N = _frame_connection(structure, P)
    G = structure.g.evaluate(P)
    e, pe, xi = E[:, 0], E[:, 1], E[:, 2]
    col = lambda s: s[:, None]
    expected = {
        "nabla_e_e": (N[:, 0, 0], col(b) * pe),
        "nabla_e_phie": (N[:, 0, 1], -col(b) * e + col(lam + 1) * xi),
        "nabla_e_xi": (N[:, 0, 2], -col(lam + 1) * pe),
        "nabla_phie_e": (N[:, 1, 0], -col(c) * pe + col(lam - 1) * xi),
        "nabla_phie_phie": (N[:, 1, 1], col(c) * e),
        "nabla_phie_xi": (N[:, 1, 2], col(1 - lam) * e),
        "nabla_xi_e": (N[:, 2, 0], col(a) * pe),
        "nabla_xi_phie": (N[:, 2, 1], -col(a) * e),
    }
    residuals = {k: _g_norm(G, lhs - rhs).reshape(lead) for k, (lhs, rhs) in expected.items()}
    g_of = lambda u, v: np.einsum("ni,nij,nj->n", u, G, v)
    return LemmaReport(
        residuals=residuals,
        a_from_connection=g_of(N[:, 2, 0], pe).reshape(lead),
        minus_lambda_plus_one=g_of(N[:, 0, 2], pe).reshape(lead),
        xi_geodesic=_g_norm(G, N[:, 2, 2]).reshape(lead),
        tol=tol,
    )


def nabla_xi_residual(structure: ContactStructure, p, with_h: bool = True) -> np.ndarray:
    """Max over coordinate ``X`` of the g-norm of ``nabla_X xi + phi X (+ phi h X)``."""
    P, lead = _points(p)
    xi = structure.xi
    dxi = [differentiate(xi[k], j + 1) for k in range(3) for j in range(3)]
    flat = list(xi) + dxi + [f for row in structure.phi for f in row]
    if with_h:
        flat += [f for row in structure.h for f in row]
    vals = np.moveaxis(evaluate_many(flat, P), 0, -1)
    Xi = vals[:, 0:3]
    D = vals[:, 3:12].reshape(-1, 3, 3)  # D[n, k, j] = d_j xi^k
    phi = vals[:, 12:21].reshape(-1, 3, 3)
    gamma = christoffel(structure.g, P).gamma
    nabla = D + np.einsum("nkji,ni->nkj", gamma, Xi)  # column j: nabla_{d_j} xi
    M = nabla + phi
    if with_h:
        h = vals[:, 21:30].reshape(-1, 3, 3)
        M = M + phi @ h
    G = structure.g.evaluate(P)
    norms = np.sqrt(np.abs(np.einsum("nkj,nkl,nlj->nj", M, G, M)))
    return np.max(norms, axis=1).reshape(lead)


@dataclass
class CurvatureReport:
    """Curvature at each point; arrays share the leading shape of the points."""

    scalar: np.ndarray
    ricci: np.ndarray
    xi_sectional: np.ndarray
    xi_sectional_phi: np.ndarray
    phi_sectional: np.ndarray
    scalar_fd: np.ndarray
    route_delta: np.ndarray
    symmetry_residual: np.ndarray
    reference: np.ndarray | None = None
    reference_deviation: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _riemann(gamma, dgamma):
    """``R^l_ijk`` from ``gamma[...,l,j,k]`` and ``dgamma[...,i,l,j,k] = d_i Gamma^l_jk``."""
    t1 = np.einsum("...iljk->...lijk", dgamma)
    t2 = np.einsum("...jlik->...lijk", dgamma)
    t3 = np.einsum("...lim,...mjk->...lijk", gamma, gamma)
    t4 = np.einsum("...ljm,...mik->...lijk", gamma, gamma)
    return t1 - t2 + t3 - t4


def _contractions(R, G, Ginv):
    ricci = np.einsum("...iijk->...jk", R)
    scalar = np.einsum("...jk,...jk->...", Ginv, ricci)
    return ricci, scalar


def _sectional(Rlow, G, X, Y):
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", Rlow, X, Y, Y, X)
    gxx = np.einsum("...i,...ij,...j->...", X, G, X)
    gyy = np.einsum("...i,...ij,...j->...", Y, G, Y)
    gxy = np.einsum("...i,...ij,...j->...", X, G, Y)
    return num / (gxx * gyy - gxy ** 2)


def curvature(g: MetricField, structure: ContactStructure | None, p, reference=None,
              h: float = 1e-4) -> CurvatureReport:
    """Riemann, Ricci, scalar and frame-plane sectional curvatures.

    ``d Gamma`` comes from symbolic second derivatives of ``g``.  The
    independent route differentiates symbolic Christoffels at ``p +- h``,
    ``p +- 2h`` by the 5-point central stencil; ``route_delta`` is the scalar-curvature gap.
    ``reference`` is an optional expression for the scalar curvature that is
    evaluated and compared, never used as a check.
    """
    X, lead = _points(p)
    G, dG, ddG = _metric_jets(g, X, second=True)
    Ginv = _inverse_metric(G, X)
    gamma, A = _gamma_from(Ginv, dG)
    # d_m Gamma = 1/2 (d_m g^-1) A + 1/2 g^-1 d_m A,  d_m g^-1 = -g^-1 (d_m g) g^-1
    dA = (np.einsum("...mijl->...mlij", ddG) + np.einsum("...mjil->...mlij", ddG) - ddG)
    dGinv = -np.einsum("...ka,...mab,...bl->...mkl", Ginv, dG, Ginv)
    dgamma = 0.5 * (np.einsum("...mkl,...lij->...mkij", dGinv, A) + np.einsum("...kl,...mlij->...mkij", Ginv, dA))
    R = _riemann(gamma, dgamma)
    ricci, scalar = _contractions(R, G, Ginv)
    Rlow = np.einsum("...lm,...mijk->...ijkl", G, R)

    sym = np.max(
        np.abs(
            np.stack(
                [
                    Rlow + np.swapaxes(Rlow, -4, -3),
                    Rlow + np.swapaxes(Rlow, -2, -1),
                    Rlow - np.einsum("...klij->...ijkl", Rlow),
                ]
            )
        ).reshape(3, len(X), -1),
        axis=(0, 2),
    )

    # finite-difference route
    dgamma_fd = np.empty_like(dgamma)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        gp2, gp1, gm1, gm2 = (christoffel(g, X + s * e).gamma for s in (2, 1, -1, -2))
        dgamma_fd[:, i] = (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * h)
    _, scalar_fd = _contractions(_riemann(gamma, dgamma_fd), G, Ginv)

    if structure is not None:
        E = evaluate_matrix(structure.frame.matrix, X)
        e1, e2, e3 = E[:, 0], E[:, 1], E[:, 2]
        xi_sec = _sectional(Rlow, G, e1, e3)
        xi_sec_phi = _sectional(Rlow, G, e2, e3)
        phi_sec = _sectional(Rlow, G, e1, e2)
    else:
        xi_sec = xi_sec_phi = phi_sec = np.full(len(X), np.nan)

    ref = dev = None
    if reference is not None:
        ref = evaluate_many([as_field(reference)], X)[0]
        dev = scalar - ref

    shape = lambda a: None if a is None else a.reshape(lead + a.shape[1:])
    return CurvatureReport(
        scalar=shape(scalar),
        ricci=shape(ricci),
        xi_sectional=shape(xi_sec),
        xi_sectional_phi=shape(xi_sec_phi),
        phi_sectional=shape(phi_sec),
        scalar_fd=shape(scalar_fd),
        route_delta=shape(np.abs(scalar - scalar_fd)),
        symmetry_residual=shape(sym),
        reference=shape(ref),
        reference_deviation=shape(dev),
    )
