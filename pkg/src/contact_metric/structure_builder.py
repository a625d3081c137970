"""Metric, contact form, phi, xi and h assembled from a frame, plus axiom checks.

Conventions used throughout:

* ``d omega(d_i, d_j) = d_i omega_j - d_j omega_i`` (no factor 1/2), so the
  compatibility identity that holds is ``d eta(X, Y) = 2 g(X, phi Y)``.
* ``(eta ^ d eta)(d_1, d_2, d_3) = eta_1 d eta_23 - eta_2 d eta_13 + eta_3 d eta_12``
  with no factorial normalization.
* The coframe ``W = B^-1`` has rows indexed by coordinates: ``d_j = W[j][a] e_a``
  and ``omega^a = W[j][a] dx^j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateFrame, HypothesisViolated, NotPositiveDefinite, ZeroOnDomain
from .expr_dsl import ONE, ZERO, ScalarField, as_field, differentiate, evaluate_many, exp
from .frames import (Frame, SimplifiedB, _checked_inverse, b_matrix, evaluate_matrix, frame_fields,
                     lie_bracket, structure_functions, symbolic_inverse, vector)
from .grid import ZERO_TOL, Domain, field_is_zero, require_nonvanishing

__all__ = [
    "MetricField",
    "ContactStructure",
    "AxiomReport",
    "FrameInvariants",
    "DeformationInput",
    "DeformationResult",
    "TTensorParams",
    "metric_closed_form",
    "metric_from_frame",
    "contact_form",
    "exterior_derivative",
    "wedge_volume_coefficient",
    "build_structure",
    "structure_from_frame",
    "phi_in_coordinates",
    "h_tensor",
    "frame_invariants",
    "verify_axioms",
    "deform_to_associated",
    "deform_metric_general",
]

#: tolerance on the smallest leading principal minor
PD_TOL = 1e-12


def _matrix(entries) -> tuple:
    rows = tuple(tuple(as_field(v) for v in row) for row in entries)
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ValueError("expected a 3x3 matrix of fields")
    return rows


def _eval_matrix(entries, points) -> np.ndarray:
    return evaluate_matrix(entries, points)


@dataclass(frozen=True)
class MetricField:
    """Symmetric 3x3 matrix of scalar fields in coordinates."""

    entries: tuple

    def __post_init__(self):
        m = _matrix(self.entries)
        sym = tuple(tuple(m[min(i, j)][max(i, j)] for j in range(3)) for i in range(3))
        object.__setattr__(self, "entries", sym)

    def __getitem__(self, index):
        i, j = index
        return self.entries[i][j]

    def evaluate(self, points) -> np.ndarray:
        return _eval_matrix(self.entries, points)

    def derivative(self, axis: int) -> "MetricField":
        return MetricField(tuple(tuple(differentiate(f, axis) for f in row) for row in self.entries))

    def leading_minors(self, points) -> np.ndarray:
        G = self.evaluate(points)
        return np.stack(
            [G[..., 0, 0], np.linalg.det(G[..., :2, :2]), np.linalg.det(G)], axis=-1
        )

    def check_positive_definite(self, points, tol: float = PD_TOL) -> None:
        """Raise :class:`NotPositiveDefinite` at the first point with a minor ``<= tol``."""
        P = np.asarray(points, dtype=float).reshape(-1, 3)
        minors = self.leading_minors(P)
        bad = minors <= tol
        if bad.any():
            k = int(np.argmax(bad.any(axis=1)))
            order = int(np.argmax(bad[k])) + 1
            raise NotPositiveDefinite(
                f"leading principal minor of order {order} is not positive", P[k],
                minor=order, value=float(minors[k, order - 1]),
            )

    def to_text(self) -> list:
        return [[str(f) for f in row] for row in self.entries]


def metric_closed_form(B: SimplifiedB) -> MetricField:
    """The metric of a simplified B-matrix written out entry by entry."""
    a, b, e, z, F = B.alpha, B.beta, B.epsilon, B.zeta, B.F
    g11 = ONE
    g12 = -a / b
    g13 = -F / z
    g22 = (1 + a ** 2) / b ** 2
    g23 = (a * b * F - e) / (b ** 2 * z)
    g33 = (b ** 2 * (1 + F ** 2) + e ** 2) / (b ** 2 * z ** 2)
    return MetricField(((g11, g12, g13), (g12, g22, g23), (g13, g23, g33)))


def metric_from_frame(B, p) -> np.ndarray:
    """``g_ij = W_i^m W_j^m`` from the numeric inverse ``W`` of the evaluated B-matrix."""
    rows = b_matrix(B)
    W = _checked_inverse(evaluate_matrix(rows, p), p)
    return W @ np.swapaxes(W, -1, -2)


def _simplified_coframe(B: SimplifiedB) -> tuple:
    # closed-form B^-1; row j expands d/dx^j in the frame
    a, b, e, z, F = B.alpha, B.beta, B.epsilon, B.zeta, B.F
    return (
        (ZERO, ZERO, ONE),
        (1 / b, ZERO, -a / b),
        (-e / (b * z), 1 / z, -F / z),
    )


def contact_form(B: SimplifiedB) -> tuple:
    """``eta = dx1 - (alpha/beta) dx2 - (F/zeta) dx3`` as three components."""
    return (ONE, -B.alpha / B.beta, -B.F / B.zeta)


def exterior_derivative(omega) -> tuple:
    """``d omega`` as the antisymmetric matrix ``[d_i omega_j - d_j omega_i]``."""
    w = vector(omega)
    return tuple(
        tuple(ZERO if i == j else differentiate(w[j], i + 1) - differentiate(w[i], j + 1) for j in range(3))
        for i in range(3)
    )


def wedge_volume_coefficient(eta) -> ScalarField:
    """``(eta ^ d eta)(d_1, d_2, d_3)``, without factorial normalization."""
    w = vector(eta)
    d = exterior_derivative(w)
    return w[0] * d[1][2] - w[1] * d[0][2] + w[2] * d[0][1]


@dataclass(frozen=True)
class ContactStructure:
    """``(g, eta, xi, phi)`` with the frame and coframe they were built from.

    ``phi`` is stored symbolically as ``phi[i][j]``, the ``d_i`` component of
    ``phi(d_j)``.
    """

    g: MetricField
    eta: tuple
    xi: tuple
    phi: tuple
    frame: Frame
    coframe: tuple
    zeta_provenance: str = "user"
    metadata: dict = field(default_factory=dict, compare=False)

    @cached_property
    def d_eta(self) -> tuple:
        return exterior_derivative(self.eta)

    @cached_property
    def h(self) -> tuple:
        """``h = (1/2) L_xi phi`` as ``h[k][j]``, via symbolic brackets.

        ``h d_j = (1/2)([xi, phi d_j] - phi [xi, d_j])`` with
        ``[xi, d_j] = -d_j xi``.
        """
        xi, phi = self.xi, self.phi
        cols = []
        for j in range(3):
            column = tuple(phi[i][j] for i in range(3))
            br = lie_bracket(xi, column)
            cols.append(
                tuple(
                    (br[k] + sum((phi[k][m] * differentiate(xi[m], j + 1) for m in range(3)), ZERO)) / 2
                    for k in range(3)
                )
            )
        return tuple(tuple(cols[j][k] for j in range(3)) for k in range(3))

    def to_dict(self) -> dict:
        return {
            "g": self.g.to_text(),
            "eta": [str(f) for f in self.eta],
            "xi": [str(f) for f in self.xi],
            "phi": [[str(f) for f in row] for row in self.phi],
            "frame": [[str(f) for f in row] for row in self.frame],
            "zeta_provenance": self.zeta_provenance,
        }


def _phi_symbolic(rows, coframe) -> tuple:
    # phi^i_j = b_2^i W_j^1 - b_1^i W_j^2
    e1, e2 = rows[0], rows[1]
    return tuple(
        tuple(e2[i] * coframe[j][0] - e1[i] * coframe[j][1] for j in range(3)) for i in range(3)
    )


def _assemble(frame: Frame, coframe, provenance: str, metadata=None) -> ContactStructure:
    rows = frame.matrix
    g = MetricField(
        tuple(
            tuple(sum((coframe[i][m] * coframe[j][m] for m in range(3)), ZERO) for j in range(3))
            for i in range(3)
        )
    )
    eta = tuple(coframe[j][2] for j in range(3))
    return ContactStructure(
        g=g,
        eta=eta,
        xi=rows[2],
        phi=_phi_symbolic(rows, coframe),
        frame=frame,
        coframe=coframe,
        zeta_provenance=provenance,
        metadata=dict(metadata or {}),
    )


def build_structure(B: SimplifiedB, metadata=None) -> ContactStructure:
    """Structure of a simplified B-matrix; ``g`` is the closed-form metric."""
    frame = frame_fields(B)
    coframe = _simplified_coframe(B)
    s = _assemble(frame, coframe, B.zeta_provenance, metadata)
    return ContactStructure(
        g=metric_closed_form(B),
        eta=contact_form(B),
        xi=s.xi,
        phi=s.phi,
        frame=frame,
        coframe=coframe,
        zeta_provenance=B.zeta_provenance,
        metadata=s.metadata,
    )


def structure_from_frame(frame, provenance: str = "frame", metadata=None) -> ContactStructure:
    """Structure for which ``frame`` is orthonormal, ``eta = omega^3`` and ``xi = e3``."""
    frame = frame if isinstance(frame, Frame) else Frame(*b_matrix(frame))
    coframe = symbolic_inverse(frame.matrix)
    return _assemble(frame, coframe, provenance, metadata)


def phi_in_coordinates(structure: ContactStructure, p) -> np.ndarray:
    """Matrix of ``phi e1 = e2, phi e2 = -e1, phi e3 = 0`` from the numeric B and B^-1."""
    rows = structure.frame.matrix
    Bp = evaluate_matrix(rows, p)
    W = _checked_inverse(Bp, p)
    R = np.zeros((3, 3))
    R[1, 0] = 1.0
    R[0, 1] = -1.0
    return np.swapaxes(Bp, -1, -2) @ R @ np.swapaxes(W, -1, -2)


def h_tensor(structure: ContactStructure, p) -> np.ndarray:
    """``h = (1/2) L_xi phi`` in coordinates at ``p``."""
    return _eval_matrix(structure.h, p)


@dataclass(frozen=True)
class FrameInvariants:
    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "a": self.a, "b": self.b, "c": self.c}


def frame_invariants(structure, p, tol: float = 1e-10) -> FrameInvariants:
    """``lambda, a, b, c`` of the frame from its structure functions.

    With ``f = c^3_12``: ``lambda = (c^2_31 - c^1_23)/f``,
    ``a = -1 + (c^2_31 + c^1_23)/f``, ``b = -2 c^1_12/f``, ``c = 2 c^2_12/f``.
    """
    frame = structure.frame if isinstance(structure, ContactStructure) else structure
    c = structure_functions(frame, p)
    f = c[..., 2, 0, 1]
    small = np.abs(f) <= tol
    if np.any(small):
        P = np.asarray(p, dtype=float).reshape(-1, 3)
        k = int(np.argmax(small.ravel()))
        raise DegenerateFrame("f = c^3_12 vanishes", P[k], value=float(f.ravel()[k]))
    c2_31 = c[..., 1, 2, 0]
    c1_23 = c[..., 0, 1, 2]
    return FrameInvariants(
        lam=(c2_31 - c1_23) / f,
        a=-1 + (c2_31 + c1_23) / f,
        b=-2 * c[..., 0, 0, 1] / f,
        c=2 * c[..., 1, 0, 1] / f,
        f=f,
    )


AXIOM_NAMES = ("eta_xi", "phi_squared", "metric_compat", "deta_compat", "reeb", "eta_gxi", "phi_xi")


@dataclass
class AxiomReport:
    """Per-point residuals (max-abs over components) of each axiom."""

    residuals: dict
    tol: float

    @property
    def maxima(self) -> dict:
        return {k: float(np.max(v)) if np.size(v) else 0.0 for k, v in self.residuals.items()}

    @property
    def passed(self) -> bool:
        return all(m <= self.tol for m in self.maxima.values())

    def failures(self) -> list:
        return [k for k, m in self.maxima.items() if not m <= self.tol]


def _maxabs(a, k):
    return np.max(np.abs(a).reshape(a.shape[: a.ndim - k] + (-1,)), axis=-1)


def evaluate_structure(structure: ContactStructure, p) -> dict:
    """Numeric ``g, eta, xi, phi, d eta`` at the points, in one batched pass."""
    flat = (
        [f for row in structure.g.entries for f in row]
        + list(structure.eta)
        + list(structure.xi)
        + [f for row in structure.phi for f in row]
        + [f for row in structure.d_eta for f in row]
    )
    vals = np.moveaxis(evaluate_many(flat, p), 0, -1)
    lead = vals.shape[:-1]
    return {
        "g": vals[..., 0:9].reshape(lead + (3, 3)),
        "eta": vals[..., 9:12],
        "xi": vals[..., 12:15],
        "phi": vals[..., 15:24].reshape(lead + (3, 3)),
        "d_eta": vals[..., 24:33].reshape(lead + (3, 3)),
    }


def axiom_residuals(g, eta, xi, phi, d_eta) -> dict:
    """Residual arrays of the contact metric axioms from numeric tensors."""
    I = np.eye(3)
    outer = xi[..., :, None] * eta[..., None, :]
    phiT = np.swapaxes(phi, -1, -2)
    return {
        "eta_xi": np.abs(np.einsum("...i,...i->...", eta, xi) - 1.0),
        "phi_squared": _maxabs(phi @ phi + I - outer, 2),
        "metric_compat": _maxabs(phiT @ g @ phi - g + eta[..., :, None] * eta[..., None, :], 2),
        "deta_compat": _maxabs(d_eta - 2.0 * g @ phi, 2),
        "reeb": _maxabs(np.einsum("...i,...ij->...j", xi, d_eta), 1),
        "eta_gxi": _maxabs(eta - np.einsum("...ij,...j->...i", g, xi), 1),
        "phi_xi": _maxabs(np.einsum("...ij,...j->...i", phi, xi), 1),
    }


def verify_axioms(structure: ContactStructure, p, tol: float = 1e-9, g=None) -> AxiomReport:
    """Check ``eta(xi) = 1``, ``phi^2 = -I + eta (x) xi``, ``g(phi X, phi Y) = g - eta (x) eta``,
    ``d eta(X, Y) = 2 g(X, phi Y)`` and ``xi _| d eta = 0`` over the coordinate basis.

    ``g`` may override the structure's metric (a MetricField or an array of
    values) to test a perturbed metric against the same ``(eta, xi, phi)``.
    """
    v = evaluate_structure(structure, p)
    if g is not None:
        v["g"] = g.evaluate(p) if isinstance(g, MetricField) else np.asarray(g, dtype=float)
    return AxiomReport(axiom_residuals(v["g"], v["eta"], v["xi"], v["phi"], v["d_eta"]), tol)


# ---------------------------------------------------------------------------
# deformation of an orthonormal frame to an associated structure


@dataclass(frozen=True)
class DeformationInput:
    """An orthonormal frame ``(e1, e2, e3)``; the metric is the one it makes orthonormal."""

    frame: Frame

    def __post_init__(self):
        if not isinstance(self.frame, Frame):
            object.__setattr__(self, "frame", Frame(*b_matrix(self.frame)))


@dataclass
class DeformationResult:
    structure: ContactStructure
    f: ScalarField
    notes: list
    divergence_max: float
    c312_max_error: float


def _structure_constant_f(frame: Frame) -> ScalarField:
    """``f = omega^3([e1, e2])`` as a symbolic field."""
    W = symbolic_inverse(frame.matrix)
    br = lie_bracket(frame.e1, frame.e2)
    return sum((br[j] * W[j][2] for j in range(3)), ZERO)


def _directional(X, f) -> ScalarField:
    return sum((X[i] * differentiate(f, i + 1) for i in range(3)), ZERO)


def _divergence(X, rows) -> ScalarField:
    # div X = D d_i (X^i / D), D = det B (volume density 1/|D|)
    m = rows
    D = (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )
    return D * sum((differentiate(X[i] / D, i + 1) for i in range(3)), ZERO)


def deform_to_associated(data: DeformationInput, domain: Domain, tol: float = 1e-9) -> DeformationResult:
    """Rescale an orthonormal frame so that it becomes a phi-eigenbasis.

    Hypotheses, checked on the domain grid:

    1. ``f = omega^3([e1, e2])`` is nowhere zero;
    2. ``e3`` is geodesic, ``nabla_{e3} e3 = 0`` (Levi-Civita connection of
       the metric making the frame orthonormal);
    3. ``e3(f) = 0``.

    The new frame is ``(2/f) e_a``; hence ``g' = (f^2/4) g``,
    ``eta' = (f/2) omega^3`` and ``phi' = phi``.
    """
    from .geometry import covariant_derivative_field

    frame = data.frame
    pts = domain.points()
    f = _structure_constant_f(frame)
    failed = []
    try:
        require_nonvanishing(f, domain, "f")
    except ZeroOnDomain as exc:
        failed.append((1, None, exc.witness))
    if not failed:
        original = structure_from_frame(frame)
        nabla = covariant_derivative_field(original.g, frame.e3, frame.e3, pts)
        err = np.sqrt(np.einsum("...i,...ij,...j->...", nabla, original.g.evaluate(pts), nabla))
        if np.max(err) > tol:
            failed.append((2, None, pts[int(np.argmax(err))]))
        e3f = np.abs(evaluate_many([_directional(frame.e3, f)], pts)[0])
        if np.max(e3f) > tol:
            failed.append((3, None, pts[int(np.argmax(e3f))]))
    if failed:
        raise HypothesisViolated(failed)

    scale = 2 / f
    new_frame = Frame(*(tuple(scale * c for c in row) for row in frame.matrix))
    structure = structure_from_frame(new_frame, provenance="deformation")
    notes = []
    if f.is_constant or all(field_is_zero(differentiate(f, i), domain, tol) for i in (1, 2, 3)):
        notes.append("f is constant, so the rescaled e3 is divergence free")
    transverse = evaluate_many([_directional(frame.e1, f), _directional(frame.e2, f)], pts)
    if np.max(np.abs(transverse)) > tol:
        # d eta'(e1, e3) = e1(f)/2 and d eta'(e2, e3) = e2(f)/2 must vanish as well
        notes.append("e1(f) or e2(f) is nonzero, so d eta' has e3-components and the rescaled "
                     "structure is not associated; expect the axiom checks to fail")
    div = np.abs(evaluate_many([_divergence(new_frame.e3, new_frame.matrix)], pts)[0])
    c = structure_functions(new_frame, pts)
    structure.metadata.update({"f": str(f), "notes": list(notes)})
    return DeformationResult(
        structure=structure,
        f=f,
        notes=notes,
        divergence_max=float(np.max(div)),
        c312_max_error=float(np.max(np.abs(c[..., 2, 0, 1] - 2.0))),
    )


# ---------------------------------------------------------------------------
# deformation of the metric by a symmetric tensor t


@dataclass(frozen=True)
class TTensorParams:
    """Free functions of the symmetric perturbation ``t``; ``gamma = g + t``."""

    iota: ScalarField = ZERO
    kappa: ScalarField = ZERO
    nu: ScalarField = ZERO
    rho: ScalarField = ZERO
    sigma: ScalarField = ZERO
    upsilon: ScalarField = ZERO

    def __post_init__(self):
        for name in ("iota", "kappa", "nu", "rho", "sigma", "upsilon"):
            object.__setattr__(self, name, as_field(getattr(self, name)))


def deform_metric_general(B: SimplifiedB, t: TTensorParams, points=None, tol: float = PD_TOL) -> MetricField:
    """``gamma`` with diagonal ``exp(iota), exp(kappa), exp(nu)`` and off-diagonals
    ``g_12 + rho``, ``g_13 + sigma``, ``g_23 + upsilon``.

    If ``points`` (or a :class:`Domain`) is given, positive definiteness is
    checked there and :class:`NotPositiveDefinite` names the failing minor.
    """
    g = metric_closed_form(B)
    g12 = g[0, 1] + t.rho
    g13 = g[0, 2] + t.sigma
    g23 = g[1, 2] + t.upsilon
    gamma = MetricField(
        ((exp(t.iota), g12, g13), (g12, exp(t.kappa), g23), (g13, g23, exp(t.nu)))
    )
    if points is not None:
        pts = points.points() if isinstance(points, Domain) else points
        gamma.check_positive_definite(pts, tol)
    return gamma
