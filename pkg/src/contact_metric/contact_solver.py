"""Contact-system residuals, branch selection and the solutions for zeta.

In simplifying coordinates the contact system reduces to the ODE in ``x2``
(``x3`` a parameter)::

    F zeta_2 + (alpha/beta)_3 zeta^2 - (F_2 - 2/beta) zeta = 0

For ``F = 0`` it is linear in ``zeta``; otherwise it is a Riccati equation
whose solution is

    zeta = F E / (J - K(x3)),   E = exp(-2 I),
    I = int dx2 / (beta F),     J = int E (alpha/beta)_3 dx2,

both integrals running from ``QuadratureConfig.base_x2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (BranchError, ConfigError, QuadratureDomainError, SingularMatrix,
                     VanishingDenominator, VariableDependenceError, ZeroOnDomain)
from .expr_dsl import (DomainError, ScalarField, as_field, differentiate, evaluate_many, exp,
                       integral)
from .frames import _partials, b_matrix, evaluate_matrix, structure_functions
from .grid import ZERO_TOL, Domain, field_is_zero, require_nonvanishing

__all__ = [
    "QuadratureConfig",
    "Branch",
    "BranchDecision",
    "decide_branch",
    "solve_zeta_linear",
    "riccati_zeta_field",
    "solve_zeta_riccati",
    "riccati_residual",
    "ode_residual",
    "contact_residuals",
    "check_easy_conditions",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Simpson with a fixed number of steps from ``base_x2``."""

    steps: int = 256
    base_x2: float = 1.0
    rule: str = "simpson"

    def __post_init__(self):
        if self.rule != "simpson":
            raise ConfigError(f"unsupported quadrature rule {self.rule!r}")
        if int(self.steps) != self.steps or self.steps < 16 or self.steps % 2:
            raise ConfigError(f"quadrature steps must be an even integer >= 16, got {self.steps}")

    def doubled(self) -> "QuadratureConfig":
        return QuadratureConfig(2 * self.steps, self.base_x2, self.rule)


class Branch(str, enum.Enum):
    RICCATI = "Riccati"
    LINEAR_SOLVABLE = "LinearSolvable"
    ZETA_FREE = "ZetaFree"
    NO_SOLUTION = "NoSolution"


@dataclass(frozen=True)
class BranchDecision:
    tag: Branch
    rationale: str
    notes: tuple = ()


_ZETA_FREE_NOTE = (
    "the sub-case '(alpha/beta)_3 = 0 and F_2 = 2/beta, zeta arbitrary' sits inside the F = 0 "
    "branch, where F_2 = 0 forces 2/beta = 0; it is not constructible"
)


def _ratio_x3(alpha, beta) -> ScalarField:
    return differentiate(as_field(alpha) / as_field(beta), 3)


def decide_branch(alpha, beta, F, domain: Domain | None = None, tol: float = ZERO_TOL) -> BranchDecision:
    """Choose the solution branch from the ``F == 0`` and ``(alpha/beta)_3 == 0`` tests."""
    alpha, beta, F = (as_field(v) for v in (alpha, beta, F))
    if not field_is_zero(F, domain, tol):
        return BranchDecision(Branch.RICCATI, "F is not identically zero: zeta solves the Riccati equation")
    if not field_is_zero(_ratio_x3(alpha, beta), domain, tol):
        return BranchDecision(
            Branch.LINEAR_SOLVABLE,
            "F = 0 and (alpha/beta)_3 != 0: zeta = (F_2 - 2/beta)/(alpha/beta)_3",
        )
    return BranchDecision(
        Branch.NO_SOLUTION,
        "F = 0 and (alpha/beta)_3 = 0: the reduced equation forces 2/beta = 0, impossible for beta != 0",
        (_ZETA_FREE_NOTE,),
    )


def solve_zeta_linear(alpha, beta, F, domain: Domain | None = None) -> ScalarField:
    """``zeta = (F_2 - 2/beta) / (alpha/beta)_3`` as a symbolic field."""
    alpha, beta, F = (as_field(v) for v in (alpha, beta, F))
    ratio = _ratio_x3(alpha, beta)
    if ratio.is_zero():
        raise BranchError("(alpha/beta)_3 vanishes identically; the linear branch does not apply")
    require_nonvanishing(ratio, domain, "(alpha/beta)_3")
    return (differentiate(F, 2) - 2 / beta) / ratio


def _check_generators(alpha, beta, F, K):
    for name, f in (("alpha", alpha), ("beta", beta), ("F", F)):
        if 1 in f.variables:
            raise VariableDependenceError(name, 1)
    for axis in (1, 2):
        if axis in K.variables:
            raise VariableDependenceError("K", axis)


def _closed_form_parts(alpha, beta, F, K, q: QuadratureConfig):
    inner = integral(1 / (beta * F), 2, q.base_x2, q.steps)
    weight = exp(-2 * inner)
    outer = integral(weight * _ratio_x3(alpha, beta), 2, q.base_x2, q.steps)
    return weight, outer - K


def riccati_zeta_field(alpha, beta, F, K, q: QuadratureConfig = QuadratureConfig()) -> ScalarField:
    """The closed-form Riccati solution as a field containing quadrature nodes.

    Its symbolic ``x2``-derivative is exact (Leibniz rule), so the field can
    be differentiated like any other generator.
    """
    alpha, beta, F, K = (as_field(v) for v in (alpha, beta, F, K))
    _check_generators(alpha, beta, F, K)
    if F.is_zero():
        raise BranchError("F = 0: the Riccati branch does not apply")
    weight, denominator = _closed_form_parts(alpha, beta, F, K, q)
    if denominator.is_zero():
        raise VanishingDenominator("denominator of the closed-form solution is identically zero", value=0.0)
    return F * weight / denominator


def _points(p):
    P = np.asarray(p, dtype=float)
    return P.reshape(-1, 3), P.shape[:-1]


def solve_zeta_riccati(alpha, beta, F, K, p, q: QuadratureConfig = QuadratureConfig(),
                       denominator_tol: float = 1e-10):
    """Evaluate the closed-form Riccati solution at ``p`` (one point or an array).

    Raises :class:`QuadratureDomainError` if ``beta*F`` vanishes or changes
    sign on ``[base_x2, x2]`` and :class:`VanishingDenominator` if
    ``|J - K| <= denominator_tol``.
    """
    alpha, beta, F, K = (as_field(v) for v in (alpha, beta, F, K))
    X, lead = _points(p)
    _check_generators(alpha, beta, F, K)
    _check_path(beta * F, X, q)
    weight, denominator = _closed_form_parts(alpha, beta, F, K, q)
    try:
        Fv, wv, dv = evaluate_many([F, weight, denominator], X)
    except DomainError as exc:
        raise QuadratureDomainError(f"closed form is undefined ({exc.reason})", exc.point) from exc
    bad = np.abs(dv) <= denominator_tol
    if bad.any():
        idx = int(np.argmax(bad))
        raise VanishingDenominator("denominator of the closed-form solution vanishes", X[idx],
                                   value=float(dv[idx]))
    out = (Fv * wv / dv).reshape(lead)
    return float(out) if out.ndim == 0 else out


def _check_path(product: ScalarField, X, q: QuadratureConfig) -> None:
    t = np.linspace(0.0, 1.0, q.steps + 1)
    for x in X:
        nodes = np.repeat(x[None, :], q.steps + 1, axis=0)
        nodes[:, 1] = q.base_x2 + (x[1] - q.base_x2) * t
        try:
            vals = evaluate_many([product], nodes)[0]
        except DomainError as exc:
            raise QuadratureDomainError(f"integrand undefined on the x2-path ({exc.reason})", exc.point) from exc
        zero = np.abs(vals) <= ZERO_TOL
        flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        if zero.any() or flips.size:
            k = int(np.argmax(zero)) if zero.any() else int(flips[0])
            raise QuadratureDomainError("1/(beta*F) is singular on the x2-path", nodes[k],
                                        base_x2=q.base_x2)


def ode_residual(zeta, alpha, beta, F, p):
    """Residual of ``F zeta_2 + (alpha/beta)_3 zeta^2 - (F_2 - 2/beta) zeta`` (valid on both branches)."""
    zeta, alpha, beta, F = (as_field(v) for v in (zeta, alpha, beta, F))
    expr = F * differentiate(zeta, 2) + _ratio_x3(alpha, beta) * zeta ** 2 - (differentiate(F, 2) - 2 / beta) * zeta
    out = evaluate_many([expr], p)[0]
    return float(out) if out.ndim == 0 else out


def riccati_residual(zeta, alpha, beta, F, p, h: float = 1e-3):
    """``zeta_2 + (1/F)(alpha/beta)_3 zeta^2 - (F_2/F - 2/(F beta)) zeta`` at ``p``.

    ``zeta`` is either a :class:`ScalarField` (``zeta_2`` taken symbolically)
    or a callable ``zeta(points) -> values`` such as a wrapper around
    :func:`solve_zeta_riccati`; then ``zeta_2`` is the 5-point central
    difference in ``x2`` with step ``h``.
    """
    alpha, beta, F = (as_field(v) for v in (alpha, beta, F))
    X, lead = _points(p)
    coeffs = evaluate_many([F, _ratio_x3(alpha, beta), differentiate(F, 2), beta], X)
    Fv, rv, F2, bv = coeffs
    if np.any(Fv == 0):
        raise ZeroOnDomain("F vanishes", X[int(np.argmax(Fv == 0))])
    if isinstance(zeta, (ScalarField, str)):
        zeta = as_field(zeta)
        z, z2 = evaluate_many([zeta, differentiate(zeta, 2)], X)
    else:
        shifts = {}
        for k in (-2, -1, 1, 2):
            Y = X.copy()
            Y[:, 1] += k * h
            shifts[k] = np.asarray(zeta(Y), dtype=float).reshape(-1)
        z = np.asarray(zeta(X), dtype=float).reshape(-1)
        z2 = (shifts[-2] - 8 * shifts[-1] + 8 * shifts[1] - shifts[2]) / (12 * h)
    res = (z2 + rv / Fv * z ** 2 - (F2 / Fv - 2 / (Fv * bv)) * z).reshape(lead)
    return float(res) if res.ndim == 0 else res


def contact_residuals(B9, p) -> np.ndarray:
    """Left-minus-right residuals of the five contact equations for a full B-matrix.

    Each equation pairs a cross product of two frame rows with a coordinate
    bracket, e.g. the first is
    ``sum_j (e1 x e2)_j (b_3^i d_i b_1^j - b_1^i d_i b_3^j) = 0``
    and the third has right-hand side ``2 det B``.  Returns shape
    ``p.shape[:-1] + (5,)``.
    """
    rows = b_matrix(B9)
    b = evaluate_matrix(rows, p)
    det = np.linalg.det(b)
    if np.any(np.abs(det) <= ZERO_TOL):
        X, _ = _points(p)
        raise SingularMatrix("B-matrix is singular", X[int(np.argmax(np.abs(det).ravel() <= ZERO_TOL))])
    dB = _partials(rows, p)
    half = np.einsum("...ai,...bij->...abj", b, dB)
    # br[a, c, j] = b_a^i d_i b_c^j - b_c^i d_i b_a^j, a bracket of rows a and c
    br = half - np.swapaxes(half, -3, -2)
    e1, e2, e3 = b[..., 0, :], b[..., 1, :], b[..., 2, :]
    e1xe2 = np.cross(e1, e2)
    e2xe3 = np.cross(e2, e3)
    e3xe1 = np.cross(e3, e1)
    r1 = np.einsum("...j,...j->...", e1xe2, br[..., 2, 0, :])
    r2 = np.einsum("...j,...j->...", e1xe2, br[..., 2, 1, :])
    r3 = np.einsum("...j,...j->...", e1xe2, br[..., 0, 1, :]) - 2 * det
    r4 = np.einsum("...j,...j->...", e2xe3, br[..., 2, 0, :])
    r5 = np.einsum("...j,...j->...", e3xe1, br[..., 2, 1, :])
    return np.stack([r1, r2, r3, r4, r5], axis=-1)


def check_easy_conditions(B, p) -> np.ndarray:
    """``(c^3_12 - 2, c^3_31, c^3_32, c^2_32, c^1_31)``; all zero for a phi-eigenbasis."""
    c = structure_functions(B, p)
    return np.stack(
        [
            c[..., 2, 0, 1] - 2.0,
            c[..., 2, 2, 0],
            c[..., 2, 2, 1],
            c[..., 1, 2, 1],
            c[..., 0, 2, 0],
        ],
        axis=-1,
    )
