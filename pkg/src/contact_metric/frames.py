"""B-matrices, frame fields, Lie brackets and structure functions.

A frame ``{e1, e2, e3}`` is stored through its B-matrix: row ``a`` holds the
coordinate components of ``e_a``, i.e. ``e_a = b_a^i d/dx^i``.  Structure
functions are returned as arrays indexed ``c[gamma, a, b]`` (zero-based),
meaning ``[e_a, e_b] = c[gamma, a, b] e_gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SingularMatrix, VariableDependenceError
from .expr_dsl import ONE, ZERO, ScalarField, as_field, differentiate, evaluate_many
from .grid import ZERO_TOL, Domain, require_nonvanishing

__all__ = [
    "SimplifiedB",
    "Frame",
    "build_simplified_B",
    "frame_fields",
    "invert_B",
    "lie_bracket",
    "structure_functions",
    "bracket_coefficients",
    "b_matrix",
    "evaluate_matrix",
    "symbolic_inverse",
]

Vector = tuple  # three ScalarField components


def vector(components: Sequence) -> Vector:
    comps = tuple(as_field(c) for c in components)
    if len(comps) != 3:
        raise ValueError("a vector field needs exactly three components")
    return comps


@dataclass(frozen=True)
class SimplifiedB:
    """Generators of the B-matrix in simplifying coordinates::

        [[alpha, beta,    0   ],
         [delta, epsilon, zeta],
         [1,     0,       0   ]]

    with ``delta = alpha*epsilon/beta + F``.
    """

    alpha: ScalarField
    beta: ScalarField
    epsilon: ScalarField
    zeta: ScalarField
    F: ScalarField
    delta: ScalarField
    zeta_provenance: str = "user"

    @property
    def matrix(self) -> tuple:
        return (
            (self.alpha, self.beta, ZERO),
            (self.delta, self.epsilon, self.zeta),
            (ONE, ZERO, ZERO),
        )


@dataclass(frozen=True)
class Frame:
    """Three vector fields given by coordinate components."""

    e1: Vector
    e2: Vector
    e3: Vector

    def __post_init__(self):
        for name in ("e1", "e2", "e3"):
            object.__setattr__(self, name, vector(getattr(self, name)))

    @property
    def matrix(self) -> tuple:
        return (self.e1, self.e2, self.e3)

    def __iter__(self):
        return iter(self.matrix)

    def __getitem__(self, index):
        return self.matrix[index]


def b_matrix(obj) -> tuple:
    """The 3x3 B-matrix (tuple of rows of fields) of a SimplifiedB, Frame or nested sequence."""
    if isinstance(obj, (SimplifiedB, Frame)):
        return obj.matrix
    rows = tuple(vector(row) for row in obj)
    if len(rows) != 3:
        raise ValueError("a B-matrix needs three rows")
    return rows


def evaluate_matrix(rows, points) -> np.ndarray:
    """Evaluate a 3x3 matrix of fields; result has shape ``points.shape[:-1] + (3, 3)``."""
    flat = [f for row in rows for f in row]
    vals = evaluate_many(flat, points)
    return np.moveaxis(vals, 0, -1).reshape(vals.shape[1:] + (3, 3))


def _partials(rows, points) -> np.ndarray:
    """``out[..., a, i, j] = d b_a^j / dx^i`` at the points."""
    flat = [differentiate(f, i) for row in rows for i in (1, 2, 3) for f in row]
    vals = evaluate_many(flat, points)
    return np.moveaxis(vals, 0, -1).reshape(vals.shape[1:] + (3, 3, 3))


def build_simplified_B(alpha, beta, epsilon, F, zeta, *, domain: Domain | None = None,
                       provenance: str = "user") -> SimplifiedB:
    """Assemble a :class:`SimplifiedB`, deriving ``delta = alpha*epsilon/beta + F``.

    ``alpha``, ``beta``, ``zeta`` and ``F`` must not depend on ``x1``; ``beta``
    and ``zeta`` must not vanish on ``domain`` (checked if given).
    """
    alpha, beta, epsilon, F, zeta = (as_field(v) for v in (alpha, beta, epsilon, F, zeta))
    for name, f in (("alpha", alpha), ("beta", beta), ("zeta", zeta), ("F", F)):
        if 1 in f.variables:
            raise VariableDependenceError(name, 1)
    require_nonvanishing(beta, domain, "beta")
    require_nonvanishing(zeta, domain, "zeta")
    delta = alpha * epsilon / beta + F
    return SimplifiedB(alpha, beta, epsilon, zeta, F, delta, provenance)


def frame_fields(B: SimplifiedB) -> Frame:
    """``e1 = (alpha, beta, 0)``, ``e2 = (delta, epsilon, zeta)``, ``e3 = (1, 0, 0)``."""
    return Frame(*B.matrix)


def invert_B(B, p) -> np.ndarray:
    """Numeric inverse of the evaluated B-matrix.

    Row ``i`` of the result expands ``d/dx^i`` in the frame.  Raises
    :class:`SingularMatrix` where ``det B`` vanishes.
    """
    rows = b_matrix(B)
    Bp = evaluate_matrix(rows, p)
    return _checked_inverse(Bp, p)


def _checked_inverse(Bp, p) -> np.ndarray:
    det = np.linalg.det(Bp)
    bad = np.abs(det) <= ZERO_TOL
    if np.any(bad):
        pts = np.asarray(p, dtype=float).reshape(-1, 3)
        idx = int(np.argmax(bad.ravel()))
        raise SingularMatrix("B-matrix is singular", pts[idx], determinant=float(det.ravel()[idx]))
    return np.linalg.inv(Bp)


def lie_bracket(X, Y) -> Vector:
    """Symbolic ``[X, Y]^j = X^i d_i Y^j - Y^i d_i X^j``."""
    X, Y = vector(X), vector(Y)
    out = []
    for j in range(3):
        comp = ZERO
        for i in range(3):
            comp = comp + X[i] * differentiate(Y[j], i + 1) - Y[i] * differentiate(X[j], i + 1)
        out.append(comp)
    return tuple(out)


def structure_functions(B, p) -> np.ndarray:
    """``c[gamma, a, b] = (b^-1)_j^gamma (b_a^i d_i b_b^j - b_b^i d_i b_a^j)`` at ``p``.

    Works for any B-matrix (SimplifiedB, Frame, or 3x3 fields).  The result
    has shape ``p.shape[:-1] + (3, 3, 3)``.
    """
    rows = b_matrix(B)
    Bp = evaluate_matrix(rows, p)
    W = _checked_inverse(Bp, p)
    dB = _partials(rows, p)
    # T[a, b, j] = b_a^i d_i b_b^j - b_b^i d_i b_a^j
    half = np.einsum("...ai,...bij->...abj", Bp, dB)
    T = half - np.swapaxes(half, -3, -2)
    return np.einsum("...jg,...abj->...gab", W, T)


def bracket_coefficients(B, p) -> np.ndarray:
    """Structure functions via symbolic Lie brackets expanded in the frame.

    Independent of :func:`structure_functions` except for the shared inverse.
    """
    rows = b_matrix(B)
    W = _checked_inverse(evaluate_matrix(rows, p), p)
    brackets = [[lie_bracket(rows[a], rows[b]) for b in range(3)] for a in range(3)]
    flat = [brackets[a][b][j] for a in range(3) for b in range(3) for j in range(3)]
    vals = evaluate_many(flat, p)
    V = np.moveaxis(vals, 0, -1).reshape(vals.shape[1:] + (3, 3, 3))
    return np.einsum("...jg,...abj->...gab", W, V)


def symbolic_inverse(rows) -> tuple:
    """Cofactor inverse of a 3x3 matrix of fields (no simplification beyond folding)."""
    m = b_matrix(rows)

    def cof(i, j):
        r = [k for k in range(3) if k != i]
        c = [k for k in range(3) if k != j]
        minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
        return minor if (i + j) % 2 == 0 else -minor

    cofactors = [[cof(i, j) for j in range(3)] for i in range(3)]
    det = m[0][0] * cofactors[0][0] + m[0][1] * cofactors[0][1] + m[0][2] * cofactors[0][2]
    return tuple(tuple(cofactors[j][i] / det for j in range(3)) for i in range(3))
