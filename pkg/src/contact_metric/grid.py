"""Coordinate boxes, cell-centred sample grids, and nonvanishing checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ZeroOnDomain
from .expr_dsl import DomainError, ScalarField, as_field, evaluate_many

#: |value| at or below this counts as a zero of a field
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Box ``[lo, hi]`` in R^3 sampled at the centres of an ``n1 x n2 x n3`` grid.

    ``excluded`` holds fields whose zero sets are removed from the domain
    (e.g. ``x2`` for the plane ``x2 = 0``).
    """

    lo: tuple
    hi: tuple
    shape: tuple = (8, 8, 8)
    excluded: tuple = field(default=())

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        shape = tuple(int(n) for n in self.shape)
        if len(lo) != 3 or len(hi) != 3 or len(shape) != 3:
            raise ConfigError("domain bounds and grid need three entries each")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError(f"domain min {lo} must be below max {hi} componentwise")
        if any(n < 2 for n in shape):
            raise ConfigError(f"grid needs at least 2 points per axis, got {shape}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "excluded", tuple(as_field(e) for e in self.excluded))

    def axes(self):
        return [
            a + (np.arange(n) + 0.5) * (b - a) / n
            for a, b, n in zip(self.lo, self.hi, self.shape)
        ]

    def lattice(self) -> np.ndarray:
        """Cell centres as an array of shape ``(n1, n2, n3, 3)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def excluded_mask(self, points) -> np.ndarray:
        """True where a point lies on (or evaluates badly near) an excluded set."""
        pts = np.asarray(points, dtype=float)
        mask = np.zeros(pts.shape[:-1], dtype=bool)
        for expr in self.excluded:
            try:
                vals = evaluate_many([expr], pts)[0]
            except DomainError:
                vals = np.array([_safe_eval(expr, p) for p in pts.reshape(-1, 3)]).reshape(mask.shape)
            mask |= ~(np.abs(vals) > ZERO_TOL)
        return mask

    def points(self) -> np.ndarray:
        """Grid points outside the excluded sets, shape ``(M, 3)``."""
        pts = self.lattice().reshape(-1, 3)
        if self.excluded:
            pts = pts[~self.excluded_mask(pts)]
        return pts

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= np.array(self.lo)) and np.all(p <= np.array(self.hi)))

    def to_dict(self) -> dict:
        return {
            "min": list(self.lo),
            "max": list(self.hi),
            "grid": list(self.shape),
            "excluded": [str(e) for e in self.excluded],
        }


def _safe_eval(expr, p):
    try:
        return evaluate_many([expr], p)[0]
    except DomainError:
        return 0.0


def _straddles_excluded(domain: Domain, a, b) -> bool:
    for expr in domain.excluded:
        va, vb = _safe_eval(expr, a), _safe_eval(expr, b)
        if va * vb <= 0:
            return True
    return False


def require_nonvanishing(f, domain: Domain | None, name: str) -> None:
    """Raise :class:`ZeroOnDomain` if ``f`` vanishes on the domain grid.

    A zero is detected either as a grid value with ``|f| <= ZERO_TOL`` or
    as a sign change between neighbouring grid points (the witness is then
    the linear interpolant of the crossing).  Pairs separated by a declared
    excluded set are ignored.
    """
    if domain is None:
        return
    f = as_field(f)
    lattice = domain.lattice()
    flat = lattice.reshape(-1, 3)
    skip = domain.excluded_mask(flat).reshape(lattice.shape[:-1]) if domain.excluded else np.zeros(lattice.shape[:-1], bool)
    skip_flat = skip.ravel()
    try:
        vals = evaluate_many([f], flat)[0]
    except DomainError:
        vals = np.full(len(flat), np.nan)
        for k, p in enumerate(flat):
            if skip_flat[k]:
                continue
            try:
                vals[k] = evaluate_many([f], p)[0]
            except DomainError as exc:
                raise ZeroOnDomain(f"{name} is undefined ({exc.reason})", p, field=name) from exc
    vals = vals.reshape(skip.shape)
    small = (np.abs(vals) <= ZERO_TOL) & ~skip
    if small.any():
        idx = np.unravel_index(np.argmax(small), small.shape)
        raise ZeroOnDomain(f"{name} vanishes on the domain", lattice[idx], field=name)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        change = (np.sign(vals[lo]) != np.sign(vals[hi])) & ~skip[lo] & ~skip[hi]
        for idx in zip(*np.nonzero(change)):
            a = lattice[lo][idx]
            b = lattice[hi][idx]
            if domain.excluded and _straddles_excluded(domain, a, b):
                continue
            va, vb = vals[lo][idx], vals[hi][idx]
            t = va / (va - vb)
            raise ZeroOnDomain(f"{name} changes sign on the domain", a + t * (b - a), field=name)


def field_is_zero(f: ScalarField, domain: Domain | None, tol: float = ZERO_TOL) -> bool:
    """True if ``f`` is the literal 0 or below ``tol`` on every grid point."""
    f = as_field(f)
    if f.is_zero():
        return True
    if isinstance(f, ScalarField) and f.is_constant:
        return abs(f.value) <= tol
    if domain is None:
        return False
    vals = evaluate_many([f], domain.points())[0]
    return bool(np.all(np.abs(vals) <= tol))
