"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations

from .expr_dsl import DomainError, ParseError

__all__ = [
    "ConfigError",
    "ParseError",
    "DomainError",
    "NumericSingularity",
    "ZeroOnDomain",
    "SingularMatrix",
    "VanishingDenominator",
    "QuadratureDomainError",
    "NotPositiveDefinite",
    "VariableDependenceError",
    "BranchError",
    "HypothesisViolated",
    "DegenerateFrame",
]


def _fmt_point(point):
    return "(" + ", ".join(f"{float(v):.6g}" for v in point) + ")"


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


class VariableDependenceError(ConfigError):
    """A generator references a coordinate it must not depend on."""

    def __init__(self, name: str, axis: int):
        self.name = name
        self.axis = axis
        super().__init__(f"{name} must not depend on x{axis}")


class NumericSingularity(ArithmeticError):
    """Base for failures tied to a singular point of the data (exit code 3).

    ``witness`` is a point (tuple of three floats) where the failure was
    observed, or ``None`` if no single point is responsible.
    """

    def __init__(self, message: str, witness=None, **details):
        self.witness = None if witness is None else tuple(float(v) for v in witness)
        self.details = details
        if self.witness is not None:
            message = f"{message} at {_fmt_point(self.witness)}"
        super().__init__(message)

    def to_dict(self) -> dict:
        out = {"error": type(self).__name__, "message": str(self), "witness": self.witness}
        out.update(self.details)
        return out


class ZeroOnDomain(NumericSingularity):
    """A field required to be nonvanishing has a zero on the domain."""


class SingularMatrix(NumericSingularity):
    """A matrix required to be invertible is singular at a point."""


class VanishingDenominator(NumericSingularity):
    """The denominator of the closed-form Riccati solution vanishes."""


class QuadratureDomainError(NumericSingularity):
    """The integrand of a quadrature is singular on the integration path."""


class NotPositiveDefinite(NumericSingularity):
    """A symmetric matrix field fails the leading-principal-minor test."""


class DegenerateFrame(NumericSingularity):
    """``f = c^3_12`` is (numerically) zero, so frame invariants are undefined."""


class BranchError(ValueError):
    """A solver was called outside the branch it applies to."""


class HypothesisViolated(ValueError):
    """Deformation input fails one or more hypotheses.

    ``failed`` lists ``(number, name, witness)`` triples; ``number`` follows
    the deformation: 1 = ``f`` nowhere zero, 2 = ``e3`` geodesic, 3 = ``e3(f) = 0``.
    """

    NAMES = {1: "f_nonzero", 2: "e3_geodesic", 3: "f_constant_along_e3"}

    def __init__(self, failed):
        self.failed = [(n, self.NAMES[n], None if w is None else tuple(float(v) for v in w)) for n, _, w in failed]
        parts = [f"({n}) {name}" + ("" if w is None else f" at {_fmt_point(w)}") for n, name, w in self.failed]
        super().__init__("hypothesis violated: " + "; ".join(parts))

    @property
    def numbers(self) -> set:
        return {n for n, _, _ in self.failed}
