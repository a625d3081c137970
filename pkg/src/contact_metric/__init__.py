"""Contact metric structures on coordinate patches of 3-manifolds.

Generators are given as text expressions in ``x1, x2, x3``; the package
solves for the missing B-matrix entry, assembles ``(g, eta, xi, phi)`` and
checks the axioms, connection relations and curvature identities on a grid.
"""

from .contact_solver import (Branch, BranchDecision, QuadratureConfig, check_easy_conditions,
                             contact_residuals, decide_branch, riccati_residual, riccati_zeta_field,
                             solve_zeta_linear, solve_zeta_riccati)
from .errors import (BranchError, ConfigError, DegenerateFrame, DomainError, HypothesisViolated,
                     NotPositiveDefinite, NumericSingularity, ParseError, QuadratureDomainError,
                     SingularMatrix, VanishingDenominator, VariableDependenceError, ZeroOnDomain)
from .expr_dsl import ScalarField, differentiate, evaluate, evaluate_many, parse, to_text
from .frames import (Frame, SimplifiedB, bracket_coefficients, build_simplified_B, frame_fields,
                     invert_B, lie_bracket, structure_functions)
from .geometry import christoffel, curvature, verify_lemma_aux1
from .grid import Domain
from .pipeline import RunConfig, VerificationReport, example_config, run_algorithm
from .structure_builder import (ContactStructure, DeformationInput, MetricField, TTensorParams,
                                build_structure, contact_form, deform_metric_general,
                                deform_to_associated, exterior_derivative, frame_invariants,
                                h_tensor, metric_closed_form, metric_from_frame, phi_in_coordinates,
                                structure_from_frame, verify_axioms, wedge_volume_coefficient)

__version__ = "0.1.0"
