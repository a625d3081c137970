from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import BOX, random_points
from contact_metric import (DegenerateFrame, build_simplified_B, DeformationInput, Domain, Frame, HypothesisViolated,
                            MetricField, NotPositiveDefinite, TTensorParams, contact_form,
                            deform_metric_general, deform_to_associated, evaluate, evaluate_many,
                            exterior_derivative, frame_invariants, h_tensor, metric_closed_form,
                            metric_from_frame, parse, phi_in_coordinates, structure_from_frame,
                            structure_functions, verify_axioms, wedge_volume_coefficient)
from contact_metric.expr_dsl import ln
from contact_metric.frames import evaluate_matrix

P0 = (1.0, 1.0, 0.0)
EX_G0 = [[1, 0, 1], [0, 1, 1], [1, 1, 3]]


def ex_phi(p):
    """phi in coordinates from phi e1 = e2, phi e2 = -e1, phi e3 = 0."""
    E = oracles.ex_rows(p).T  # columns e1, e2, e3
    return np.column_stack([E[:, 1], -E[:, 0], np.zeros(3)]) @ np.linalg.inv(E)


# ---------------------------------------------------------------- metric


def test_metric_closed_form_at_reference_point(example_closed_B, example_B):
    np.testing.assert_allclose(metric_closed_form(example_closed_B).evaluate(P0), EX_G0, atol=1e-15)
    np.testing.assert_allclose(metric_closed_form(example_B).evaluate(P0), EX_G0, atol=1e-12)
    np.testing.assert_allclose(oracles.ex_metric(np.array(P0)), EX_G0, atol=1e-15)


def test_metric_from_frame_matches_oracle_and_closed_form(example_closed_B):
    P = random_points(20, 31)
    closed = metric_closed_form(example_closed_B).evaluate(P)
    for k, p in enumerate(P):
        np.testing.assert_allclose(metric_from_frame(example_closed_B, p), oracles.ex_metric(p), rtol=1e-12)
        np.testing.assert_allclose(closed[k], oracles.ex_metric(p), rtol=1e-10, atol=1e-12)


def test_det_metric(example_closed_B):
    P = random_points(20, 32)
    det = np.linalg.det(metric_closed_form(example_closed_B).evaluate(P))
    np.testing.assert_allclose(det, 1 / (P[:, 1] ** 2 * oracles.ex_zeta(P[:, 1]) ** 2), rtol=1e-10)
    assert np.linalg.det(np.array(EX_G0, dtype=float)) == pytest.approx(1.0)


def test_diagonal_fixture_metric(diagonal_B):
    np.testing.assert_allclose(metric_closed_form(diagonal_B).evaluate((0.3, 0.9, 1.7)), np.diag([1, 1, 0.25]))


def test_identity_frame_gives_identity_metric():
    fr = Frame(("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1"))
    np.testing.assert_array_equal(metric_from_frame(fr, (0.1, 0.2, 0.3)), np.eye(3))


def test_frame_is_orthonormal(example_B):
    P = random_points(20, 33)
    G = metric_closed_form(example_B).evaluate(P)
    E = evaluate_matrix(example_B.matrix, P)
    gram = np.einsum("nai,nij,nbj->nab", E, G, E)
    assert np.abs(gram - np.eye(3)).max() <= 1e-10


def test_metric_field_symmetrizes_and_reports_minor():
    m = MetricField((("1", "2", "0"), ("5", "1", "0"), ("0", "0", "1")))
    assert m[1, 0] is m[0, 1]
    with pytest.raises(NotPositiveDefinite) as info:
        m.check_positive_definite(random_points(3, 1))
    assert info.value.to_dict()["minor"] == 2


# ---------------------------------------------------------------- forms


def test_contact_form_of_worked_example(example_closed_B):
    eta = contact_form(example_closed_B)
    P = random_points(20, 34)
    vals = evaluate_many(list(eta), P)
    np.testing.assert_allclose(vals[0], 1.0)
    np.testing.assert_allclose(vals[1], 0.0, atol=1e-15)
    np.testing.assert_allclose(vals[2], P[:, 1] ** 2, rtol=1e-14)


def test_contact_form_duality(example_B):
    P = BOX.points()
    eta = evaluate_many(list(contact_form(example_B)), P).T
    E = evaluate_matrix(example_B.matrix, P)
    np.testing.assert_allclose(np.einsum("nai,ni->na", E, eta), np.tile([0.0, 0.0, 1.0], (len(P), 1)), atol=1e-12)


def test_contact_form_on_zero_F_branch(linear_B):
    eta = contact_form(linear_B)
    vals = evaluate_many(list(eta), random_points(5, 35))
    np.testing.assert_allclose(vals[1], -random_points(5, 35)[:, 2])  # -(alpha/beta) = -x3
    np.testing.assert_allclose(vals[2], 0.0, atol=0)


def test_exterior_derivative():
    d = exterior_derivative(("1", "0", "0"))
    assert all(f.is_zero() for row in d for f in row)
    d = exterior_derivative(("1", "0", "x2^2"))
    assert evaluate(d[1][2], P0) == 2.0 and evaluate(d[2][1], P0) == -2.0


def test_reeb_condition(example):
    P = random_points(20, 36)
    dEta = evaluate_matrix(example.d_eta, P)
    assert np.abs(dEta[:, 0, :]).max() <= 1e-12  # xi = d/dx1


def test_wedge_volume():
    assert evaluate(wedge_volume_coefficient(("1", "0", "x2^2")), P0) == pytest.approx(2.0)
    assert wedge_volume_coefficient(("1", "0", "0")).is_zero()


def test_wedge_volume_linear_fixture(linear, linear_B, pts20):
    w = evaluate_many([wedge_volume_coefficient(linear.eta)], pts20)[0]
    beta, zeta = evaluate_many([linear_B.beta, linear_B.zeta], pts20)
    np.testing.assert_allclose(w, -2 / (beta * zeta), atol=1e-8)


# ---------------------------------------------------------------- phi and h


def test_phi_matches_frame_oracle(example_closed, pts20):
    phi = phi_in_coordinates(example_closed, pts20)
    for k, p in enumerate(pts20):
        np.testing.assert_allclose(phi[k], ex_phi(p), atol=1e-12)


def test_phi_identities(example, pts20):
    phi = phi_in_coordinates(example, pts20)
    eta = evaluate_many(list(example.eta), pts20).T
    xi = evaluate_many(list(example.xi), pts20).T
    outer = xi[:, :, None] * eta[:, None, :]
    assert np.abs(phi @ phi + np.eye(3) - outer).max() <= 1e-10
    assert np.abs(np.einsum("nij,nj->ni", phi, xi)).max() <= 1e-12
    assert np.abs(np.trace(phi, axis1=1, axis2=2)).max() <= 1e-12


def test_h_matches_lie_derivative_oracle(example_closed, pts20):
    # xi = d/dx1, so (L_xi phi) is the x1-derivative of the coordinate components
    h = h_tensor(example_closed, pts20)
    for k, p in enumerate(pts20):
        np.testing.assert_allclose(h[k], 0.5 * oracles.fd_partial(ex_phi, p, 0), atol=1e-8)


def test_h_eigenvectors_at_reference_point(example):
    h = h_tensor(example, np.array(P0))
    E = oracles.ex_rows(np.array(P0))
    np.testing.assert_allclose(h @ E[0], 0.5 * E[0], atol=1e-10)
    np.testing.assert_allclose(h @ E[1], -0.5 * E[1], atol=1e-10)
    np.testing.assert_allclose(h @ E[2], 0, atol=1e-10)


def test_h_identities(example, linear, pts20):
    for s in (example, linear):
        h = h_tensor(s, pts20)
        phi = phi_in_coordinates(s, pts20)
        assert np.abs(np.trace(h, axis1=1, axis2=2)).max() <= 1e-8
        assert np.abs(np.trace(h @ phi, axis1=1, axis2=2)).max() <= 1e-8
        assert np.abs(h @ phi + phi @ h).max() <= 1e-8


def test_k_contact_fixture_has_vanishing_h(linear, pts20):
    assert np.abs(h_tensor(linear, pts20)).max() <= 1e-8


# ---------------------------------------------------------------- invariants


def test_frame_invariants_reference_point(example):
    fi = frame_invariants(example, np.array(P0))
    assert (float(fi.lam), float(fi.a), float(fi.b), float(fi.c)) == pytest.approx((0.5, -1.5, -1.0, -2.0), abs=1e-9)


def test_lambda_matches_h_eigenvalue(example, pts20):
    fi = frame_invariants(example, pts20)
    h = h_tensor(example, pts20)
    E = evaluate_matrix(example.frame.matrix, pts20)
    he1 = np.einsum("nij,nj->ni", h, E[:, 0])
    np.testing.assert_allclose(he1, fi.lam[:, None] * E[:, 0], atol=1e-8)
    np.testing.assert_allclose(fi.lam, 1 / (2 * pts20[:, 1]), atol=1e-8)


def test_degenerate_frame():
    fr = Frame(("0", "1", "0"), ("0", "0", "1"), ("1", "0", "0"))
    with pytest.raises(DegenerateFrame):
        frame_invariants(fr, (0.1, 0.2, 0.3))


# ---------------------------------------------------------------- axioms


def test_axioms_worked_example(example, box):
    P = box.points()[::10][:50]
    rep = verify_axioms(example, P)
    assert rep.passed, rep.maxima


def test_axioms_detect_perturbed_metric(example, pts20):
    G = example.g.evaluate(pts20).copy()
    G[:, 0, 0] += 0.1
    rep = verify_axioms(example, pts20, g=G)
    assert rep.maxima["metric_compat"] > 0.01 and not rep.passed


def test_eta_of_xi_is_exact(example, linear, pts20):
    for s in (example, linear):
        assert verify_axioms(s, pts20).maxima["eta_xi"] == 0.0


def test_structure_to_dict(example):
    d = example.to_dict()
    assert set(d) >= {"g", "eta", "xi", "phi"}


# ---------------------------------------------------------------- deformation

HEIS = Frame(("1", "0", "0"), ("0", "1", "4*x1"), ("0", "0", "1"))


def test_heisenberg_deformation(box):
    res = deform_to_associated(DeformationInput(HEIS), box)
    P = box.points()
    c = structure_functions(res.structure.frame, P)
    assert np.abs(c[:, 2, 0, 1] - 2).max() <= 1e-9
    # oracle: bar e = e / 2, so [bar e1, bar e2] = d3 = 2 bar e3
    half = lambda v: (lambda p: 0.5 * np.asarray(v(p)))
    e1 = half(lambda p: np.array([1.0, 0, 0]))
    e2 = half(lambda p: np.array([0, 1.0, 4 * p[0]]))
    for p in P[:5]:
        np.testing.assert_allclose(oracles.fd_bracket(e1, e2, p), [0, 0, 1], atol=1e-9)
    assert verify_axioms(res.structure, P).passed
    assert any("divergence free" in n for n in res.notes)
    assert res.divergence_max <= 1e-9


def test_nonconstant_f_deformation_is_flagged(box):
    # hypotheses (1)-(3) hold, but e1(f) = 2 != 0 leaves d eta'(e1', e3') = e1(f)/2 nonzero
    fr = Frame(("1", "0", "0"), ("0", "1", "x1^2 + 2*x1"), ("0", "0", "1"))
    res = deform_to_associated(DeformationInput(fr), box)
    P = box.points()
    np.testing.assert_allclose(evaluate_many([res.f], P)[0], 2 * P[:, 0] + 2, rtol=1e-14)
    assert res.c312_max_error <= 1e-9
    assert any("not associated" in n for n in res.notes)
    rep = verify_axioms(res.structure, P)
    assert {"deta_compat", "reeb"} <= set(rep.failures())
    assert rep.maxima["reeb"] > 0.1


@pytest.mark.parametrize(
    "frame,number",
    [(Frame(("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1")), 1),
     (Frame(("1", "0", "0"), ("0", "1", "4*x1 + x2*x3"), ("0", "0", "1")), 2),
     (Frame(("2 + x3", "0", "0"), ("0", "1", "4*x1"), ("0", "0", "1")), 3)],
)
def test_deformation_hypotheses(frame, number, box):
    with pytest.raises(HypothesisViolated) as info:
        deform_to_associated(DeformationInput(frame), box)
    assert info.value.numbers == {number}


def test_structure_from_frame_round_trip(example_closed_B, pts20):
    s = structure_from_frame(Frame(*example_closed_B.matrix))
    np.testing.assert_allclose(s.g.evaluate(pts20), metric_closed_form(example_closed_B).evaluate(pts20), rtol=1e-10)


# ---------------------------------------------------------------- t-tensor


def test_identity_deformation(example_closed_B, pts20):
    g = metric_closed_form(example_closed_B)
    t = TTensorParams(iota=parse("0"), kappa=ln(g[1, 1]), nu=ln(g[2, 2]))
    gamma = deform_metric_general(example_closed_B, t, pts20)
    np.testing.assert_allclose(gamma.evaluate(pts20), g.evaluate(pts20), rtol=1e-12, atol=1e-12)


def test_deformation_to_identity(pts20):
    B = build_simplified_B("0.3*x3", "x2", "x1", "1 + x3", "-1/x2^2")
    a, b, e, F, z = B.alpha, B.beta, B.epsilon, B.F, B.zeta
    t = TTensorParams(rho=a / b, sigma=F / z, upsilon=(e - a * b * F) / (b**2 * z))
    gamma = deform_metric_general(B, t, pts20)
    np.testing.assert_allclose(gamma.evaluate(pts20), np.tile(np.eye(3), (20, 1, 1)), atol=1e-12)


def test_huge_rho_is_not_positive_definite(example_closed_B, pts20):
    with pytest.raises(NotPositiveDefinite) as info:
        deform_metric_general(example_closed_B, TTensorParams(rho=parse("1000000")), pts20)
    assert info.value.to_dict()["minor"] == 2


def test_domain_argument_accepted(example_closed_B):
    g = metric_closed_form(example_closed_B)
    t = TTensorParams(kappa=ln(g[1, 1]), nu=ln(g[2, 2]))
    gamma = deform_metric_general(example_closed_B, t, Domain((0.5,) * 3, (2.0,) * 3, (3, 3, 3)))
    assert isinstance(gamma, MetricField)
