from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import random_points
from contact_metric import (Domain, Frame, SingularMatrix, ZeroOnDomain, bracket_coefficients,
                            build_simplified_B, evaluate, evaluate_many, frame_fields, invert_B,
                            lie_bracket, parse, structure_functions, to_text)
from contact_metric.frames import evaluate_matrix


def test_delta_of_worked_example(example_closed_B):
    assert evaluate(example_closed_B.delta, (1.3, 0.7, 0.2)) == pytest.approx(1.0, abs=1e-15)


def test_delta_all_zero_numerator():
    B = build_simplified_B("0", "1", "0", "0", "1")
    assert to_text(B.delta) == "0"


def test_beta_vanishing_on_domain():
    dom = Domain((0.5, -1.0, 0.5), (2.0, 1.0, 2.0), (4, 4, 4))
    with pytest.raises(ZeroOnDomain):
        build_simplified_B("0", "x2", "x1", "1", "-1", domain=dom)


def test_worked_example_frame_fields(example_closed_B):
    fr = frame_fields(example_closed_B)
    P = random_points(10, 3)
    got = evaluate_matrix(fr.matrix, P)
    for k, p in enumerate(P):
        np.testing.assert_allclose(got[k], oracles.ex_rows(p), rtol=1e-15, atol=1e-15)


def test_zeta_sign_flips_only_third_component_of_e2():
    B1 = build_simplified_B("x3", "x2", "x1*x3", "1 + x2", "x2 + 2")
    B2 = build_simplified_B("x3", "x2", "x1*x3", "1 + x2", "-(x2 + 2)")
    P = random_points(6, 4)
    m1, m2 = evaluate_matrix(B1.matrix, P), evaluate_matrix(B2.matrix, P)
    diff = m1 - m2
    diff[:, 1, 2] = m1[:, 1, 2] + m2[:, 1, 2]
    assert np.abs(diff).max() == 0.0


def test_identity_like_frame():
    fr = frame_fields(build_simplified_B("0", "1", "1", "0", "1"))
    np.testing.assert_array_equal(evaluate_matrix(fr.matrix, (0.3, 0.4, 0.5)),
                                  [[0, 1, 0], [0, 1, 1], [1, 0, 0]])


def test_inverse_of_worked_example(example_closed_B):
    W = invert_B(example_closed_B, (1, 1, 0))
    # rows: d1 = e3, d2 = e1, d3 = e1 - e2 + e3
    np.testing.assert_allclose(W, [[0, 0, 1], [1, 0, 0], [1, -1, 1]], atol=1e-15)
    np.testing.assert_allclose(W, np.linalg.inv(oracles.ex_rows((1.0, 1.0, 0.0))), atol=1e-15)


def test_inverse_identity_and_singular():
    np.testing.assert_array_equal(invert_B(Frame(("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1")), (1, 2, 3)),
                                  np.eye(3))
    with pytest.raises(SingularMatrix):
        invert_B(build_simplified_B("0", "x2", "x1", "1", "-1"), (1, 0, 0))


def test_lie_bracket_coordinate():
    br = lie_bracket(("1", "0", "0"), ("0", "x1", "0"))
    assert [to_text(c) for c in br] == ["0", "1", "0"]


def test_worked_example_brackets(example_closed_B):
    fr = frame_fields(example_closed_B)
    P = random_points(10, 5)
    b31 = evaluate_many(list(lie_bracket(fr.e3, fr.e1)), P)
    b23 = evaluate_many(list(lie_bracket(fr.e2, fr.e3)), P)
    assert np.abs(b31).max() == 0.0
    for k, p in enumerate(P):
        np.testing.assert_allclose(b23[:, k], -oracles.ex_e1(p) / p[1], atol=1e-12)
        np.testing.assert_allclose(b23[:, k], oracles.fd_bracket(oracles.ex_e2, oracles.ex_e3, p), atol=1e-8)


def test_structure_functions_worked_example(example_closed_B):
    c = structure_functions(example_closed_B, (1, 1, 0))
    assert c[0, 1, 2] == pytest.approx(-1, abs=1e-12)
    assert np.abs(c[:, 2, 0]).max() <= 1e-12
    assert c[2, 0, 1] == pytest.approx(2, abs=1e-12)
    # hand bracket: [e1, e2] = (x1/x2) e1 - 2 e2 + 2 e3
    assert c[0, 0, 1] == pytest.approx(1, abs=1e-12)
    assert c[1, 0, 1] == pytest.approx(-2, abs=1e-12)


def test_structure_functions_commuting_frame():
    fr = Frame(("2", "0", "0"), ("0", "1", "1"), ("0", "0", "3"))
    assert np.abs(structure_functions(fr, random_points(5, 6))).max() == 0.0


def _generic_B():
    return build_simplified_B("0.3*x2*x3 + 0.1", "1 + 0.2*x2^2", "x1*x2 - 0.5*x3", "1 + 0.1*x3^2",
                              "-1/(x2^2 + x3)")


def test_two_routes_and_fd_oracle():
    B = _generic_B()
    P = random_points(30, 7)
    c1 = structure_functions(B, P)
    c2 = bracket_coefficients(B, P)
    assert np.abs(c1 - c2).max() <= 1e-9
    # numeric oracle: brackets by finite differences of the evaluated rows
    rows = lambda p: evaluate_matrix(B.matrix, p)
    for k, p in enumerate(P[:5]):
        W = np.linalg.inv(rows(p))
        for a in range(3):
            for b in range(3):
                br = oracles.fd_bracket(lambda q: rows(q)[a], lambda q: rows(q)[b], p)
                np.testing.assert_allclose(br @ W, c1[k, :, a, b], atol=1e-7)


def test_structure_functions_antisymmetric():
    c = structure_functions(_generic_B(), random_points(20, 8))
    assert np.abs(c + np.swapaxes(c, -1, -2)).max() <= 1e-12


def test_det_is_beta_zeta():
    B = _generic_B()
    P = random_points(20, 9)
    det = np.linalg.det(evaluate_matrix(B.matrix, P))
    beta, zeta = evaluate_many([B.beta, B.zeta], P)
    np.testing.assert_allclose(det, beta * zeta, rtol=1e-12)


def test_parse_inputs_are_accepted():
    B = build_simplified_B(parse("0"), "x2", "x1", 1, "-1/x2^2")
    assert evaluate(B.delta, (0.1, 0.5, 0.0)) == 1.0
