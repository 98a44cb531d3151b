import cmath
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymtorus.torus import (GnsBasis, PositivityError, ThetaMismatchError, TorusElement, delta,
                             gns_left, gns_right, inverse_cosine_profile, make_positive_k,
                             random_positive_k, vacuum_trace)

THETA = Fraction(1, 5)


def U(m, n, theta=THETA):
    return TorusElement.monomial(theta, m, n)


coeff = st.integers(-3, 3).map(Fraction)
elements = st.dictionaries(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), coeff, max_size=4).map(
    lambda d: TorusElement(THETA, d))


def test_commutation_relation_exact():
    u1, u2 = U(1, 0), U(0, 1)
    lhs = u1 * u2
    rhs = u2 * u1
    # U1 U2 = e^{2 pi i theta} U2 U1, so the coefficient ratio is that phase
    ratio = lhs.coeff_complex((1, 1)) / rhs.coeff_complex((1, 1))
    assert abs(ratio - cmath.exp(2j * cmath.pi / 5)) < 1e-14
    # exactly: U1 U2 U1^-1 U2^-1 is the scalar e^{2 pi i theta}
    comm = u1 * u2 * u1.star() * u2.star()
    assert comm.coeffs.keys() == {(0, 0)}
    assert abs(comm.coeff_complex((0, 0)) - cmath.exp(2j * cmath.pi / 5)) < 1e-14


def test_commutation_relation_float():
    th = 0.3
    u1, u2 = TorusElement.monomial(th, 1, 0), TorusElement.monomial(th, 0, 1)
    assert (u1 * u2).isclose(cmath.exp(2j * cmath.pi * th) * (u2 * u1))


def test_unitarity():
    for m, n in [(1, 0), (0, 1), (2, -3)]:
        u = U(m, n)
        assert u * u.star() == TorusElement.one(THETA)
        assert u.star() * u == TorusElement.one(THETA)


@settings(max_examples=30, deadline=None)
@given(elements, elements, elements)
def test_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@settings(max_examples=30, deadline=None)
@given(elements, elements)
def test_star_antimultiplicative_and_trace(a, b):
    assert (a * b).star() == b.star() * a.star()
    assert (a * b).trace() == (b * a).trace()


@settings(max_examples=30, deadline=None)
@given(elements, elements)
def test_derivations(a, b):
    for mu in (1, 2):
        assert delta(mu, a * b) == delta(mu, a) * b + a * delta(mu, b)
        assert delta(mu, a).trace() == 0
    assert delta(1, delta(2, a)) == delta(2, delta(1, a))


def test_delta_on_generators():
    d = delta(1, U(1, 0, 0.2))
    assert d.isclose(2j * np.pi * U(1, 0, 0.2))
    assert delta(2, U(1, 0, 0.2)).isclose(TorusElement(0.2, {}))


def test_theta_mismatch():
    with pytest.raises(ThetaMismatchError):
        U(1, 0, 0.2) * U(0, 1, 0.3)


def test_json_roundtrip():
    x = TorusElement(THETA, {(1, 2): Fraction(3, 4), (-1, 0): Fraction(-2)})
    assert TorusElement.from_json(x.to_json()) == x
    y = TorusElement(0.25, {(0, 1): 0.5 + 0.25j})
    assert TorusElement.from_json(y.to_json()).isclose(y)


def test_selfadjoint_needs_twisted_conjugate():
    th = 0.2
    # (U1 U2)^* = e^{-2 pi i theta} U1^-1 U2^-1 in normal order
    w = TorusElement.monomial(th, 1, 1)
    assert (w + w.star()).is_selfadjoint()
    naive = TorusElement(th, {(1, 1): 1.0, (-1, -1): 1.0})
    assert not naive.is_selfadjoint()


def test_gns_representations():
    th, b = 0.37, GnsBasis(4)
    x = TorusElement(th, {(1, 0): 0.5, (0, -1): 1j})
    y = TorusElement(th, {(0, 1): 2.0, (-1, 1): -0.3})
    inner = GnsBasis(4).interior(2)
    Lx, Ly, Rx, Ry = gns_left(x, b), gns_left(y, b), gns_right(x, b), gns_right(y, b)
    # left is a homomorphism, right an antihomomorphism, on modes away from the cutoff
    np.testing.assert_allclose((Lx @ Ly)[np.ix_(inner, inner)], gns_left(x * y, b)[np.ix_(inner, inner)],
                               atol=1e-12)
    np.testing.assert_allclose((Rx @ Ry)[np.ix_(inner, inner)], gns_right(y * x, b)[np.ix_(inner, inner)],
                               atol=1e-12)
    np.testing.assert_allclose((Lx @ Ry)[np.ix_(inner, inner)], (Ry @ Lx)[np.ix_(inner, inner)],
                               atol=1e-12)


def test_gns_right_phase():
    th, b = 0.3, GnsBasis(2)
    R = gns_right(TorusElement.monomial(th, 1, 0), b)
    # e_{0,1} U1 = U2 U1 = e^{-2 pi i theta} U1 U2
    assert abs(R[b.index(1, 1), b.index(0, 1)] - cmath.exp(-2j * np.pi * th)) < 1e-14


def test_vacuum_trace_matches_algebra_trace():
    x = TorusElement(0.2, {(0, 0): 0.7, (1, 1): 2.0})
    b = GnsBasis(3)
    assert abs(vacuum_trace(gns_left(x, b), b) - 0.7) < 1e-14
    assert abs(vacuum_trace(gns_right(x, b), b) - 0.7) < 1e-14


def test_make_positive_k():
    k = make_positive_k({(1, 0): 0.2, (-1, 0): 0.2}, floor=0.1, theta=0.2)
    assert k.spectral_floor == pytest.approx(0.6, abs=0.02)
    with pytest.raises(PositivityError) as info:
        make_positive_k({(1, 0): 0.6, (-1, 0): 0.6}, floor=0.1, theta=0.2)
    assert info.value.eigenvalue < 0.1
    with pytest.raises(ValueError):
        make_positive_k({(1, 0): 0.2}, floor=0.1)


def test_inverse_cosine_profile():
    c0, prof = inverse_cosine_profile(2.0, order=20)
    y = 0.13
    val = c0 + sum(a * np.cos(2 * np.pi * n * y) for (m, n), a in prof.items())
    assert val == pytest.approx(1 / (2 + np.cos(2 * np.pi * y)), rel=1e-10)
    with pytest.raises(PositivityError):
        inverse_cosine_profile(0.5, 3)


def test_random_positive_k_reproducible():
    a = random_positive_k(np.random.default_rng(3), 0.2)
    b = random_positive_k(np.random.default_rng(3), 0.2)
    assert a.isclose(b)
    assert a.is_selfadjoint()
    assert a.spectral_floor > 0.2
