import math

import numpy as np
import pytest

from asymtorus import rearrangement as ra
from asymtorus.curvature import assemble
from asymtorus.oracle import lemma_sweep
from asymtorus.spectral import (apply_modular, build_dirac, default_window, fit_heat_samples,
                                flat_spectrum, heat_fit, modular_trace_diagonal,
                                numeric_curvature_trace, spectrum_csv, zeta_zero)
from asymtorus.torus import (GnsBasis, PositivityError, TorusElement, cosine_profile,
                             make_positive_k, random_positive_k)


def rand_pos(rng, n=7):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T + 0.3 * np.eye(n)


def cmat(rng, n=7):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_constant_k_spectrum_is_flat():
    b = GnsBasis(5)
    for c in (1.0, 1.7):
        D = build_dirac(TorusElement(0.2, {(0, 0): c}), b)
        np.testing.assert_allclose(D.eigenvalues(), flat_spectrum(b, c), atol=1e-10)


def test_dirac_hermitian_and_symmetric():
    b = GnsBasis(6)
    k = random_positive_k(np.random.default_rng(0), 0.3)
    D = build_dirac(k, b)
    assert D.hermiticity_defect < 1e-14
    ev = D.eigenvalues()
    # D is off-diagonal in spinor space, so the spectrum is symmetric
    np.testing.assert_allclose(ev, -ev[::-1], atol=1e-9)
    assert sum(len(i) for i in D.blocks()) == b.spinor_size


def test_non_positive_k_rejected():
    k = TorusElement(0.2, {(0, 0): 0.1, (1, 0): 0.3, (-1, 0): 0.3})
    with pytest.raises(PositivityError):
        build_dirac(k, GnsBasis(4))


def test_fit_recovers_synthetic_coefficients():
    t = np.geomspace(1e-3, 0.05, 30)
    coef, resid, cond, warns = fit_heat_samples(t, 0.3 / t - 1.25 + 7.0 * t)
    np.testing.assert_allclose(coef, [0.3, -1.25, 7.0], rtol=1e-8, atol=1e-8)
    assert resid < 1e-10 and not warns


def test_flat_heat_trace():
    b = GnsBasis(24)
    fit = heat_fit(build_dirac(TorusElement(0.2, {(0, 0): 1.0}), b))
    assert fit.c_minus1 * 2 * math.pi == pytest.approx(1.0, abs=1e-4)
    assert abs(fit.c0) < 1e-3
    assert fit.dim_ker == 2
    assert zeta_zero(fit) == pytest.approx(fit.c0 - 2)
    assert spectrum_csv(fit.eigenvalues[:3]).startswith("index,eigenvalue\n0,")


def test_chiral_heat_trace_vanishes():
    b = GnsBasis(24)
    k = make_positive_k(cosine_profile(0.2), floor=0.1, theta=0.2)
    fit = heat_fit(build_dirac(k, b), chiral=True)
    assert max(abs(fit.c_minus1), abs(fit.c0), abs(fit.c1)) < 1e-9


def test_window_guard():
    b = GnsBasis(10)
    D = build_dirac(TorusElement(0.2, {(0, 0): 1.0}), b)
    with pytest.raises(ValueError):
        heat_fit(D, t_window=(1e-4, 0.1))
    assert default_window(b) == (0.04, 0.015)


def test_apply_modular_basic_functions():
    rng = np.random.default_rng(4)
    K, X, Y = rand_pos(rng), cmat(rng), cmat(rng)
    Ki = np.linalg.inv(K)
    one = ra.modular(1, pi_power=0, nvars=2)
    np.testing.assert_allclose(apply_modular(one, X, Y, K), X @ Y, atol=1e-9)
    s = ra.modular("s", pi_power=0)
    np.testing.assert_allclose(apply_modular(s, X, None, K), Ki @ X @ K, atol=1e-9)
    s2 = ra.modular("s", pi_power=0, nvars=2)
    np.testing.assert_allclose(apply_modular(s2, X, Y, K), Ki @ X @ K @ Y, atol=1e-9)
    t = ra.modular("t", pi_power=0)
    np.testing.assert_allclose(apply_modular(t, X, Y, K), Ki @ X @ Y @ K, atol=1e-9)


def test_apply_modular_polynomial_direct():
    rng = np.random.default_rng(5)
    K, X, Y = rand_pos(rng), cmat(rng), cmat(rng)
    Ki = np.linalg.inv(K)
    F = ra.modular("3*s**2*t - 2*t + 5", pi_power=1)

    def delta(A, e):
        return np.linalg.matrix_power(Ki, e) @ A @ np.linalg.matrix_power(K, e)
    # s acts on X alone, t on the product
    direct = 3 * delta(delta(X, 2) @ Y, 1) - 2 * delta(X @ Y, 1) + 5 * X @ Y
    np.testing.assert_allclose(apply_modular(F, X, Y, K), math.pi * direct, atol=1e-8)


def test_trace_lemma():
    assert lemma_sweep(np.random.default_rng(6), trials=15) < 1e-9


def test_diagonal_trace_matches_full():
    rng = np.random.default_rng(7)
    K, X, Y = rand_pos(rng), cmat(rng), cmat(rng)
    F = ra.modular("(1 - s)/(s*(t + 1)**2)", pi_power=1)
    full = np.trace(apply_modular(F, X, Y, K))
    # the diagonal formula uses the lemma to set t = 1
    assert modular_trace_diagonal(F, X, Y, K) == pytest.approx(full, rel=1e-9)


@pytest.fixture(scope="module")
def packages():
    return assemble("plain")[0], assemble("chiral")[0]


def test_curvature_trace_vanishes_numerically(packages):
    plain, chiral = packages
    b = GnsBasis(5)
    k = random_positive_k(np.random.default_rng(8), 0.3)
    for pkg in (plain, chiral):
        tr = numeric_curvature_trace(pkg, k, b)
        assert tr.scale > 1e-3
        assert tr.relative < 1e-10


def test_curvature_trace_detects_perturbation(packages):
    plain, _ = packages
    f = plain.entries[("d1", "d1")]
    bad = plain.with_entry(("d1", "d1"), f + ra.modular("s", f.k_prefactor, f.pi_power, 2))
    k = random_positive_k(np.random.default_rng(8), 0.3)
    assert numeric_curvature_trace(bad, k, GnsBasis(5)).relative > 1e-3


def test_curvature_trace_flat_is_zero(packages):
    tr = numeric_curvature_trace(packages[0], TorusElement(0.2, {(0, 0): 1.0}), GnsBasis(3))
    assert tr.total == 0
