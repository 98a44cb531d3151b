"""Acceptance criteria 1-9, each recorded as one pass/fail line in the terminal summary."""

import math
import time

import numpy as np
import sympy as sp

from asymtorus import curvature
from asymtorus import rearrangement as ra
from asymtorus.curvature import (assemble, classical_curvature, gauss_bonnet, h_identity,
                                 section4_functionals, trace_reduce)
from asymtorus.oracle import lemma_sweep, quadrature_sweep
from asymtorus.spectral import build_dirac, heat_fit, numeric_curvature_trace
from asymtorus.symbols import dirac_square_symbols, parametrix
from asymtorus.torus import GnsBasis, cosine_profile, make_positive_k, random_positive_k
from asymtorus.verify import verify_b2

GOLDEN_THETA = (math.sqrt(5) - 1) / 2


def test_criterion_1_golden_b2(record):
    t0 = time.perf_counter()
    b2 = parametrix(*dirac_square_symbols())[2]
    plain, chiral = verify_b2(b2)[:2]
    elapsed = time.perf_counter() - t0
    ok = plain.ok and chiral.ok and elapsed < 10
    record(1, ok, f"plain {plain.size} words {'match' if plain.ok else plain.first()}; "
                  f"chiral {chiral.size} words {'match' if chiral.ok else chiral.first()}; "
                  f"{elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_2_printed_functions(record):
    curvature.b2_symbol.cache_clear()
    ra._closed_shape.cache_clear()
    t0 = time.perf_counter()
    plain_pkg, plain = assemble("plain", check=False)
    chiral_pkg, chiral = assemble("chiral", check=False)
    elapsed = time.perf_counter() - t0
    ok = plain.ok and chiral.ok and len(plain.rows) == 6 and len(chiral.rows) == 3 and elapsed < 60
    names = ", ".join(r.name for r in plain.rows + chiral.rows if r.ok)
    record(2, ok, f"exact match for {names}; normalization plain {plain.normalization}, "
                  f"chiral {chiral.normalization}; {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_3_symbolic_gauss_bonnet(record):
    plain_pkg, _ = assemble("plain")
    chiral_pkg, _ = assemble("chiral")
    res = trace_reduce(plain_pkg)
    H = ra.modular("(1 - s)/(3*s*(s + 1)**2)", k_prefactor=-3)
    chiral_ok, subs = gauss_bonnet(chiral_pkg)
    ok = res.H == H and h_identity(res.H) == 0 and chiral_ok and len(subs) == 3
    record(3, ok, f"H(s) = {res.H}; s^3 H(s) + H(1/s) = {h_identity(res.H).as_expr()}; "
                  f"G12(s,1), G21(s,1), G(1) = {[str(v.as_expr()) for v in subs.values()]}")
    assert ok


def test_criterion_4_classical_limit(record):
    diffs = verify_b2(curvature.b2_symbol())
    collapse_plain, collapse_chiral = diffs[2], diffs[3]
    check = classical_curvature()
    k, d1, d11 = curvature.K_SYM, curvature.LETTER_SYMS["d1"], curvature.LETTER_SYMS["d11"]
    target = 2 * d11 / k ** 2 - 4 * d1 ** 2 / k ** 3
    ok = (collapse_plain.ok and collapse_plain.size == 13 and collapse_chiral.ok and check.ok
          and sp.simplify(check.dressed_curvature - target) == 0)
    record(4, ok, f"collapse {collapse_plain.size} terms {'match' if collapse_plain.ok else 'differ'}; "
                  f"integral {check.integral}; dressed curvature {check.dressed_curvature}; "
                  f"chiral integral {check.chiral_integral}")
    assert ok


def test_criterion_5_quadrature_oracle(record):
    t0 = time.perf_counter()
    sweep = quadrature_sweep(np.random.default_rng(2024), points=20)
    elapsed = time.perf_counter() - t0
    ok = sweep.max_error <= 1e-8 and elapsed < 300
    record(5, ok, f"{sweep.count} descriptors x 20 points, max relative error "
                  f"{sweep.max_error:.2e} (<= 1e-8); {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_6_lemma_oracle(record):
    err = lemma_sweep(np.random.default_rng(7), trials=100, n=8)
    ok = err <= 1e-10
    record(6, ok, f"100 trials, max relative gap {err:.2e} (<= 1e-10)")
    assert ok


def _profile_fit(theta, N):
    k = make_positive_k(cosine_profile(0.2), floor=0.1, theta=theta, cutoff=N)
    return heat_fit(build_dirac(k, GnsBasis(N)))


def test_criterion_7_numerical_gauss_bonnet(record):
    t0 = time.perf_counter()
    flat = heat_fit(build_dirac(make_positive_k({}, floor=0.1, theta=0.2, cutoff=24), GnsBasis(24)))
    lines, ok = [], True
    flat_ok = abs(flat.c_minus1 * 2 * math.pi - 1) <= 0.01 and abs(flat.c0) <= 5e-3
    ok &= flat_ok
    lines.append(f"flat c_-1*2pi={flat.c_minus1 * 2 * math.pi:.6f} c0={flat.c0:.2e}")
    for label, theta in (("1/5", 0.2), ("golden", GOLDEN_THETA)):
        c24 = _profile_fit(theta, 24).c0
        c32 = _profile_fit(theta, 32).c0
        ok &= abs(c24) <= 0.02 and abs(c32) < abs(c24)
        lines.append(f"theta={label} c0(N=24)={c24:.2e} c0(N=32)={c32:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    record(7, ok, "; ".join(lines) + f"; {elapsed:.1f} s")
    assert ok


def test_criterion_8_curvature_trace(record):
    plain_pkg, _ = assemble("plain")
    chiral_pkg, _ = assemble("chiral")
    rng = np.random.default_rng(11)
    basis = GnsBasis(12)
    worst = {"plain": 0.0, "chiral": 0.0}
    for _ in range(10):
        k = random_positive_k(rng, 0.2, cutoff=12)
        for pkg in (plain_pkg, chiral_pkg):
            worst[pkg.channel] = max(worst[pkg.channel], numeric_curvature_trace(pkg, k, basis).relative)
    ok = max(worst.values()) <= 1e-8
    record(8, ok, f"10 random k at N=12, max relative trace plain {worst['plain']:.1e}, "
                  f"chiral {worst['chiral']:.1e} (<= 1e-8)")
    assert ok


def test_criterion_9_functionals(record):
    basis = GnsBasis(12)
    rng = np.random.default_rng(5)
    twobein = [section4_functionals(random_positive_k(rng, 0.2, cutoff=12), basis).twobein
               for _ in range(10)]
    profile = make_positive_k(cosine_profile(0.2), floor=0.1, theta=0.2)
    res = section4_functionals(profile, basis)
    twobein_ok = max(map(abs, twobein)) <= 1e-9 and not res.twobein_symbolic
    rosenberg_ok = abs(res.rosenberg) > 1e-4
    # not part of the criterion: the same functional on a k that mixes U1 and U2
    mixed = section4_functionals(random_positive_k(np.random.default_rng(1), 0.2), basis).rosenberg
    ok = twobein_ok and rosenberg_ok
    record(9, ok, f"two-bein max |value| {max(map(abs, twobein)):.1e} over 10 random k, symbolic "
                  f"{'0' if not res.twobein_symbolic else 'nonzero'}; Rosenberg on eps=0.2 profile "
                  f"{res.rosenberg:.1e} (needs > 1e-4, vanishes since [k, delta_1 k] = 0); "
                  f"Rosenberg on a mixed random k {mixed:.1e}")
    assert twobein_ok
    assert rosenberg_ok, "Rosenberg functional vanishes for the eps=0.2 profile"
