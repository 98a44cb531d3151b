"""Independent numerical cross-checks of the closed forms and of the trace lemma."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rearrangement as ra
from .curvature import b2_symbol
from .spectral import apply_modular
from .symbols import even_part, spinor_reduce


def b2_descriptors() -> list[ra.IntegralDescriptor]:
    """Distinct integral shapes of the plain and chiral even parts of b2 (unit coefficient)."""
    ev = even_part(b2_symbol())
    shapes = {}
    for chiral in (False, True):
        for d in ra.describe_expr(spinor_reduce(ev, chiral=chiral)):
            shapes.setdefault(d.shape, ra.IntegralDescriptor(d.n, d.m, d.k1, d.k2, d.operands))
    return list(shapes.values())


@dataclass
class QuadratureSweep:
    count: int
    max_error: float
    worst: dict


def closed_value(d: ra.IntegralDescriptor, s: float, t: float) -> float:
    f = ra.eval_closed(d)
    return math.pi ** f.pi_power * ra.evaluate_float(f.value, s, t)


def quadrature_sweep(rng: np.random.Generator, points: int = 20,
                     descriptors: list[ra.IntegralDescriptor] | None = None) -> QuadratureSweep:
    """Max relative error of closed form vs quadrature over random (s, t) in (0.2, 5)^2."""
    ds = b2_descriptors() if descriptors is None else descriptors
    grid = rng.uniform(0.2, 5.0, size=(points, 2))
    worst, max_err = {}, 0.0
    for d in ds:
        for s, t in grid:
            exact = closed_value(d, s, t)
            approx = ra.eval_quadrature(d, s, t)
            err = abs(approx - exact) / max(abs(exact), 1e-300)
            if err > max_err:
                max_err = err
                worst = {"n": list(d.n), "m": list(d.m), "k1": d.k1, "k2": d.k2,
                         "s": float(s), "t": float(t), "closed": exact, "quadrature": approx}
    return QuadratureSweep(len(ds), max_err, worst)


def random_polynomial(rng: np.random.Generator, degree: int = 4) -> ra.ModularFunction:
    """Random polynomial in (s, t) of total degree <= degree with small rational coefficients."""
    value = ra.ZERO
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            c = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
            value += ra.FIELD(ra._ground(c)) * ra.S ** i * ra.T ** j
    if value == 0:
        value = ra.ONE
    return ra.ModularFunction(value, 0, 0, 2)


def random_positive_matrix(rng: np.random.Generator, n: int = 8) -> np.ndarray:
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T / n + 0.1 * np.eye(n)


def lemma_trial(rng: np.random.Generator, n: int = 8) -> float:
    """Relative gap between tr F(X Y) and tr (F(., 1)(X) Y) for random data."""
    K = random_positive_matrix(rng, n)
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    F = random_polynomial(rng)
    lhs = np.trace(apply_modular(F, X, Y, K))
    rhs = np.trace(apply_modular(ra.substitute(F, t=1), X, None, K) @ Y)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def lemma_sweep(rng: np.random.Generator, trials: int = 100, n: int = 8) -> float:
    return max(lemma_trial(rng, n) for _ in range(trials))
