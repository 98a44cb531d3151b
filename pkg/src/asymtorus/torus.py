"""Smooth noncommutative torus: finite Fourier series in U1, U2 with U1 U2 = e^{2 pi i theta} U2 U1.

Elements are stored in the normal order U1^m U2^n.  Two coefficient paths are
supported.  With a rational ``theta = p/q`` coefficients are exact elements of
Q[z, P, I] / (Phi_q(z), I^2 + 1), where z = e^{2 pi i / q}, P = pi and I = i;
the normal form modulo that Groebner basis makes equality exact.  With a float
``theta`` coefficients are complex numbers.  :meth:`TorusElement.to_float`
converts between them.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
import sympy as sp
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

EXACT_RING, ZETA, PI, IMAG = ring("z,P,I", QQ)


class ThetaMismatchError(ValueError):
    pass


class PositivityError(ValueError):
    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def _is_exact(theta) -> bool:
    return isinstance(theta, (Fraction, int, sp.Rational)) and not isinstance(theta, bool)


def _denominator(theta) -> int:
    return int(Fraction(str(theta)).denominator) if isinstance(theta, sp.Rational) else \
        Fraction(theta).denominator


@lru_cache(maxsize=None)
def _relations(q: int) -> tuple:
    phi = sp.Poly(sp.cyclotomic_poly(q, sp.Symbol("x")), sp.Symbol("x")).all_coeffs()
    deg = len(phi) - 1
    cyc = sum((EXACT_RING(int(c)) * ZETA ** (deg - i) for i, c in enumerate(phi)), EXACT_RING(0))
    return (cyc, IMAG ** 2 + 1)


def _reduce(c: PolyElement, q: int) -> PolyElement:
    return c.rem(list(_relations(q)))


def _exact_value(c, q: int) -> PolyElement:
    if isinstance(c, PolyElement):
        return _reduce(c, q)
    if isinstance(c, complex):
        re, im = Fraction(c.real), Fraction(c.imag)
        return EXACT_RING(QQ(re.numerator, re.denominator)) + \
            EXACT_RING(QQ(im.numerator, im.denominator)) * IMAG
    if isinstance(c, sp.Basic):
        expr = sp.expand(c).subs({sp.I: sp.Symbol("I"), sp.pi: sp.Symbol("P")})
        return _reduce(EXACT_RING.from_expr(expr), q)
    f = Fraction(c)
    return EXACT_RING(QQ(f.numerator, f.denominator))


def exact_to_complex(c, q: int) -> complex:
    """Numerical value of an exact coefficient."""
    if not isinstance(c, PolyElement):
        return complex(c)
    z = cmath.exp(2j * math.pi / q)
    total = 0j
    for (ez, ep, ei), v in c.terms():
        total += float(v) * z ** ez * math.pi ** ep * 1j ** ei
    return total


def _phase(theta, p: int):
    """e^{2 pi i theta p}; a power of z when theta is rational."""
    if _is_exact(theta):
        f = Fraction(str(theta)) if isinstance(theta, sp.Rational) else Fraction(theta)
        q = f.denominator
        return _reduce(ZETA ** ((f.numerator * p) % q), q)
    return cmath.exp(2j * math.pi * theta * p)


def _conj(c, q: int | None):
    if isinstance(c, PolyElement):
        return _reduce(c.compose([(ZETA, ZETA ** (q - 1)), (IMAG, -IMAG)]), q)
    return complex(c).conjugate()


@dataclass(frozen=True)
class TorusElement:
    """Finite sum of a_{mn} U1^m U2^n."""

    theta: object
    coeffs: Mapping[tuple[int, int], object] = field(default_factory=dict)
    spectral_floor: float | None = field(default=None, compare=False)

    def __post_init__(self):
        exact = _is_exact(self.theta)
        clean = {}
        for (m, n), c in dict(self.coeffs).items():
            c = _exact_value(c, self.q) if exact else complex(c)
            if c != 0:
                clean[(int(m), int(n))] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    # constructors
    @classmethod
    def one(cls, theta) -> "TorusElement":
        return cls(theta, {(0, 0): 1})

    @classmethod
    def monomial(cls, theta, m: int, n: int, c=1) -> "TorusElement":
        return cls(theta, {(m, n): c})

    @property
    def exact(self) -> bool:
        return _is_exact(self.theta)

    @property
    def q(self) -> int | None:
        """Denominator of a rational theta (the order of the phase root of unity)."""
        return _denominator(self.theta) if self.exact else None

    def coeff_complex(self, key: tuple[int, int]) -> complex:
        return exact_to_complex(self.coeffs.get(key, 0), self.q) if self.exact else \
            complex(self.coeffs.get(key, 0))

    @property
    def degree(self) -> int:
        return max((max(abs(m), abs(n)) for m, n in self.coeffs), default=0)

    def _check(self, other: "TorusElement"):
        if self.theta != other.theta:
            raise ThetaMismatchError(f"theta {self.theta} != {other.theta}")

    def __add__(self, other):
        if not isinstance(other, TorusElement):
            other = TorusElement(self.theta, {(0, 0): other})
        self._check(other)
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0) + c
        return TorusElement(self.theta, out)

    __radd__ = __add__

    def __neg__(self):
        return TorusElement(self.theta, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TorusElement):
            other = self._scalar(other)
            return TorusElement(self.theta, {k: c * other for k, c in self.coeffs.items()})
        return mul(self, other)

    def __rmul__(self, other):
        other = self._scalar(other)
        return TorusElement(self.theta, {k: other * c for k, c in self.coeffs.items()})

    def _scalar(self, c):
        return _exact_value(c, self.q) if self.exact else complex(c)

    def __eq__(self, other):
        if not isinstance(other, TorusElement) or self.theta != other.theta:
            return False
        keys = set(self.coeffs) | set(other.coeffs)
        return all(self.coeffs.get(k, 0) == other.coeffs.get(k, 0) for k in keys)

    def isclose(self, other: "TorusElement", tol: float = 1e-12) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeff_complex(k) - other.coeff_complex(k)) <= tol for k in keys)

    def star(self) -> "TorusElement":
        # (U1^m U2^n)^* = U2^-n U1^-m = e^{-2 pi i theta m n} U1^-m U2^-n
        return TorusElement(self.theta, {(-m, -n): _conj(c, self.q) * _phase(self.theta, -m * n)
                                         for (m, n), c in self.coeffs.items()})

    def is_selfadjoint(self, tol: float = 1e-12) -> bool:
        return self == self.star() if self.exact else self.isclose(self.star(), tol)

    def trace(self):
        return self.coeffs.get((0, 0), 0)

    def to_float(self) -> "TorusElement":
        return TorusElement(float(self.theta), {k: self.coeff_complex(k) for k in self.coeffs},
                            self.spectral_floor)

    def to_json(self) -> dict:
        if self.exact:
            f = Fraction(str(self.theta)) if isinstance(self.theta, sp.Rational) else Fraction(self.theta)
            return {"theta": f"{f.numerator}/{f.denominator}",
                    "coeffs": [{"m": m, "n": n, "terms": [[ez, ep, ei, str(v)]
                                                          for (ez, ep, ei), v in sorted(c.terms())]}
                               for (m, n), c in self.coeffs.items()]}
        return {"theta": float(self.theta),
                "coeffs": [{"m": m, "n": n, "re": float(c.real), "im": float(c.imag)}
                           for (m, n), c in self.coeffs.items()]}

    @classmethod
    def from_json(cls, data: dict | str) -> "TorusElement":
        if isinstance(data, str):
            data = json.loads(data)
        theta = data["theta"]
        theta = Fraction(theta) if isinstance(theta, str) else float(theta)
        coeffs = {}
        for c in data["coeffs"]:
            if "terms" in c:
                val = EXACT_RING(0)
                for ez, ep, ei, v in c["terms"]:
                    f = Fraction(v)
                    val += EXACT_RING(QQ(f.numerator, f.denominator)) * ZETA ** ez * PI ** ep * IMAG ** ei
            else:
                val = complex(c["re"], c["im"])
            coeffs[(c["m"], c["n"])] = val
        return cls(theta, coeffs)


def mul(x: TorusElement, y: TorusElement) -> TorusElement:
    """Twisted convolution: U1^a U2^b * U1^c U2^d = e^{-2 pi i theta b c} U1^{a+c} U2^{b+d}."""
    x._check(y)
    out: dict = {}
    for (a, b), cx in x.coeffs.items():
        for (c, d), cy in y.coeffs.items():
            key = (a + c, b + d)
            out[key] = out.get(key, 0) + cx * cy * _phase(x.theta, -b * c)
    return TorusElement(x.theta, out)


def delta(mu: int, x: TorusElement) -> TorusElement:
    """delta_mu(U_nu) = 2 pi i delta_mu^nu U_nu."""
    if mu not in (1, 2):
        raise ValueError("mu must be 1 or 2")
    two_pi_i = 2 * PI * IMAG if x.exact else 2j * math.pi
    return TorusElement(x.theta, {(m, n): two_pi_i * (m if mu == 1 else n) * c
                                  for (m, n), c in x.coeffs.items()})


def trace(x: TorusElement):
    return x.trace()


# ---------------------------------------------------------------- GNS truncation

@dataclass(frozen=True)
class GnsBasis:
    """Fourier modes e_{mn} = U1^m U2^n with |m|, |n| <= cutoff, in row-major order."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError("cutoff must be nonnegative")

    @property
    def size(self) -> int:
        return (2 * self.cutoff + 1) ** 2

    @property
    def spinor_size(self) -> int:
        return 2 * self.size

    def modes(self) -> np.ndarray:
        r = np.arange(-self.cutoff, self.cutoff + 1)
        m, n = np.meshgrid(r, r, indexing="ij")
        return np.stack([m.ravel(), n.ravel()], axis=1)

    def index(self, m: int, n: int) -> int:
        N = self.cutoff
        if abs(m) > N or abs(n) > N:
            raise KeyError((m, n))
        return (m + N) * (2 * N + 1) + (n + N)

    def interior(self, margin: int) -> np.ndarray:
        """Indices of modes at least ``margin`` steps away from the cutoff boundary."""
        mn = self.modes()
        lim = self.cutoff - margin
        return np.flatnonzero((np.abs(mn[:, 0]) <= lim) & (np.abs(mn[:, 1]) <= lim))


def _gns(x: TorusElement, basis: GnsBasis, right: bool) -> np.ndarray:
    theta = float(x.theta)
    N = basis.cutoff
    mn = basis.modes()
    out = np.zeros((basis.size, basis.size), dtype=complex)
    cols = np.arange(basis.size)
    for (a, b), c in x.coeffs.items():
        p, q = mn[:, 0], mn[:, 1]
        if right:
            # e_{pq} U1^a U2^b = e^{-2 pi i theta q a} e_{p+a, q+b}
            phase = np.exp(-2j * np.pi * theta * q * a)
        else:
            # U1^a U2^b e_{pq} = e^{-2 pi i theta b p} e_{p+a, q+b}
            phase = np.exp(-2j * np.pi * theta * b * p)
        tp, tq = p + a, q + b
        keep = (np.abs(tp) <= N) & (np.abs(tq) <= N)
        rows = (tp[keep] + N) * (2 * N + 1) + (tq[keep] + N)
        out[rows, cols[keep]] += x.coeff_complex((a, b)) * phase[keep]
    return out


def gns_left(x: TorusElement, basis: GnsBasis) -> np.ndarray:
    """Matrix of b -> x b; entries that would leave the index box are dropped."""
    return _gns(x, basis, right=False)


def gns_right(x: TorusElement, basis: GnsBasis) -> np.ndarray:
    """Matrix of b -> b x (the commutant, where k lives); boundary rows are dropped."""
    return _gns(x, basis, right=True)


def vacuum_trace(A: np.ndarray, basis: GnsBasis) -> complex:
    """GNS trace t(a) = (1, a 1) read off an operator matrix."""
    i = basis.index(0, 0)
    return A[i, i]


def normalized_trace(A: np.ndarray) -> complex:
    return np.trace(A) / A.shape[0]


def matrix_to_csv(A: np.ndarray, tol: float = 0.0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "re", "im"])
    rows, cols = np.nonzero(np.abs(A) > tol)
    for r, c in zip(rows, cols):
        w.writerow([int(r), int(c), repr(float(A[r, c].real)), repr(float(A[r, c].imag))])
    return buf.getvalue()


def sparsity_blocks(A: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of the sparsity graph of A."""
    _, labels = connected_components(csr_matrix(A != 0), directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, splits)


def min_eigenvalue(A: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix, block by block."""
    return min(float(np.linalg.eigvalsh(A[np.ix_(i, i)])[0]) for i in sparsity_blocks(A))



# ---------------------------------------------------------------- positive k

def _as_profile(profile) -> dict[tuple[int, int], complex]:
    if isinstance(profile, Mapping):
        return {tuple(k): v for k, v in profile.items()}
    return {(int(m), int(n)): c for m, n, c in profile}


def make_positive_k(profile: Mapping | Iterable, floor: float, theta: float = 0.0,
                    c: float = 1.0, cutoff: int = 12) -> TorusElement:
    """Return k = c*1 + profile, checked positive on a GNS truncation.

    The profile must be self-adjoint.  Positivity is certified by the smallest
    eigenvalue of the truncated right-multiplication matrix, which is stored in
    ``spectral_floor``.
    """
    theta = float(theta)
    p = TorusElement(theta, {k: complex(v) for k, v in _as_profile(profile).items()})
    if not p.is_selfadjoint(1e-12):
        raise ValueError("k profile must be self-adjoint")
    k = p + TorusElement(theta, {(0, 0): complex(c)})
    basis = GnsBasis(max(cutoff, k.degree))
    lo = min_eigenvalue(gns_right(k, basis))
    if lo < floor:
        raise PositivityError(f"k has eigenvalue {lo:.6g} below floor {floor}", lo)
    return TorusElement(theta, k.coeffs, spectral_floor=lo)


def cosine_profile(eps: float, axis: int = 1) -> dict[tuple[int, int], float]:
    """eps (U + U^*) for U = U1 (axis 1) or U2 (axis 2)."""
    if axis == 1:
        return {(1, 0): eps, (-1, 0): eps}
    return {(0, 1): eps, (0, -1): eps}


def inverse_cosine_profile(c: float, order: int, axis: int = 2) -> tuple[float, dict]:
    """Fourier data of 1/(c + cos 2 pi y), truncated at ``order``.

    Returns ``(constant, profile)`` suitable for :func:`make_positive_k`.
    Uses 1/(c + cos phi) = (c^2-1)^{-1/2} sum_n (-rho)^{|n|} e^{i n phi},
    rho = c - sqrt(c^2 - 1); requires c > 1.
    """
    if c <= 1:
        raise PositivityError("1/(c + cos y) needs c > 1", c - 1)
    root = math.sqrt(c * c - 1)
    rho = c - root
    prof = {}
    for j in range(1, order + 1):
        a = (-rho) ** j / root
        key_p, key_m = ((j, 0), (-j, 0)) if axis == 1 else ((0, j), (0, -j))
        prof[key_p] = a
        prof[key_m] = a
    return 1 / root, prof


def random_positive_k(rng: np.random.Generator, theta: float, degree: int = 2,
                      amplitude: float = 0.25, floor: float = 0.2,
                      cutoff: int = 12) -> TorusElement:
    """Random self-adjoint k = 1 + h with ||h|| roughly ``amplitude``."""
    modes = [(m, n) for m in range(-degree, degree + 1) for n in range(-degree, degree + 1)
             if (m, n) > (0, 0)]
    raw = rng.normal(size=(len(modes), 2)) @ np.array([1, 1j])
    raw *= amplitude / (2 * np.abs(raw).sum())
    h = TorusElement(theta, {mn: c for mn, c in zip(modes, raw)})
    h = h + h.star()
    return make_positive_k(h.coeffs, floor, theta, c=1.0, cutoff=cutoff)
