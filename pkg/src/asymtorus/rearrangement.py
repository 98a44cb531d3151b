"""Closed-form xi-integration of even symbol words as modular functions.

Every even word of b2 has the shape

    k^n1 b0^m1 X k^n2 b0^m2 [Y k^n3 b0^m3] xi1^(2 k1) xi2^(2 k2)

with X, Y derivatives of k.  Written in the eigenbasis of k (eigenvalues mu),
its xi-integral is ``k^p F(s, t) (X.Y)`` with p = n1+n2+n3-1-2 k2,
s = mu_j/mu_i, t = mu_l/mu_i and

    F(s, t) = 2 int_0^inf dv int_0^inf du  u^(k2-1/2) v^(2 k1) s^n2 t^n3
              / ((1+v^2+u)^m1 (1+v^2+u s^2)^m2 (1+v^2+u t^2)^m3).

Evaluation substitutes u = (1+v^2) w^2.  The v-integral becomes a Beta value
(rational), the w-integrand a rational function of w^2 whose partial fractions
integrate to one power of pi times elements of Q(s, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from scipy import integrate
from sympy import QQ, field as frac_field

from .symbols import SymbolExpr, Word

FIELD, S, T = frac_field("s,t", QQ)
ONE = FIELD(1)
ZERO = FIELD(0)


class ShapeError(ValueError):
    pass


class ConvergenceError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    pass


# ---------------------------------------------------------------- Q(s, t) helpers

def _q(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def _ground(c):
    return QQ(c.numerator, c.denominator) if isinstance(c, Fraction) else QQ(c)


def compose(f, s=None, t=None):
    """Substitute field elements (or rationals) for s and/or t in f."""
    s = S if s is None else (s if hasattr(s, "numer") else FIELD(_ground(Fraction(s))))
    t = T if t is None else (t if hasattr(t, "numer") else FIELD(_ground(Fraction(t))))

    def poly(p):
        out = ZERO
        for (i, j), c in p.terms():
            out += FIELD(c) * s ** i * t ** j
        return out

    den = poly(f.denom)
    if den == 0:
        raise PoleError("denominator vanishes at the substitution point")
    return poly(f.numer) / den


def evaluate(f, s, t=1) -> Fraction:
    """Exact value of f at rational (s, t)."""
    ring = f.numer.ring
    pts = [(ring.gens[0], _ground(Fraction(s))), (ring.gens[1], _ground(Fraction(t)))]
    den = f.denom.evaluate(pts)
    if den == 0:
        raise PoleError(f"pole at s={s}, t={t}")
    return _q(f.numer.evaluate(pts)) / _q(den)


def evaluate_float(f, s: float, t: float = 1.0) -> float:
    def poly(p):
        return sum(float(c) * s ** i * t ** j for (i, j), c in p.terms())

    return poly(f.numer) / poly(f.denom)


def degree(f, var: int) -> int:
    return max(f.numer.degree(var), f.denom.degree(var), 0)


def partial_fractions(numer_degree: int, poles: list[tuple[object, int]]
                      ) -> dict[tuple[int, int], object]:
    """Decompose x^numer_degree / prod (x + c)^m over Q(s, t).

    ``poles`` lists distinct (c, m) with m > 0; the fraction must be proper.
    Returns {(pole index, j): A} with the decomposition sum A / (x + c)^j.
    """
    total = sum(m for _, m in poles)
    if numer_degree >= total:
        raise ConvergenceError("improper rational integrand")
    out = {}
    for idx, (c, m) in enumerate(poles):
        # expand g(y) = (y - c)^d / prod_{l != idx} (y + c_l - c)^{m_l} around y = 0
        series = _binomial_series(-c, numer_degree, m)
        for jdx, (cl, ml) in enumerate(poles):
            if jdx == idx:
                continue
            d = cl - c
            if d == 0:
                raise ValueError("poles must be distinct")
            series = _series_mul(series, _inverse_power_series(d, ml, m), m)
        for j in range(m):
            if series[j] != 0:
                out[(idx, m - j)] = series[j]
    return out


def recompose(numer_degree: int, poles, decomposition) -> bool:
    """Check that a decomposition sums back to x^d / prod (x + c)^m (polynomial identity in x)."""
    # multiply through by prod (x + c)^m and compare coefficients in x
    def pmul(a, b):
        out = [ZERO] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] += x * y
        return out

    def ppow(c, m):
        out = [ONE]
        for _ in range(m):
            out = pmul(out, [c, ONE])
        return out

    total = [ZERO] * (sum(m for _, m in poles) + 1)
    for (idx, j), a in decomposition.items():
        p = [a]
        for jdx, (c, m) in enumerate(poles):
            p = pmul(p, ppow(c, m - j if jdx == idx else m))
        for i, x in enumerate(p):
            total[i] += x
    want = [ZERO] * len(total)
    want[numer_degree] = ONE
    return total == want


def _binomial_series(a, d: int, order: int) -> list:
    # (y + a)^d truncated to y^(order-1)
    return [FIELD(math.comb(d, j)) * a ** (d - j) if j <= d else ZERO for j in range(order)]


def _inverse_power_series(d, m: int, order: int) -> list:
    # (y + d)^-m = d^-m sum_j binom(-m, j) (y/d)^j
    out = []
    for j in range(order):
        coef = (-1) ** j * math.comb(m + j - 1, j)
        out.append(FIELD(coef) / d ** (m + j))
    return out


def _series_mul(a: list, b: list, order: int) -> list:
    out = [ZERO] * order
    for i in range(order):
        if a[i] == 0:
            continue
        for j in range(order - i):
            out[i + j] += a[i] * b[j]
    return out


# ---------------------------------------------------------------- modular functions

@dataclass(frozen=True)
class ModularFunction:
    """``i^ipow * pi^pi_power * k^k_prefactor * value(s, t)`` with value in Q(s, t).

    One-operand functions never mention t.
    """

    value: object = ZERO
    k_prefactor: int = 0
    pi_power: int = 1
    nvars: int = 1
    ipow: int = 0

    def __post_init__(self):
        if self.nvars == 1 and degree(self.value, 1) > 0:
            raise ValueError("one-variable modular function depends on t")
        if self.value == 0:
            object.__setattr__(self, "k_prefactor", 0)
            object.__setattr__(self, "ipow", 0)

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def _compatible(self, other: "ModularFunction"):
        if self.is_zero or other.is_zero:
            return
        if (self.k_prefactor, self.pi_power, self.ipow) != (other.k_prefactor, other.pi_power, other.ipow):
            raise ValueError(f"incompatible modular functions: {self} + {other}")

    def __add__(self, other: "ModularFunction") -> "ModularFunction":
        self._compatible(other)
        base = other if self.is_zero else self
        return ModularFunction(self.value + other.value, base.k_prefactor, base.pi_power,
                               max(self.nvars, other.nvars), base.ipow)

    def __neg__(self):
        return replace(self, value=-self.value)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "ModularFunction":
        c = Fraction(c)
        return replace(self, value=self.value * FIELD(_ground(c)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModularFunction):
            return NotImplemented
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        return (self.value == other.value and self.k_prefactor == other.k_prefactor
                and self.pi_power == other.pi_power and self.ipow == other.ipow)

    def __hash__(self):
        return hash((str(self.value), self.k_prefactor, self.pi_power, self.ipow))

    def rename_t_to_s(self) -> "ModularFunction":
        return replace(self, value=_t_to_s(self.value), nvars=1)

    def __str__(self):
        return canonical_text(self)

    __repr__ = __str__

    def to_json(self) -> dict:
        return {"k_prefactor": self.k_prefactor, "pi_power": self.pi_power, "ipow": self.ipow,
                "nvars": self.nvars, "num": _grid(self.value.numer), "den": _grid(self.value.denom)}

    @classmethod
    def from_json(cls, data: dict) -> "ModularFunction":
        return cls(_from_grid(data["num"]) / _from_grid(data["den"]), data["k_prefactor"],
                   data["pi_power"], data.get("nvars", 1), data.get("ipow", 0))


def _t_to_s(f):
    if f.numer.degree(0) > 0 or f.denom.degree(0) > 0:
        raise ValueError("function depends on s; cannot rename t to s")
    return compose(f, s=ONE, t=S)


def _grid(p) -> list[list[str]]:
    ds, dt = max(p.degree(0), 0), max(p.degree(1), 0)
    grid = [["0"] * (dt + 1) for _ in range(ds + 1)]
    for (i, j), c in p.terms():
        grid[i][j] = str(_q(c))
    return grid


def _from_grid(grid) -> object:
    out = ZERO
    for i, row in enumerate(grid):
        for j, c in enumerate(row):
            if c != "0":
                out += FIELD(_ground(Fraction(c))) * S ** i * T ** j
    return out


def modular(value, k_prefactor=0, pi_power=1, nvars=None, ipow=0) -> ModularFunction:
    """Build a ModularFunction from a field element (or sympy-parsable string)."""
    if isinstance(value, str):
        value = FIELD.from_expr(__import__("sympy").sympify(value, locals={"s": S.as_expr(), "t": T.as_expr()}))
    elif not hasattr(value, "numer"):
        value = FIELD(_ground(Fraction(value)))
    if nvars is None:
        nvars = 2 if degree(value, 1) > 0 else 1
    return ModularFunction(value, k_prefactor, pi_power, nvars, ipow)


def substitute(f: ModularFunction, s=None, t=None):
    """Partially or fully evaluate; returns a ModularFunction or an exact scalar.

    Full evaluation returns the rational coefficient of ``i^ipow pi^pi_power k^k_prefactor``.
    """
    if s is not None and (t is not None or f.nvars == 1):
        return evaluate(f.value, s, 1 if t is None else t)
    value = compose(f.value, s=s, t=t)
    return replace(f, value=value, nvars=2 if degree(value, 1) > 0 else 1)


def canonical_text(f: ModularFunction) -> str:
    if f.is_zero:
        return "0"
    from sympy import factor

    expr = factor(f.value.as_expr())
    num, den = expr.as_numer_denom()
    c_num, num = num.as_coeff_Mul()
    c_den, den = den.as_coeff_Mul()
    c = Fraction(int(c_num.p), int(c_num.q)) / Fraction(int(c_den.p), int(c_den.q))
    sign = "-" if c < 0 else ""
    c = abs(c)
    pre = ("i·" if f.ipow else "")
    head = f"{c.numerator}" if c.numerator != 1 else ""
    pi = "π" if f.pi_power == 1 else ("" if f.pi_power == 0 else f"π^{f.pi_power}")
    lead = f"{head}{pi}" or "1"
    lead = f"{lead}/{c.denominator}" if c.denominator != 1 else lead
    kpart = f"·k^{f.k_prefactor}" if f.k_prefactor else ""
    body = f"({num})" if den == 1 else f"({num})/({den})"
    return f"{sign}{pre}({lead}){kpart}·{body}".replace("**", "^")


# ---------------------------------------------------------------- descriptors

@dataclass(frozen=True)
class IntegralDescriptor:
    n: tuple[int, int, int]
    m: tuple[int, int, int]
    k1: int
    k2: int
    operands: tuple[str, ...]
    coeff: Fraction = Fraction(1)
    ipow: int = 0

    @property
    def k_prefactor(self) -> int:
        return sum(self.n) - 1 - 2 * self.k2

    @property
    def converges(self) -> bool:
        return sum(self.m) - self.k1 - self.k2 - 1 > 0

    @property
    def shape(self) -> tuple:
        return (self.n, self.m, self.k1, self.k2, self.operands)


def describe(word: Word, coeff=Fraction(1)) -> IntegralDescriptor:
    if not word.is_even:
        raise ShapeError("odd xi powers integrate to zero and are not described")
    if len(word.letters) not in (1, 2):
        raise ShapeError(f"expected one or two derivative letters, got {len(word.letters)}")
    blocks = list(word.blocks) + [(0, 0)] * (3 - len(word.blocks))
    n = tuple(a for a, _ in blocks)
    m = tuple(c for _, c in blocks)
    return IntegralDescriptor(n, m, word.xi[0] // 2, word.xi[1] // 2, word.letters,
                              Fraction(coeff), word.ipow)


def describe_expr(p: SymbolExpr) -> list[IntegralDescriptor]:
    return [describe(w, c) for w, c in p]


def _half_beta_half(j: int) -> Fraction:
    """(1/pi) * (1/2) B(1/2, j - 1/2) for integer j >= 1."""
    out = Fraction(1, 2)
    for i in range(j - 1):
        out *= Fraction(2 * i + 1, 2)
    return out / math.factorial(j - 1)


def _beta_half_int(p: int, n: int) -> Fraction:
    """B(p + 1/2, n) for integers p >= 0, n >= 1 (a rational number)."""
    out = Fraction(math.factorial(n - 1))
    for i in range(n):
        out /= Fraction(2 * p + 1 + 2 * i, 2)
    return out


@lru_cache(maxsize=None)
def _closed_shape(n, m, k1, k2, nvars) -> object:
    M = sum(m)
    # v-integral: 1/2 B(k1 + 1/2, M - k2 - k1 - 1)
    v_part = Fraction(1, 2) * _beta_half_int(k1, M - k2 - k1 - 1)
    poles, scale = [], FIELD(2)  # leading 2 of the double integral
    gens = (ONE, S, T)
    for idx, (g, mult) in enumerate(zip(gens, m)):
        if mult:
            poles.append((ONE / g ** 2, mult, g))
            # (1 + g^2 w^2)^-mult = g^(-2 mult) (w^2 + g^-2)^-mult
            scale *= g ** (-2 * mult)
    scale *= S ** n[1] * T ** n[2]
    scale *= FIELD(2)  # r = w^2 gives dr = 2 w dw
    pf = partial_fractions(k2, [(c, mult) for c, mult, _ in poles])
    w_part = ZERO
    for (idx, j), a in pf.items():
        g = poles[idx][2]
        # int_0^inf (w^2 + g^-2)^-j dw = 1/2 B(1/2, j-1/2) g^(2j-1)
        w_part += a * FIELD(_ground(_half_beta_half(j))) * g ** (2 * j - 1)
    return scale * FIELD(_ground(v_part)) * w_part


def eval_closed(d: IntegralDescriptor) -> ModularFunction:
    """Exact xi-integral of one descriptor as a ModularFunction (k = 1 in value, k^p prefactor)."""
    nvars = 2 if len(d.operands) == 2 else 1
    if d.coeff == 0:
        return ModularFunction(ZERO, nvars=nvars)
    if not d.converges:
        raise ConvergenceError(f"divergent xi-integral for {d}")
    value = _closed_shape(d.n, d.m, d.k1, d.k2, nvars) * FIELD(_ground(d.coeff))
    return ModularFunction(value, d.k_prefactor, 1, nvars, d.ipow)


def eval_closed_sum(ds: Iterable[IntegralDescriptor]) -> ModularFunction:
    out = ModularFunction(ZERO)
    for d in ds:
        out = out + eval_closed(d)
    return out


def eval_quadrature(d: IntegralDescriptor, s: float, t: float = 1.0,
                    epsabs: float = 0.0, epsrel: float = 1e-13) -> float:
    """Adaptive quadrature of the xi-integral at k = 1 (imaginary unit dropped).

    With u = w^2, v = tan(a) and w = sec(a) tan(b) the integrand becomes a
    product of smooth functions on [0, pi/2]^2:
    sin^(2 k1) cos^(2M - 2k1 - 2k2 - 3) (a) times
    tan^(2 k2) sec^2 (b) prod_g (1 + g^2 tan^2 b)^(-m_g).
    """
    if s <= 0 or t <= 0:
        raise ValueError("s and t must be positive")
    if not d.converges:
        raise ConvergenceError(f"divergent xi-integral for {d}")
    (n1, n2, n3), m = d.n, d.m
    M = sum(m)
    pref = float(d.coeff) * s ** n2 * t ** n3 * 4.0
    ca = 2 * M - 2 * d.k1 - 2 * d.k2 - 3

    def fa(a):
        return math.sin(a) ** (2 * d.k1) * math.cos(a) ** ca

    def fb(b):
        c, sn = math.cos(b), math.sin(b)
        # numerator and denominator multiplied by cos^(2M) to stay finite at pi/2
        den = 1.0
        for g, mult in zip((1.0, s, t), m):
            den *= (c * c + g * g * sn * sn) ** mult
        return sn ** (2 * d.k2) * c ** (2 * M - 2 * d.k2 - 2) / den

    va, _ = integrate.quad(fa, 0, math.pi / 2, epsabs=epsabs, epsrel=epsrel, limit=400)
    vb, _ = integrate.quad(fb, 0, math.pi / 2, epsabs=epsabs, epsrel=epsrel, limit=400)
    return pref * va * vb
