"""Noncommutative symbol algebra for the square of the rescaled Dirac operator.

A symbol word is an ordered product

    k^a0 b0^c0 * L1 * k^a1 b0^c1 * L2 * ... * xi1^e1 xi2^e2 * spin * i^p

where every ``Li`` is a derivative of ``k`` (``d1``, ``d2``, ``d11``, ``d12``,
``d22``), ``b0 = (1 + xi1^2 + k^2 xi2^2)^-1`` commutes with ``k`` and the
``xi`` variables are central.  ``spin`` is either the identity or the product
sigma^1 sigma^2, whose square is -1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

LETTERS = ("d1", "d2", "d11", "d12", "d22")
_FIRST_ORDER = {1: "d1", 2: "d2"}
_SECOND_ORDER = {("d1", 1): "d11", ("d1", 2): "d12", ("d2", 1): "d12", ("d2", 2): "d22"}


class UnsupportedOrderError(ValueError):
    """Raised when a third derivative of ``k`` would be required."""


@dataclass(frozen=True, order=True)
class Word:
    """Monomial key of a symbol term (everything except the rational coefficient)."""

    letters: tuple[str, ...] = ()
    blocks: tuple[tuple[int, int], ...] = ((0, 0),)
    xi: tuple[int, int] = (0, 0)
    spin: int = 0
    ipow: int = 0

    def __post_init__(self):
        if len(self.blocks) != len(self.letters) + 1:
            raise ValueError("a word needs exactly one more block than letters")
        if self.spin not in (0, 1) or self.ipow not in (0, 1):
            raise ValueError("spin and ipow must be 0 or 1")
        for letter in self.letters:
            if letter not in LETTERS:
                raise ValueError(f"unknown derivative letter {letter!r}")
        for _, c in self.blocks:
            if c < 0:
                raise ValueError("b0 powers are nonnegative")

    def times(self, other: "Word") -> tuple[int, "Word"]:
        """Concatenate two words; returns ``(sign, word)``."""
        (a1, c1), (a2, c2) = self.blocks[-1], other.blocks[0]
        blocks = self.blocks[:-1] + ((a1 + a2, c1 + c2),) + other.blocks[1:]
        sign = 1
        spin = self.spin + other.spin
        if spin == 2:
            sign, spin = -sign, 0
        ipow = self.ipow + other.ipow
        if ipow == 2:
            sign, ipow = -sign, 0
        xi = (self.xi[0] + other.xi[0], self.xi[1] + other.xi[1])
        return sign, Word(self.letters + other.letters, blocks, xi, spin, ipow)

    def with_xi(self, xi: tuple[int, int]) -> "Word":
        return Word(self.letters, self.blocks, xi, self.spin, self.ipow)

    @property
    def order(self) -> int:
        """Symbol order: xi degree minus twice the b0 count."""
        return self.xi[0] + self.xi[1] - 2 * sum(c for _, c in self.blocks)

    @property
    def is_even(self) -> bool:
        return self.xi[0] % 2 == 0 and self.xi[1] % 2 == 0


class SymbolExpr:
    """Finite sum of words with rational coefficients, kept in canonical form."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Word, Fraction] | Iterable[tuple[Word, Fraction]] = ()):
        acc: dict[Word, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for word, coeff in items:
            acc[word] = acc.get(word, Fraction(0)) + Fraction(coeff)
        self._terms = {w: c for w, c in sorted(acc.items()) if c != 0}

    # construction helpers
    @classmethod
    def word(cls, word: Word, coeff=1) -> "SymbolExpr":
        return cls([(word, Fraction(coeff))])

    @classmethod
    def scalar(cls, c=1) -> "SymbolExpr":
        return cls.word(Word(), c)

    @classmethod
    def k(cls, power: int = 1) -> "SymbolExpr":
        return cls.word(Word(blocks=((power, 0),)))

    @classmethod
    def b0(cls, power: int = 1) -> "SymbolExpr":
        return cls.word(Word(blocks=((0, power),)))

    @classmethod
    def letter(cls, name: str) -> "SymbolExpr":
        return cls.word(Word((name,), ((0, 0), (0, 0))))

    @classmethod
    def xi(cls, e1: int = 0, e2: int = 0) -> "SymbolExpr":
        return cls.word(Word(xi=(e1, e2)))

    @classmethod
    def sigma12(cls) -> "SymbolExpr":
        return cls.word(Word(spin=1))

    @classmethod
    def imag(cls) -> "SymbolExpr":
        return cls.word(Word(ipow=1))

    # container protocol
    def __iter__(self) -> Iterator[tuple[Word, Fraction]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = SymbolExpr.scalar(other)
        return isinstance(other, SymbolExpr) and self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def coeff(self, word: Word) -> Fraction:
        return self._terms.get(word, Fraction(0))

    def words(self) -> list[Word]:
        return list(self._terms)

    # arithmetic
    def __add__(self, other: "SymbolExpr") -> "SymbolExpr":
        return SymbolExpr(list(self) + list(_as_expr(other)))

    __radd__ = __add__

    def __neg__(self) -> "SymbolExpr":
        return SymbolExpr((w, -c) for w, c in self)

    def __sub__(self, other) -> "SymbolExpr":
        return self + (-_as_expr(other))

    def __rsub__(self, other) -> "SymbolExpr":
        return _as_expr(other) - self

    def __mul__(self, other) -> "SymbolExpr":
        if isinstance(other, (int, Fraction)):
            return SymbolExpr((w, c * other) for w, c in self)
        out: dict[Word, Fraction] = {}
        for w1, c1 in self:
            for w2, c2 in other:
                sign, w = w1.times(w2)
                out[w] = out.get(w, Fraction(0)) + sign * c1 * c2
        return SymbolExpr(out)

    def __rmul__(self, other) -> "SymbolExpr":
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def filter(self, predicate) -> "SymbolExpr":
        return SymbolExpr((w, c) for w, c in self if predicate(w))

    def __repr__(self) -> str:
        return f"SymbolExpr({pretty(self)!r})"

    def __str__(self) -> str:
        return pretty(self)


def _as_expr(x) -> SymbolExpr:
    if isinstance(x, SymbolExpr):
        return x
    return SymbolExpr.scalar(x)


def sym_mul(p: SymbolExpr, q: SymbolExpr) -> SymbolExpr:
    return p * q


# ---------------------------------------------------------------- derivatives

def _delta_block(mu: int, a: int, c: int) -> SymbolExpr:
    """delta_mu of the block k^a b0^c."""
    d = SymbolExpr.letter(_FIRST_ORDER[mu])
    out = SymbolExpr()
    if a > 0:
        for j in range(a):
            out += SymbolExpr.k(j) * d * SymbolExpr.k(a - 1 - j)
    elif a < 0:
        n = -a
        for j in range(n):
            out -= SymbolExpr.k(j - n) * d * SymbolExpr.k(-1 - j)
    out = out * SymbolExpr.b0(c) if c else out
    if c:
        # delta(b0) = -b0 delta(k^2) xi2^2 b0
        db0 = -(SymbolExpr.b0() * (d * SymbolExpr.k() + SymbolExpr.k() * d)
                * SymbolExpr.xi(0, 2) * SymbolExpr.b0())
        for j in range(c):
            out += SymbolExpr.k(a) * SymbolExpr.b0(j) * db0 * SymbolExpr.b0(c - 1 - j)
    return out


def _delta_letter(mu: int, letter: str) -> SymbolExpr:
    if letter not in _FIRST_ORDER.values():
        raise UnsupportedOrderError(f"delta_{mu} of {letter}(k) needs a third derivative of k")
    return SymbolExpr.letter(_SECOND_ORDER[(letter, mu)])


def _split(word: Word) -> list[SymbolExpr]:
    """Factor a word into a product list of single blocks and letters (scalar parts dropped)."""
    parts = [SymbolExpr.word(Word(blocks=(word.blocks[0],)))]
    for letter, block in zip(word.letters, word.blocks[1:]):
        parts.append(SymbolExpr.letter(letter))
        parts.append(SymbolExpr.word(Word(blocks=(block,))))
    return parts


def _scalar_part(word: Word, coeff: Fraction) -> SymbolExpr:
    return SymbolExpr.word(Word(xi=word.xi, spin=word.spin, ipow=word.ipow), coeff)


def sym_delta(mu: int, p: SymbolExpr) -> SymbolExpr:
    """Apply the derivation delta_mu (mu = 1, 2) with the Leibniz rule."""
    if mu not in (1, 2):
        raise ValueError("mu must be 1 or 2")
    out = SymbolExpr()
    for word, coeff in p:
        parts = _split(word)
        for i, part in enumerate(parts):
            ((w, _),) = list(part) if part else [(Word(), 0)]
            if w.letters:
                d = _delta_letter(mu, w.letters[0])
            else:
                a, c = w.blocks[0]
                d = _delta_block(mu, a, c)
            if not d:
                continue
            term = _scalar_part(word, coeff)
            for j, q in enumerate(parts):
                term = term * (d if j == i else q)
            out += term
    return out


def sym_xi_deriv(i: int, p: SymbolExpr) -> SymbolExpr:
    """Differentiate with respect to xi_i; b0 obeys d1 b0 = -2 xi1 b0^2, d2 b0 = -2 xi2 k^2 b0^2."""
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    idx = i - 1
    terms: list[tuple[Word, Fraction]] = []
    for word, coeff in p:
        e = word.xi[idx]
        if e:
            xi = list(word.xi)
            xi[idx] -= 1
            terms.append((word.with_xi(tuple(xi)), coeff * e))
        for pos, (a, c) in enumerate(word.blocks):
            if not c:
                continue
            blocks = list(word.blocks)
            blocks[pos] = (a + 2 * (i == 2), c + 1)
            xi = list(word.xi)
            xi[idx] += 1
            terms.append((Word(word.letters, tuple(blocks), tuple(xi), word.spin, word.ipow),
                          -2 * c * coeff))
    return SymbolExpr(terms)


# ---------------------------------------------------------------- the parametrix

def dirac_square_symbols() -> tuple[SymbolExpr, SymbolExpr, SymbolExpr]:
    """Symbols of D_k^2 graded by order: (order 2, order 1, order 0)."""
    k, s12 = SymbolExpr.k, SymbolExpr.sigma12()
    d1, d2 = SymbolExpr.letter("d1"), SymbolExpr.letter("d2")
    h = Fraction(1, 2)
    a2 = SymbolExpr.xi(2, 0) + k(2) * SymbolExpr.xi(0, 2)
    a1 = (Fraction(3, 2) * (k() * d2) + h * (d2 * k()) + s12 * d1) * SymbolExpr.xi(0, 1)
    a0 = (Fraction(1, 4) * (d2 * d2) + h * (s12 * SymbolExpr.letter("d12"))
          + h * (k() * SymbolExpr.letter("d22")))
    return a2, a1, a0


def parametrix(a2: SymbolExpr, a1: SymbolExpr, a0: SymbolExpr
               ) -> tuple[SymbolExpr, SymbolExpr, SymbolExpr]:
    """Terms b0, b1, b2 of the symbol of (D_k^2 + 1)^-1.

    ``a2`` must be xi1^2 + k^2 xi2^2 so that the dedicated letter b0 stands for
    (a2 + 1)^-1; its xi- and delta-derivatives are built into the calculus.
    """
    if a2 != dirac_square_symbols()[0]:
        raise ValueError("b0 is hard-wired to (xi1^2 + k^2 xi2^2 + 1)^-1")
    b0 = SymbolExpr.b0()
    dx, dd = sym_xi_deriv, sym_delta

    b1 = -(b0 * a1 * b0
           + dx(1, b0) * dd(1, a2) * b0
           + dx(2, b0) * dd(2, a2) * b0)
    h = Fraction(1, 2)
    b2 = -(b0 * a0 * b0
           + b1 * a1 * b0
           + dx(1, b0) * dd(1, a1) * b0
           + dx(2, b0) * dd(2, a1) * b0
           + dx(1, b1) * dd(1, a2) * b0
           + dx(2, b1) * dd(2, a2) * b0
           + h * dx(1, dx(1, b0)) * dd(1, dd(1, a2)) * b0
           + h * dx(2, dx(2, b0)) * dd(2, dd(2, a2)) * b0
           + dx(1, dx(2, b0)) * dd(1, dd(2, a2)) * b0)
    return b0, b1, b2


def even_part(p: SymbolExpr) -> SymbolExpr:
    return p.filter(lambda w: w.is_even)


def spinor_reduce(p: SymbolExpr, chiral: bool = False) -> SymbolExpr:
    """Project onto one spinor channel.

    The plain channel keeps the identity-spin words.  The chiral channel keeps
    the sigma^1 sigma^2 words times tr(gamma sigma^1 sigma^2)/tr(1) = i for
    gamma = sigma^3.
    """
    if not chiral:
        return p.filter(lambda w: w.spin == 0)
    out = []
    for w, c in p:
        if w.spin != 1:
            continue
        if w.ipow:
            out.append((Word(w.letters, w.blocks, w.xi, 0, 0), -c))
        else:
            out.append((Word(w.letters, w.blocks, w.xi, 0, 1), c))
    return SymbolExpr(out)


def substitute_k_one(p: SymbolExpr) -> SymbolExpr:
    """Set k = 1: all derivative letters vanish and k powers become 1."""
    return SymbolExpr((Word(blocks=((0, sum(c for _, c in w.blocks)),), xi=w.xi,
                            spin=w.spin, ipow=w.ipow), c)
                      for w, c in p if not w.letters)


# ---------------------------------------------------------------- classical collapse

@dataclass(frozen=True, order=True)
class Monomial:
    """Commutative monomial: k^kpow b0^b0pow (letters) xi^xi spin i^ipow."""

    kpow: int = 0
    b0pow: int = 0
    letters: tuple[str, ...] = ()
    xi: tuple[int, int] = (0, 0)
    spin: int = 0
    ipow: int = 0


class ClassicalExpr:
    """Commutative polynomial image of a symbol expression (theta = 0)."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[tuple[Monomial, Fraction]] = ()):
        acc: dict[Monomial, Fraction] = {}
        for m, c in terms:
            acc[m] = acc.get(m, Fraction(0)) + Fraction(c)
        self._terms = {m: c for m, c in sorted(acc.items()) if c != 0}

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        return isinstance(other, ClassicalExpr) and self._terms == other._terms

    def __add__(self, other):
        return ClassicalExpr(list(self) + list(other))

    def __sub__(self, other):
        return ClassicalExpr(list(self) + [(m, -c) for m, c in other])

    def __mul__(self, other):
        out = []
        for m1, c1 in self:
            for m2, c2 in other:
                sign = 1
                spin, ipow = m1.spin + m2.spin, m1.ipow + m2.ipow
                if spin == 2:
                    sign, spin = -sign, 0
                if ipow == 2:
                    sign, ipow = -sign, 0
                m = Monomial(m1.kpow + m2.kpow, m1.b0pow + m2.b0pow,
                             tuple(sorted(m1.letters + m2.letters)),
                             (m1.xi[0] + m2.xi[0], m1.xi[1] + m2.xi[1]), spin, ipow)
                out.append((m, sign * c1 * c2))
        return ClassicalExpr(out)

    def coeff(self, m: Monomial) -> Fraction:
        return self._terms.get(m, Fraction(0))

    def __str__(self):
        return pretty_classical(self)

    __repr__ = __str__


def collapse(p: SymbolExpr) -> ClassicalExpr:
    """Let every letter commute (the theta = 0 limit)."""
    return ClassicalExpr(
        (Monomial(sum(a for a, _ in w.blocks), sum(c for _, c in w.blocks),
                  tuple(sorted(w.letters)), w.xi, w.spin, w.ipow), c)
        for w, c in p)


# ---------------------------------------------------------------- text formats

_LETTER_TEX = {"d1": r"\delta_1(k)", "d2": r"\delta_2(k)", "d11": r"\delta_{11}(k)",
               "d12": r"\delta_{12}(k)", "d22": r"\delta_{22}(k)"}
_TEX_LETTER = {v: k for k, v in _LETTER_TEX.items()}


def _pow(base: str, e: int) -> str:
    return base if e == 1 else f"{base}^{e}" if 0 <= e < 10 else f"{base}^{{{e}}}"


def _coeff_str(c: Fraction, first: bool) -> str:
    sign = "-" if c < 0 else ("" if first else "+")
    a = abs(c)
    if a.denominator == 1:
        mag = "" if a == 1 else str(a.numerator)
    else:
        mag = rf"\tfrac{{{a.numerator}}}{{{a.denominator}}}"
    return f"{sign} {mag}".strip() if not first or sign else mag


def _word_factors(w: Word) -> list[str]:
    out = []
    for i, (a, c) in enumerate(w.blocks):
        if a:
            out.append(_pow("k", a))
        if c:
            out.append(_pow("b_0", c))
        if i < len(w.letters):
            out.append(_LETTER_TEX[w.letters[i]])
    if w.spin:
        out.append(r"\sigma^1\sigma^2")
    if w.ipow:
        out.append("i")
    if w.xi[0]:
        out.append(_pow(r"\xi_1", w.xi[0]))
    if w.xi[1]:
        out.append(_pow(r"\xi_2", w.xi[1]))
    return out


def format_term(w: Word, c: Fraction, first: bool = True) -> str:
    factors = _word_factors(w)
    head = _coeff_str(c, first)
    if not factors:
        a = abs(c)
        head = ("-" if c < 0 else ("" if first else "+ ")) + (
            str(a) if a.denominator == 1 else rf"\tfrac{{{a.numerator}}}{{{a.denominator}}}")
    return " ".join(x for x in [head, *factors] if x)


def pretty(p: SymbolExpr) -> str:
    """Render in the TeX-like notation used by the golden term lists."""
    if not p:
        return "0"
    return "\n".join(format_term(w, c, first=True) for w, c in p)


def pretty_classical(p: ClassicalExpr) -> str:
    if not len(p):
        return "0"
    lines = []
    for m, c in p:
        factors = []
        if m.b0pow:
            factors.append(_pow("b_0", m.b0pow))
        if m.kpow:
            factors.append(_pow("k", m.kpow))
        for name in sorted(set(m.letters)):
            factors.append(_pow(_LETTER_TEX[name], m.letters.count(name)))
        if m.spin:
            factors.append(r"\sigma^1\sigma^2")
        if m.ipow:
            factors.append("i")
        if m.xi[0]:
            factors.append(_pow(r"\xi_1", m.xi[0]))
        if m.xi[1]:
            factors.append(_pow(r"\xi_2", m.xi[1]))
        lines.append(" ".join([_coeff_str(c, True), *factors]).strip())
    return "\n".join(lines)


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<frac>\\[td]?frac\{(?P<fn>\d+)\}\{(?P<fd>\d+)\})"
    r"|(?P<num>\d+(?:/\d+)?)"
    r"|(?P<sign>[+-])"
    r"|(?P<letter>\\delta_(?:\{(?P<ln2>\d\d)\}|(?P<ln1>\d))\(k\))"
    r"|(?P<b0>b_0)"
    r"|(?P<k>k)"
    r"|(?P<xi>\\xi_(?P<xin>[12]))"
    r"|(?P<sigma>\\sigma\^1\s*\\sigma\^2)"
    r"|(?P<i>i)"
    r"|(?P<pow>\^(?:\{(?P<pb>-?\d+)\}|(?P<pd>\d)))"
    r"|(?P<junk>\\\\|\\hphantom\{[^}]*\}\{\}|\{\}|,|\\,)"
    r")")


def _tokens(text: str):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse symbol text near {text[pos:pos + 30]!r}")
        pos = m.end()
        if m.group("junk"):
            continue
        yield m


def parse_terms(text: str) -> list[tuple[Word, Fraction]]:
    """Parse a sum of words written in the golden-file notation.

    Factors are read left to right; ``\\delta_2(k)^2`` repeats the letter.
    A term starts at every explicit sign and at every new line.
    """
    text = "\n".join(line if line.lstrip()[:1] in ("+", "-", "") else "+ " + line
                      for line in text.strip().splitlines())
    terms: list[tuple[Word, Fraction]] = []
    cur: dict | None = None

    def flush():
        if cur is not None and (cur["started"]):
            terms.append((_build_word(cur), cur["coeff"]))

    def fresh(sign=1):
        return {"coeff": Fraction(sign), "blocks": [[0, 0]], "letters": [], "xi": [0, 0],
                "spin": 0, "ipow": 0, "last": None, "started": False}

    cur = fresh()
    for m in _tokens(text):
        if m.group("sign"):
            flush()
            cur = fresh(-1 if m.group("sign") == "-" else 1)
            continue
        cur["started"] = True
        if m.group("frac"):
            cur["coeff"] *= Fraction(int(m.group("fn")), int(m.group("fd")))
            cur["last"] = None
        elif m.group("num"):
            cur["coeff"] *= Fraction(m.group("num"))
            cur["last"] = None
        elif m.group("letter"):
            name = "d" + (m.group("ln2") or m.group("ln1"))
            cur["letters"].append(name)
            cur["blocks"].append([0, 0])
            cur["last"] = ("letter", name)
        elif m.group("b0"):
            cur["blocks"][-1][1] += 1
            cur["last"] = ("b0",)
        elif m.group("k"):
            cur["blocks"][-1][0] += 1
            cur["last"] = ("k",)
        elif m.group("xi"):
            n = int(m.group("xin")) - 1
            cur["xi"][n] += 1
            cur["last"] = ("xi", n)
        elif m.group("sigma"):
            cur["spin"] ^= 1
            cur["last"] = None
        elif m.group("i"):
            if cur["ipow"]:
                cur["coeff"] *= -1
            cur["ipow"] ^= 1
            cur["last"] = None
        elif m.group("pow"):
            e = int(m.group("pb") or m.group("pd"))
            last = cur["last"]
            if last is None:
                raise ValueError("exponent without a base")
            if last[0] == "k":
                cur["blocks"][-1][0] += e - 1
            elif last[0] == "b0":
                cur["blocks"][-1][1] += e - 1
            elif last[0] == "xi":
                cur["xi"][last[1]] += e - 1
            else:
                for _ in range(e - 1):
                    cur["letters"].append(last[1])
                    cur["blocks"].append([0, 0])
            cur["last"] = None
    flush()
    return terms


def _build_word(cur: dict) -> Word:
    return Word(tuple(cur["letters"]), tuple(tuple(b) for b in cur["blocks"]),
                tuple(cur["xi"]), cur["spin"], cur["ipow"])


def parse_expr(text: str) -> SymbolExpr:
    return SymbolExpr(parse_terms(text))


# ---------------------------------------------------------------- JSON

def word_to_json(w: Word, c: Fraction) -> dict:
    return {
        "coeff": {"num": c.numerator, "den": c.denominator, "ipow": w.ipow},
        "spin": "s12" if w.spin else "1",
        "xi": list(w.xi),
        "blocks": [list(b) for b in w.blocks],
        "letters": list(w.letters),
    }


def expr_to_json(p: SymbolExpr) -> list[dict]:
    return [word_to_json(w, c) for w, c in p]


def expr_from_json(data: list[dict]) -> SymbolExpr:
    terms = []
    for d in data:
        c = d["coeff"]
        w = Word(tuple(d["letters"]), tuple(tuple(b) for b in d["blocks"]),
                 tuple(d["xi"]), 1 if d["spin"] == "s12" else 0, int(c["ipow"]) % 2)
        sign = -1 if int(c["ipow"]) % 4 >= 2 else 1
        terms.append((w, sign * Fraction(c["num"], c["den"])))
    return SymbolExpr(terms)
