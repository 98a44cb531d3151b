"""Comparison of computed symbols against the shipped golden term lists."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .symbols import (SymbolExpr, Word, collapse, even_part, format_term, parse_expr,
                      pretty_classical, spinor_reduce)

PLAIN_FILES = ("b2_even_A.tex", "b2_even_B.tex", "b2_even_C.tex")
CHIRAL_FILES = ("b2_even_A_gamma.tex", "b2_even_B_gamma.tex", "b2_even_C_gamma.tex")
CLASSICAL_FILE = "b2_classical.tex"
CHIRAL_CLASSICAL_FILE = "b2_gamma_classical.tex"


def golden_text(name: str, override_dir: Path | None = None) -> str:
    if override_dir is not None and (Path(override_dir) / name).exists():
        return (Path(override_dir) / name).read_text()
    return resources.files("asymtorus.golden").joinpath(name).read_text()


def load_golden(names, override_dir: Path | None = None) -> SymbolExpr:
    total = SymbolExpr()
    for name in names:
        total = total + parse_expr(golden_text(name, override_dir))
    return total


@dataclass
class Diff:
    label: str
    missing: list[tuple[Word, Fraction, Fraction]]
    extra: list[tuple[Word, Fraction]]
    size: int
    detail: str | None = None

    @property
    def ok(self) -> bool:
        return not self.missing and not self.extra and self.detail is None

    def first(self) -> str | None:
        if self.ok:
            return None
        if self.detail is not None:
            return self.detail
        if self.missing:
            w, c, got = self.missing[0]
            return f"first differing word: golden {format_term(w, c)}, computed coefficient {got}"
        w, c = self.extra[0]
        return f"first differing word: computed {format_term(w, c)}, absent from golden list"

    def text(self) -> str:
        head = f"{self.label}: {self.size} words, " + ("match" if self.ok else "MISMATCH")
        return head if self.ok else head + "\n  " + self.first()


def diff_exprs(label: str, computed: SymbolExpr, golden: SymbolExpr) -> Diff:
    residual = golden - computed
    missing = [(w, golden.coeff(w), computed.coeff(w)) for w, _ in residual if golden.coeff(w) != 0]
    extra = [(w, computed.coeff(w)) for w, _ in residual if golden.coeff(w) == 0]
    return Diff(label, missing, extra, len(computed))


def verify_b2(b2: SymbolExpr, override_dir: Path | None = None) -> list[Diff]:
    """Plain and chiral even parts against the word lists, plus the classical collapse."""
    ev = even_part(b2)
    plain, chiral = spinor_reduce(ev), spinor_reduce(ev, chiral=True)
    out = [diff_exprs("plain even part", plain, load_golden(PLAIN_FILES, override_dir)),
           diff_exprs("chiral even part", chiral, load_golden(CHIRAL_FILES, override_dir))]
    for label, expr, name in (("classical collapse", plain, CLASSICAL_FILE),
                              ("chiral classical collapse", chiral, CHIRAL_CLASSICAL_FILE)):
        got = collapse(expr)
        want = collapse(parse_expr(golden_text(name, override_dir)))
        detail = None if got == want else (
            f"collapse differs: computed {pretty_classical(got)} vs golden {pretty_classical(want)}")
        out.append(Diff(label, [], [], len(got), detail))
    return out
