"""Truncated Dirac operators, heat-trace fits and matrix realizations of modular functions."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .rearrangement import ModularFunction, S, T
from .torus import (GnsBasis, PositivityError, TorusElement, gns_left, gns_right, min_eigenvalue,
                    sparsity_blocks)

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class DiracMatrix:
    """D = sigma1 (x) 2 pi m + sigma2 (x) (K 2 pi n + [2 pi n, K] / 2) on the truncated GNS space."""

    matrix: np.ndarray
    basis: GnsBasis
    K: np.ndarray

    @property
    def hermiticity_defect(self) -> float:
        D = self.matrix
        return float(np.linalg.norm(D - D.conj().T) / max(np.linalg.norm(D), 1e-300))

    def blocks(self) -> list[np.ndarray]:
        return sparsity_blocks(self.matrix)

    def eigh(self) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        """Eigenvalues (sorted) and per-block eigenpairs (indices, eigenvectors)."""
        vals, parts = [], []
        for idx in self.blocks():
            w, V = np.linalg.eigh(self.matrix[np.ix_(idx, idx)])
            vals.append(w)
            parts.append((idx, w, V))
        return np.sort(np.concatenate(vals)), parts

    def eigenvalues(self) -> np.ndarray:
        return self.eigh()[0]


def flat_derivation(basis: GnsBasis, mu: int) -> np.ndarray:
    """Self-adjoint derivation: multiplication by 2 pi m (mu = 1) or 2 pi n (mu = 2)."""
    return np.diag(2 * np.pi * basis.modes()[:, mu - 1].astype(float))


def build_dirac(k: TorusElement, basis: GnsBasis, floor: float = 0.0) -> DiracMatrix:
    K = gns_right(k, basis)
    K = (K + K.conj().T) / 2
    lo = min_eigenvalue(K)
    if lo <= floor:
        raise PositivityError(f"k is not positive on the truncation (min eigenvalue {lo:.4g})", lo)
    m, n = (2 * np.pi * basis.modes().T).astype(float)
    second = (K * n[None, :] + n[:, None] * K) / 2  # K d2 + [d2, K]/2
    size = basis.size
    D = np.zeros((2 * size, 2 * size), dtype=complex)
    D[:size, size:] = -1j * second
    D[size:, :size] = 1j * second
    D[np.arange(size), size + np.arange(size)] += m
    D[size + np.arange(size), np.arange(size)] += m
    return DiracMatrix(D, basis, K)


def flat_spectrum(basis: GnsBasis, c: float = 1.0) -> np.ndarray:
    mn = basis.modes().astype(float)
    r = 2 * np.pi * np.sqrt(mn[:, 0] ** 2 + (c * mn[:, 1]) ** 2)
    return np.sort(np.concatenate([r, -r]))


# ---------------------------------------------------------------- heat traces

@dataclass
class SpectralFit:
    eigenvalues: np.ndarray
    t: np.ndarray
    samples: np.ndarray
    c_minus1: float
    c0: float
    c1: float
    residual: float
    window: tuple[float, float]
    dim_ker: int
    condition: float
    warnings: list[str] = field(default_factory=list)
    restricted: "SpectralFit | None" = None

    def to_json(self, digits: int = 12) -> dict:
        out = {"c_minus1": round(self.c_minus1, digits), "c0": round(self.c0, digits),
               "c1": round(self.c1, digits), "residual": round(self.residual, digits),
               "window": [round(w, digits) for w in self.window], "dim_ker": self.dim_ker,
               "condition": float(f"{self.condition:.6e}"), "warnings": self.warnings}
        if self.restricted is not None:
            out["restricted"] = self.restricted.to_json(digits)
        return out

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value", "model"])
        model = self.c_minus1 / self.t + self.c0 + self.c1 * self.t
        for t, v, m in zip(self.t, self.samples, model):
            w.writerow([f"{t:.12e}", f"{v:.12e}", f"{m:.12e}"])
        return buf.getvalue()


def spectrum_csv(eigenvalues: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "eigenvalue"])
    for i, lam in enumerate(eigenvalues):
        w.writerow([i, f"{lam:.12e}"])
    return buf.getvalue()


def fit_heat_samples(t: np.ndarray, values: np.ndarray, cond_limit: float = 1e12
                     ) -> tuple[np.ndarray, float, float, list[str]]:
    """Least squares for c_-1/t + c_0 + c_1 t; returns (coeffs, rms residual, condition, warnings)."""
    t = np.asarray(t, dtype=float)
    A = np.stack([1 / t, np.ones_like(t), t], axis=1)
    scale = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, values, rcond=None)
    coef = coef / scale
    cond = float(np.linalg.cond(A / scale))
    resid = float(np.sqrt(np.mean((A @ coef - values) ** 2)))
    warns = [f"ill-conditioned fit (condition number {cond:.3g})"] if cond > cond_limit else []
    return coef, resid, cond, warns


def default_window(basis: GnsBasis, alpha: float = 4.0, t_max: float = 0.015) -> tuple[float, float]:
    return alpha / basis.cutoff ** 2, t_max


def heat_fit(D: DiracMatrix, f: TorusElement | None = None, chiral: bool = False,
             t_window: tuple[float, float] | None = None, samples: int = 40,
             kernel_tol: float | None = None, margin: int | None = None,
             alpha: float = 4.0) -> SpectralFit:
    """Fit Tr(f [gamma] exp(-t D^2)) on a log-spaced window.

    ``f`` acts by left multiplication.  With ``margin`` a second fit is made
    that keeps only eigenvectors concentrated on modes at least ``margin``
    steps inside the cutoff.
    """
    basis = D.basis
    if t_window is None:
        t_window = default_window(basis, alpha)
    if t_window[0] < alpha / basis.cutoff ** 2 * (1 - 1e-12):
        raise ValueError("t window starts below the truncation-reliable range")
    eig, parts = D.eigh()
    Fm = None if f is None else gns_left(f, basis)
    gamma = np.repeat([1.0, -1.0], basis.size) if chiral else np.ones(basis.spinor_size)
    lam, wts, inner = [], [], []
    interior = None if margin is None else np.zeros(basis.spinor_size, dtype=bool)
    if interior is not None:
        core = basis.interior(margin)
        interior[core] = True
        interior[core + basis.size] = True
    for idx, w, V in parts:
        lam.append(w)
        if Fm is None:
            wts.append(gamma[idx] @ (np.abs(V) ** 2))
        else:
            mode = idx % basis.size
            same_spin = idx[:, None] // basis.size == idx[None, :] // basis.size
            Wb = gamma[idx, None] * Fm[np.ix_(mode, mode)] * same_spin
            wts.append(np.einsum("ij,ik,kj->j", V.conj(), Wb, V).real)
        if interior is not None:
            inner.append((np.abs(V[interior[idx]]) ** 2).sum(axis=0))
    lam, wts = np.concatenate(lam), np.concatenate(wts)
    if kernel_tol is None:
        kernel_tol = 1e-6 * 2 * np.pi
    dim_ker = int(np.sum(np.abs(eig) < kernel_tol))
    t = np.geomspace(t_window[0], t_window[1], samples)
    lam2 = lam ** 2

    def fit(mask):
        vals = np.exp(-np.outer(t, lam2[mask])) @ wts[mask]
        coef, resid, cond, warns = fit_heat_samples(t, vals)
        return SpectralFit(eig, t, vals, *map(float, coef), resid, tuple(map(float, t_window)),
                           dim_ker, cond, warns)

    result = fit(np.ones_like(lam, dtype=bool))
    if interior is not None:
        result.restricted = fit(np.concatenate(inner) > 0.99)
    return result


def zeta_zero(fit: SpectralFit) -> float:
    """zeta_{D^2}(0) = c_0 - dim ker D."""
    return fit.c0 - fit.dim_ker


# ---------------------------------------------------------------- modular functions as matrices

def modular_callable(F: ModularFunction | Callable) -> Callable:
    """Numerical F(s, t) including the pi and i factors, excluding the k power."""
    if not isinstance(F, ModularFunction):
        return F
    s, t = sp.symbols("s t")
    expr = F.value.as_expr()
    scalar = complex(sp.pi ** F.pi_power * (1j if F.ipow else 1))
    g = sp.lambdify((s, t), expr, "numpy")

    def call(x, y=1.0):
        return scalar * np.broadcast_to(g(x, y), np.broadcast(x, y).shape)
    return call


def _eig_positive(K: np.ndarray):
    mu, V = np.linalg.eigh((K + K.conj().T) / 2)
    if mu.min() <= 0:
        raise PositivityError("k is not positive definite", float(mu.min()))
    return mu, V


def apply_modular(F, X: np.ndarray, Y: np.ndarray | None, K: np.ndarray) -> np.ndarray:
    """F(Delta_(1), Delta_(1) Delta_(2))(X Y) with Delta(a) = k^-1 a k.

    In the eigenbasis of K this reads R_il = sum_j F(mu_j/mu_i, mu_l/mu_i) X_ij Y_jl.
    Costs O(n^3) memory for two operands; meant for small matrices.
    """
    f = modular_callable(F)
    mu, V = _eig_positive(K)
    Vh = V.conj().T
    Xt = Vh @ X @ V
    if Y is None:
        R = f(mu[None, :] / mu[:, None], 1.0) * Xt
    else:
        Yt = Vh @ Y @ V
        grid = f((mu[None, :, None] / mu[:, None, None]), mu[None, None, :] / mu[:, None, None])
        R = np.einsum("ijl,ij,jl->il", grid, Xt, Yt)
    return V @ R @ Vh


def modular_trace_diagonal(F, X: np.ndarray, Y: np.ndarray | None, K: np.ndarray, power: int = 0,
                           with_magnitude: bool = False, eig=None):
    """Tr(K^power F(...)(X Y)) from the diagonal only, in O(n^2) after diagonalizing K.

    With ``with_magnitude`` also returns the same sum taken over absolute values,
    a scale that stays meaningful when the trace cancels term by term.
    ``eig`` may carry a precomputed (mu, V) of K.
    """
    f = modular_callable(F)
    mu, V = _eig_positive(K) if eig is None else eig
    Vh = V.conj().T
    Xt = Vh @ X @ V
    w = mu ** power
    if Y is None:
        terms = w * f(np.ones_like(mu), 1.0) * np.diag(Xt)
        mags = w * np.abs(f(np.ones_like(mu), 1.0)) * np.abs(Xt).sum(axis=1)
    else:
        Yt = Vh @ Y @ V
        ratio = mu[None, :] / mu[:, None]
        terms = w[:, None] * f(ratio, 1.0) * Xt * Yt.T
        mags = w[:, None] * np.abs(f(ratio, ratio)) * np.abs(Xt) * np.abs(Yt.T)
    value = complex(np.sum(terms))
    return (value, float(np.sum(mags))) if with_magnitude else value


def derivation_matrices(K: np.ndarray, basis: GnsBasis) -> dict[str, np.ndarray]:
    """Letters d1, d2, d11, d12, d22 as exact commutator derivations of K (delta = [2 pi i m, .])."""
    D = {mu: 1j * flat_derivation(basis, mu) for mu in (1, 2)}

    def der(mu, A):
        return D[mu] @ A - A @ D[mu]
    d1, d2 = der(1, K), der(2, K)
    return {"d1": d1, "d2": d2, "d11": der(1, d1), "d12": der(1, d2), "d22": der(2, d2)}


def _operands(tag: tuple[str, ...], letters: dict[str, np.ndarray]):
    if len(tag) == 2:
        return letters[tag[0]], letters[tag[1]]
    name = tag[0]
    if name.endswith("^2"):
        A = letters[name[:-2]]
        return A @ A, None
    return letters[name], None


@dataclass
class CurvatureTrace:
    total: complex
    terms: dict[tuple[str, ...], complex]
    magnitudes: dict[tuple[str, ...], float]

    @property
    def scale(self) -> float:
        """Largest single-entry size: |trace| or, if larger, the absolute-value sum."""
        return max([abs(v) for v in self.terms.values()] + list(self.magnitudes.values()), default=0.0)

    @property
    def relative(self) -> float:
        return abs(self.total) / self.scale if self.scale else abs(self.total)


def numeric_curvature_trace(package, k: TorusElement, basis: GnsBasis) -> CurvatureTrace:
    """Sum over package entries of tr(k^p F(Delta)(operands)) with the normalized matrix trace.

    Derivations are exact commutators on the truncated space, so the matrix
    trace keeps the Leibniz and cyclicity identities the vanishing relies on.
    """
    K = gns_right(k, basis)
    K = (K + K.conj().T) / 2
    letters = derivation_matrices(K, basis)
    eig = _eig_positive(K)
    terms, mags = {}, {}
    for tag, F in package.entries.items():
        if F.is_zero:
            continue
        X, Y = _operands(tag, letters)
        v, m = modular_trace_diagonal(F, X, Y, K, F.k_prefactor, with_magnitude=True,
                                      eig=eig)
        terms[tag], mags[tag] = v / K.shape[0], m / K.shape[0]
    return CurvatureTrace(sum(terms.values(), 0j), terms, mags)


def fit_to_json_text(fit: SpectralFit, digits: int = 12) -> str:
    return json.dumps(fit.to_json(digits), indent=2, sort_keys=True)
