"""Command-line entry point: ``asymtorus <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__

GOLDEN_RATIO_CONJ = (math.sqrt(5) - 1) / 2


@dataclass
class RunConfig:
    theta: float = 0.2
    k_constant: float = 1.0
    k_coeffs: list = field(default_factory=lambda: [[1, 0, 0.2, 0.0], [-1, 0, 0.2, 0.0]])
    k_floor: float = 0.1
    cutoff: int = 24
    alpha: float = 4.0
    t_max: float = 0.015
    samples: int = 40
    margin: int = 4
    c0_tol: float = 0.02
    kernel_tol: float | None = None
    output_dir: str | None = None
    seed: int = 0

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> dict:
        return asdict(self)

    def k(self):
        from .torus import make_positive_k
        profile = [(int(m), int(n), complex(re, im)) for m, n, re, im in self.k_coeffs]
        return make_positive_k(profile, self.k_floor, self.theta, c=self.k_constant,
                               cutoff=self.cutoff)


def parse_theta(text: str) -> float:
    if text in ("golden", "phi"):
        return GOLDEN_RATIO_CONJ
    return float(Fraction(text))


def parse_profile(text: str) -> list:
    """``eps=0.2`` (eps (U1 + U1*)), ``eps2=0.2`` (along U2) or ``m,n,re,im;...``."""
    if text.startswith("eps"):
        key, value = text.split("=")
        eps = float(value)
        axis = 2 if key == "eps2" else 1
        m, n = (1, 0) if axis == 1 else (0, 1)
        return [[m, n, eps, 0.0], [-m, -n, eps, 0.0]]
    out = []
    for part in text.split(";"):
        m, n, re, im = part.split(",")
        out.append([int(m), int(n), float(re), float(im)])
    return out


def clean(x, digits: int = 12):
    """Round floats to fixed significant digits so identical runs give identical JSON."""
    if isinstance(x, dict):
        return {str(k): clean(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v, digits) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.{digits}g}")
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": clean(x.real, digits), "im": clean(x.imag, digits)}
    return x


def dump(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True, ensure_ascii=False)


def write_output(cfg: RunConfig, name: str, text: str):
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


# ---------------------------------------------------------------- commands

def cmd_symbols(args, cfg) -> int:
    from .symbols import dirac_square_symbols, even_part, expr_to_json, parametrix, pretty
    a2, a1, a0 = dirac_square_symbols()
    b0, b1, b2 = parametrix(a2, a1, a0)
    named = {"a2": a2, "a1": a1, "a0": a0, "b0": b0, "b1": b1, "b2": b2,
             "b1_even": even_part(b1), "b2_even": even_part(b2)}
    if args.format == "json":
        text = json.dumps({k: expr_to_json(v) for k, v in named.items()}, indent=1)
    else:
        text = "\n\n".join(f"{k} ({len(v)} words):\n{pretty(v)}" for k, v in named.items())
    print(text)
    write_output(cfg, f"symbols.{args.format}", text)
    return 0


def cmd_verify_b2(args, cfg) -> int:
    from .curvature import b2_symbol
    from .verify import verify_b2
    diffs = verify_b2(b2_symbol(), Path(args.golden_dir) if args.golden_dir else None)
    for d in diffs:
        print(d.text())
    return 0 if all(d.ok for d in diffs) else 1


def cmd_curvature(args, cfg) -> int:
    from .curvature import assemble
    pkg, report = assemble("chiral" if args.chiral else "plain", check=False)
    print(report.markdown() if args.markdown else report.text())
    write_output(cfg, f"curvature_{pkg.channel}.json", json.dumps(pkg.to_json(), indent=2))
    write_output(cfg, f"curvature_{pkg.channel}.md", report.markdown())
    return 0 if report.ok else 1


def cmd_gauss_bonnet(args, cfg) -> int:
    from .curvature import assemble, gauss_bonnet, h_identity
    plain, _ = assemble("plain", check=False)
    ok_plain, residual = gauss_bonnet(plain)
    for direction, H in residual.residuals.items():
        label = "H(s)" if direction == "d1" else f"H_{direction}(s)"
        print(f"{label} = {H}")
        print(f"  s^3 H(s) + H(1/s) = {h_identity(H).as_expr()}")
    chiral, _ = assemble("chiral", check=False)
    ok_chiral, subs = gauss_bonnet(chiral)
    for tag, v in subs.items():
        print(f"chiral {'*'.join(tag)} at t=1 (or s=1): {v.as_expr()}")
    ok = ok_plain and ok_chiral
    print("Gauss-Bonnet:", "holds" if ok else "FAILS")
    return 0 if ok else 1


def cmd_classical(args, cfg) -> int:
    from .curvature import classical_curvature
    c = classical_curvature()
    print(f"integral of b2 (plain): {c.integral}")
    print(f"expected:               {c.expected_integral}")
    print(f"package at s=t=1:       {c.package_value}")
    print(f"integral of b2 (chiral): {c.chiral_integral}")
    print(f"48 pi/(4 pi^2) * integral = {c.dressed_curvature}")
    print(f"k^-1 R:                     {c.expected_curvature}")
    print("classical limit:", "consistent" if c.ok else "INCONSISTENT")
    return 0 if c.ok else 1


def _numeric_setup(args, cfg):
    from .spectral import build_dirac
    from .torus import GnsBasis
    k = cfg.k()
    basis = GnsBasis(cfg.cutoff)
    return k, basis, build_dirac(k, basis)


def cmd_spectrum(args, cfg) -> int:
    from .spectral import spectrum_csv
    k, basis, D = _numeric_setup(args, cfg)
    eig = D.eigenvalues()
    asym = float(np.max(np.abs(eig + eig[::-1])) / np.max(np.abs(eig)))
    write_output(cfg, "spectrum.csv", spectrum_csv(eig))
    print(dump({"size": len(eig), "hermiticity_defect": D.hermiticity_defect,
                "symmetry_defect": asym, "smallest_abs": float(np.min(np.abs(eig))),
                "largest_abs": float(np.max(np.abs(eig)))}))
    return 0 if asym <= 1e-8 and D.hermiticity_defect <= 1e-12 else 1


def _fit(args, cfg, D):
    from .spectral import heat_fit
    window = (cfg.alpha / cfg.cutoff ** 2, cfg.t_max)
    return heat_fit(D, chiral=getattr(args, "chiral", False), t_window=window, samples=cfg.samples,
                    kernel_tol=cfg.kernel_tol, margin=cfg.margin, alpha=cfg.alpha)


def cmd_heat(args, cfg) -> int:
    k, basis, D = _numeric_setup(args, cfg)
    fit = _fit(args, cfg, D)
    write_output(cfg, "heat_samples.csv", fit.samples_csv())
    out = fit.to_json()
    out["c0_tol"] = cfg.c0_tol
    out["c0_within_tol"] = abs(fit.c0) <= cfg.c0_tol
    text = dump(out)
    write_output(cfg, "heat_fit.json", text)
    print(text)
    return 0 if out["c0_within_tol"] else 1


def cmd_zeta(args, cfg) -> int:
    from .spectral import zeta_zero
    k, basis, D = _numeric_setup(args, cfg)
    fit = _fit(args, cfg, D)
    text = dump({"zeta0": zeta_zero(fit), "c0": fit.c0, "dim_ker": fit.dim_ker,
                 "residual": fit.residual})
    write_output(cfg, "zeta.json", text)
    print(text)
    return 0


def cmd_section4(args, cfg) -> int:
    from .curvature import section4_functionals
    from .symbols import pretty
    from .torus import GnsBasis, random_positive_k
    k = cfg.k()
    basis = GnsBasis(args.N)
    res = section4_functionals(k, basis, trace=args.trace)
    rng = np.random.default_rng(cfg.seed)
    twobein_random = [section4_functionals(random_positive_k(rng, cfg.theta, cutoff=args.N), basis,
                                           trace=args.trace).twobein for _ in range(args.trials)]
    checks = {
        "twobein_symbolic_zero": not res.twobein_symbolic,
        "twobein_numeric_zero": max(abs(x) for x in twobein_random + [res.twobein]) <= 1e-9,
        "rosenberg_nonzero": abs(res.rosenberg) > 1e-4,
    }
    out = {"rosenberg": res.rosenberg, "twobein": res.twobein, "twobein_random": twobein_random,
           "rosenberg_symbolic": {" ".join(f"{l}:{p}" for l, p in w.cycle): str(c)
                                  for w, c in res.rosenberg_symbolic.items()},
           "checks": checks}
    print(dump(out))
    return 0 if all(checks.values()) else 1


def cmd_oracle(args, cfg) -> int:
    from .oracle import lemma_sweep, quadrature_sweep
    rng = np.random.default_rng(cfg.seed)
    t0 = time.time()
    q = quadrature_sweep(rng, points=args.points)
    lem = lemma_sweep(rng, trials=args.trials)
    out = {"quadrature": {"descriptors": q.count, "max_rel_error": q.max_error,
                          "worst": q.worst},
           "lemma": {"trials": args.trials, "max_rel_error": lem},
           "seconds": round(time.time() - t0, 1) if args.timing else None}
    print(dump(out))
    return 0 if q.max_error <= 1e-8 and lem <= 1e-10 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asymtorus", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--output", help="directory for JSON/CSV outputs")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("symbols", help="print the symbols of D^2 and of its parametrix")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_symbols)

    s = sub.add_parser("verify-b2", help="compare b2 with the golden word lists")
    s.add_argument("--golden-dir", help="directory whose files replace the shipped golden lists")
    s.set_defaults(func=cmd_verify_b2)

    s = sub.add_parser("curvature", help="assemble the curvature package and compare")
    s.add_argument("--chiral", action="store_true")
    s.add_argument("--markdown", action="store_true")
    s.set_defaults(func=cmd_curvature)

    sub.add_parser("gauss-bonnet", help="symbolic trace reduction").set_defaults(func=cmd_gauss_bonnet)
    sub.add_parser("classical", help="commutative limit checks").set_defaults(func=cmd_classical)

    for name, func in (("spectrum", cmd_spectrum), ("heat", cmd_heat), ("zeta", cmd_zeta)):
        s = sub.add_parser(name, help=f"numerical {name} of the truncated Dirac operator")
        _numeric_flags(s)
        if name != "spectrum":
            s.add_argument("--chiral", action="store_true")
        s.set_defaults(func=func)

    s = sub.add_parser("section4", help="Rosenberg and two-bein trace functionals")
    _numeric_flags(s)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--trace", choices=("vacuum", "normalized"), default="vacuum")
    s.set_defaults(func=cmd_section4)

    s = sub.add_parser("oracle", help="quadrature and matrix-lemma sweeps")
    s.add_argument("--points", type=int, default=20)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--timing", action="store_true", help="include wall time (breaks reproducibility)")
    s.set_defaults(func=cmd_oracle)
    return p


def _numeric_flags(s):
    s.add_argument("--theta", type=parse_theta, help="rational like 1/5, a float, or 'golden'")
    s.add_argument("--k-profile", type=parse_profile, help="eps=0.2, eps2=0.2, or m,n,re,im;...")
    s.add_argument("--N", type=int, help="Fourier cutoff")
    s.add_argument("--t-max", type=float)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    if args.output:
        cfg.output_dir = args.output
    if getattr(args, "theta", None) is not None:
        cfg.theta = args.theta
    if getattr(args, "k_profile", None) is not None:
        cfg.k_coeffs = args.k_profile
    if getattr(args, "t_max", None) is not None:
        cfg.t_max = args.t_max
    if args.command == "section4" and args.N is None:
        args.N = 12
    elif getattr(args, "N", None) is not None:
        cfg.cutoff = args.N
    from .torus import PositivityError
    try:
        return args.func(args, cfg)
    except PositivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
