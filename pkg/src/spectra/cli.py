"""Command-line entry point: ``spectra <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fixtures
from .cocycle import cocycle_product, eval_internal_B, internal_spec, riesz_limit
from .diffraction import enumerate_peaks, export_spectrum
from .numberfield import FieldError, poly_str
from .oracle import OracleError, compare
from .substitution import ConvergenceError, LengthError, PatchError, RuleError, is_primitive, parse_rule
from .system import build_system
from .windows import WindowError, render_windows, solve_windows

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, module: str, message: str, hint: str = ""):
        super().__init__(message)
        self.code, self.module, self.hint = code, module, hint


@dataclass
class RunConfig:
    command: str
    rule: str | None = None
    cocycle_tol: float = 1e-10
    window_tol: float = 1e-12
    oracle_r: float = 1e5
    box: int = 25
    kmax: float = 10.0
    floor: float = 1e-6
    weights: list[complex] | None = None
    threads: int = 1
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("cocycle_tol", "window_tol", "oracle_r"):
            if not getattr(self, name) > 0:
                raise CliError(EXIT_VALIDATION, "cli", f"{name} must be positive")
        if self.box < 0:
            raise CliError(EXIT_VALIDATION, "cli", "Miller box bound must be >= 0")
        if self.floor < 0:
            raise CliError(EXIT_VALIDATION, "cli", "intensity floor must be >= 0")
        if self.threads < 1:
            raise CliError(EXIT_VALIDATION, "cli", "thread count must be >= 1")


def g15(x: float) -> float:
    return float(format(float(x), ".15g"))


def cplx(z) -> list[float]:
    return [g15(np.real(z)), g15(np.imag(z))]


def dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def read_rule(spec: str):
    """Rule from a file path, or from a fixture name / fixture-like path."""
    p = Path(spec)
    try:
        if p.exists():
            return parse_rule(p.read_text(encoding="utf-8"), name=p.stem)
    except OSError as e:
        raise CliError(EXIT_IO, "substitution", f"cannot read {spec}: {e}") from e
    if p.stem in fixtures.list_fixtures():
        return fixtures.load_fixture(p.stem)
    raise CliError(EXIT_IO, "substitution", f"rule file {spec} not found",
                   "pass a path or one of the names listed by 'spectra fixtures'")


def write_out(path: str | None, text: str) -> None:
    if not path:
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError(EXIT_IO, "cli", f"cannot write {path}: {e}") from e


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise CliError(EXIT_VALIDATION, "cli", f"bad number list {text!r}") from e


def parse_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip()]
    except ValueError as e:
        raise CliError(EXIT_VALIDATION, "cli", f"bad integer list {text!r}") from e


def parse_weights(text: str | None) -> list[complex] | None:
    if not text:
        return None
    try:
        return [complex(x.strip().replace("i", "j")) for x in text.split(",")]
    except ValueError as e:
        raise CliError(EXIT_VALIDATION, "cli", f"bad weight list {text!r}") from e


# ---------------------------------------------------------------------------
# subcommands


def cmd_rule_check(cfg: RunConfig) -> int:
    rule = read_rule(cfg.rule)
    s = build_system(rule)
    doc = {
        "name": rule.name,
        "letters": list(rule.letters),
        "images": [rule.word(im) for im in rule.images],
        "matrix": s.M.tolist(),
        "primitive": bool(is_primitive(s.M)),
        "lambda": g15(s.pf.lam),
        "v": [g15(x) for x in s.pf.v],
        "u": [g15(x) for x in s.pf.u],
        "minimal_polynomial": poly_str(s.emb.minpoly),
        "lengths": [l.to_str() for l in s.lengths],
        "module_index": s.module_index,
        "power": s.power,
        "seed": rule.letters[s.seed[0]] + "|" + rule.letters[s.seed[1]],
    }
    sys.stdout.write(dump(doc))
    return EXIT_OK


def field_doc(s) -> dict:
    emb = s.emb
    return {
        "minimal_polynomial": poly_str(emb.minpoly),
        "coefficients": list(emb.minpoly),
        "real_roots": [g15(r) for r in emb.real_roots],
        "complex_roots": [cplx(z) for z in emb.complex_roots],
        "det_B": g15(np.linalg.det(emb.B)),
        "theta": emb.theta.to_str("L"),
        "theta_value": g15(emb.theta.real_value()),
        "contraction": g15(emb.contraction),
    }


def cmd_field(cfg: RunConfig) -> int:
    s = build_system(read_rule(cfg.rule))
    doc = field_doc(s)
    if cfg.extra.get("json"):
        sys.stdout.write(dump(doc))
        return EXIT_OK
    lines = [
        f"minimal polynomial  {doc['minimal_polynomial']}",
        "real roots          " + ", ".join(f"{r:.12g}" for r in s.emb.real_roots),
        "complex roots       " + ", ".join(f"{z.real:.12g}{z.imag:+.12g}i" for z in s.emb.complex_roots),
        f"det B               {doc['det_B']:.12g}",
        f"theta               {doc['theta']}  ~ {doc['theta_value']:.12g}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_windows(cfg: RunConfig) -> int:
    s = build_system(read_rule(cfg.rule))
    sol = solve_windows(s, tol=cfg.window_tol, target_points=cfg.extra.get("points", 20000),
                        mc_samples=cfg.extra.get("samples", 40000))
    letters = s.rule.letters
    doc = {
        "kind": sol.kind,
        "volumes": [g15(x) for x in sol.volumes],
        "volume_se": [g15(x) for x in sol.volume_se],
        "eta": g15(sol.eta),
        "ratio_error": [g15(x) for x in sol.volume_ratio_error()],
        "covering_levels": {str(k): g15(v) for k, v in sorted(sol.covering.levels.items())},
        "covering_constant": sol.covering.constant,
    }
    rows = []
    if sol.kind == "intervals":
        doc["windows"] = {}
        for a, w in zip(letters, sol.windows):
            doc["windows"][a] = [[g15(p), g15(q)] for p, q in w.intervals]
            rows += [f"{a},{g15(p)!r},{g15(q)!r}" for p, q in w.intervals]
        doc["exact"] = {a: [[e.to_str() if e is not None else None for e in pair] for pair in w.exact]
                        for a, w in zip(letters, sol.windows)}
        doc["covering_profile"] = [[g15(p), g15(q), lv] for p, q, lv in sol.covering.pieces]
        head = "letter,a,b"
    else:
        doc["points"] = {a: len(c) for a, c in zip(letters, sol.windows)}
        doc["method"] = sol.meta.get("method")
        doc["eps"] = g15(sol.meta["eps"])
        m = sol.windows[0].shape[1]
        head = "letter," + ",".join("xyzw"[i] if i < 4 else f"x{i}" for i in range(m))
        if cfg.outputs.get("csv"):
            for a, c in zip(letters, sol.windows):
                rows += [a + "," + ",".join(repr(g15(x)) for x in p) for p in c]
    write_out(cfg.outputs.get("csv"), head + "\n" + "".join(r + "\n" for r in rows))
    write_out(cfg.outputs.get("svg"), render_windows(sol))
    sys.stdout.write(dump(doc))
    return EXIT_OK


def cmd_cocycle(cfg: RunConfig) -> int:
    s = build_system(read_rule(cfg.rule))
    spec = internal_spec(s)
    y = np.array(cfg.extra["y"], dtype=float)
    if len(y) != s.emb.internal_dim:
        raise CliError(EXIT_VALIDATION, "cocycle", f"y needs {s.emb.internal_dim} components, got {len(y)}")
    n = cfg.extra.get("n")
    beta = 1 / s.pf.lam
    if n is not None:
        C = beta**n * cocycle_product(spec, s.emb.R, y, n)
        nxt = C @ (beta * eval_internal_B(spec, np.linalg.matrix_power(s.emb.R, n) @ y))
        resid = float(np.abs(nxt - C).max())
        sv = np.linalg.svd(C, compute_uv=False)
        c = C @ s.pf.v
        used, converged = n, True
    else:
        res = riesz_limit(spec, s.emb.R, beta, y, s.pf.v, tol=cfg.cocycle_tol)
        C, c, resid, used = res.C, res.c, res.residual, res.n_used
        sv = np.array([res.first_singular, res.second_singular])
        converged = resid < cfg.cocycle_tol
    doc = {
        "y": [g15(x) for x in y],
        "C": [[cplx(z) for z in row] for row in C],
        "c": [cplx(z) for z in c],
        "n_used": int(used),
        "residual": g15(resid),
        "rank1_ratio": g15(sv[1] / sv[0]) if len(sv) > 1 and sv[0] > 0 else 0.0,
        "theta": g15(s.emb.contraction),
    }
    sys.stdout.write(dump(doc))
    if not converged:
        raise CliError(EXIT_CONVERGENCE, "cocycle", f"residual {resid:.3g} above tolerance",
                       "raise --tol or use --n for a fixed number of factors")
    return EXIT_OK


def cmd_diffract(cfg: RunConfig) -> int:
    s = build_system(read_rule(cfg.rule))
    windows = solve_windows(s) if cfg.extra.get("windows") else None
    table = enumerate_peaks(s, box=cfg.box, kmax=cfg.kmax, floor=cfg.floor, weights=cfg.weights,
                            windows=windows, threads=cfg.threads)
    d = s.emb.degree
    write_out(cfg.outputs.get("csv"), export_spectrum(table, "csv", d))
    write_out(cfg.outputs.get("svg"), export_spectrum(table, "svg", d))
    write_out(cfg.outputs.get("json"), export_spectrum(table, "json", d))
    doc = {
        "peaks": len(table),
        "density": g15(table.dens_total),
        "formula": table.formula,
        "max_residual": g15(table.meta["max_residual"]),
        "top": [{"miller": list(r.miller), "k": g15(r.k), "intensity": g15(r.intensity)} for r in table.top(10)],
    }
    if "warning" in table.meta:
        doc["warning"] = table.meta["warning"]
    sys.stdout.write(dump(doc))
    if table.meta["max_residual"] >= s.emb.contraction and table.meta["max_residual"] > 1e-6:
        raise CliError(EXIT_CONVERGENCE, "diffraction", "cocycle did not converge for some peaks")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    s = build_system(read_rule(cfg.rule))
    miller = cfg.extra["k"]
    if len(miller) != s.emb.degree:
        raise CliError(EXIT_VALIDATION, "oracle", f"need {s.emb.degree} Miller indices, got {len(miller)}")
    rep = compare(s, miller, cfg.oracle_r)
    sys.stdout.write(dump(rep.as_dict()))
    limit = cfg.extra.get("max_dev")
    if limit is not None and rep.deviation > limit:
        raise CliError(EXIT_CONVERGENCE, "oracle", f"deviation {rep.deviation:.3g} above {limit:g}",
                       "increase --r; finite-patch sums converge slowly")
    return EXIT_OK


def cmd_fixtures(cfg: RunConfig) -> int:
    cat = fixtures.list_fixtures()
    show = cfg.extra.get("show")
    if show:
        try:
            sys.stdout.write(fixtures.fixture_text(show))
        except KeyError as e:
            raise CliError(EXIT_VALIDATION, "cli", str(e.args[0])) from e
        return EXIT_OK
    export = cfg.extra.get("export")
    if export:
        try:
            Path(export).mkdir(parents=True, exist_ok=True)
            for name in cat:
                (Path(export) / f"{name}.rule").write_text(fixtures.fixture_text(name), encoding="utf-8")
        except OSError as e:
            raise CliError(EXIT_IO, "cli", f"cannot export fixtures: {e}") from e
    width = max(len(n) for n in cat)
    for name, desc in cat.items():
        sys.stdout.write(f"{name.ljust(width)}  {desc}\n")
    return EXIT_OK


COMMANDS = {
    "rule": cmd_rule_check,
    "field": cmd_field,
    "windows": cmd_windows,
    "cocycle": cmd_cocycle,
    "diffract": cmd_diffract,
    "verify": cmd_verify,
    "fixtures": cmd_fixtures,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectra", description="Windows, cocycles and diffraction of Pisot inflation rules.")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $SPECTRA_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rule", help="rule-file utilities")
    rsub = r.add_subparsers(dest="action", required=True)
    rc = rsub.add_parser("check", help="validate a rule and print its basic data")
    rc.add_argument("rule")

    f = sub.add_parser("field", help="number field, embedding and Fourier-module generator")
    f.add_argument("rule")
    f.add_argument("--json", action="store_true")

    w = sub.add_parser("windows", help="solve the window IFS")
    w.add_argument("rule")
    w.add_argument("--points", type=int, default=20000, help="cloud points per letter (internal dimension >= 2)")
    w.add_argument("--samples", type=int, default=40000, help="Monte-Carlo samples")
    w.add_argument("--tol", type=float, default=1e-12)
    w.add_argument("--svg")
    w.add_argument("--csv")

    c = sub.add_parser("cocycle", help="evaluate C(y)")
    c.add_argument("rule")
    c.add_argument("--y", required=True, help="comma-separated internal point")
    grp = c.add_mutually_exclusive_group()
    grp.add_argument("--n", type=int)
    grp.add_argument("--tol", type=float, default=1e-10)

    d = sub.add_parser("diffract", help="Bragg peaks over a Miller box")
    d.add_argument("rule")
    d.add_argument("--kmax", type=float, default=10.0)
    d.add_argument("--box", type=int, default=25)
    d.add_argument("--weights")
    d.add_argument("--floor", type=float, default=1e-6)
    d.add_argument("--windows", action="store_true", help="solve windows first and use their covering data")
    d.add_argument("--csv")
    d.add_argument("--svg")
    d.add_argument("--json")

    v = sub.add_parser("verify", help="brute-force exponential sum against the cocycle")
    v.add_argument("rule")
    v.add_argument("--k", required=True, help="Miller tuple, e.g. 1,0,0")
    v.add_argument("--r", type=float, default=1e5)
    v.add_argument("--max-dev", type=float, default=None)

    x = sub.add_parser("fixtures", help="list the shipped rule files")
    x.add_argument("--show")
    x.add_argument("--export")
    return p


def config_from_args(a: argparse.Namespace) -> RunConfig:
    threads = a.threads
    if threads is None:
        env = os.environ.get("SPECTRA_THREADS")
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise CliError(EXIT_VALIDATION, "cli", f"SPECTRA_THREADS={env!r} is not an integer")
    cfg = dict(command=a.command, rule=getattr(a, "rule", None), threads=threads)
    extra, outputs = {}, {}
    if a.command == "field":
        extra["json"] = a.json
    elif a.command == "windows":
        cfg["window_tol"] = a.tol
        extra.update(points=a.points, samples=a.samples)
        outputs.update(svg=a.svg, csv=a.csv)
    elif a.command == "cocycle":
        extra["y"] = parse_floats(a.y)
        extra["n"] = a.n
        cfg["cocycle_tol"] = a.tol
    elif a.command == "diffract":
        cfg.update(kmax=a.kmax, box=a.box, floor=a.floor, weights=parse_weights(a.weights))
        extra["windows"] = a.windows
        outputs.update(csv=a.csv, svg=a.svg, json=a.json)
    elif a.command == "verify":
        cfg["oracle_r"] = a.r
        extra.update(k=parse_ints(a.k), max_dev=a.max_dev)
    elif a.command == "fixtures":
        extra.update(show=a.show, export=a.export)
    return RunConfig(**cfg, extra=extra, outputs=outputs)


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.command](cfg)


_MODULE_OF = {
    RuleError: ("substitution", EXIT_VALIDATION, "fix the rule file at the reported position"),
    LengthError: ("substitution", EXIT_VALIDATION, "check that lengths are proportional to the PF left eigenvector"),
    PatchError: ("substitution", EXIT_VALIDATION, "use a legal seed or fewer iterations"),
    FieldError: ("numberfield", EXIT_VALIDATION, "the inflation factor must be a PV unit"),
    ConvergenceError: ("substitution", EXIT_CONVERGENCE, "raise the iteration cap or loosen the tolerance"),
    WindowError: ("windows", EXIT_CONVERGENCE, "raise max_iter or loosen --tol"),
    OracleError: ("oracle", EXIT_VALIDATION, "use a patch radius the patch covers"),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(config_from_args(args))
    except CliError as e:
        msg = f"spectra: [{e.module}] {e}"
        sys.stderr.write(msg + (f" (hint: {e.hint})" if e.hint else "") + "\n")
        return e.code
    except tuple(_MODULE_OF) as e:
        module, code, hint = next(v for k, v in _MODULE_OF.items() if isinstance(e, k))
        sys.stderr.write(f"spectra: [{module}] {e} (hint: {hint})\n")
        return code
    except OSError as e:
        sys.stderr.write(f"spectra: [io] {e}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
