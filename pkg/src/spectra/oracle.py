"""Brute-force checks: exponential sums on exact patches, equidistribution, closed forms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cocycle import internal_spec, riesz_limit
from .diffraction import AmplitudeEngine
from .numberfield import miller_to_k
from .substitution import TypedPointSet


class OracleError(ValueError):
    pass


def _block_sum(phases: np.ndarray, block: int = 1 << 16) -> complex:
    """Deterministic blockwise sum with a pairwise reduction across blocks."""
    if len(phases) == 0:
        return 0j
    parts = [phases[i : i + block].sum() for i in range(0, len(phases), block)]
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i] for i in range(0, len(parts), 2)]
    return complex(parts[0])


def brute_fb(patch: TypedPointSet, k: float, r: float) -> np.ndarray:
    """(1/2r) sum over |x| <= r of exp(-2 pi i k x), per letter."""
    if patch.radius < r:
        raise OracleError(f"patch radius {patch.radius:.6g} is smaller than r = {r:.6g}")
    out = []
    for x in patch.positions:
        x = x[np.abs(x) <= r]
        out.append(_block_sum(np.exp(-2j * np.pi * k * x)) / (2 * r))
    return np.array(out)


def brute_fb_untyped(patch: TypedPointSet, k: float, r: float) -> complex:
    if patch.radius < r:
        raise OracleError(f"patch radius {patch.radius:.6g} is smaller than r = {r:.6g}")
    x = np.concatenate(patch.positions)
    x = x[np.abs(x) <= r]
    return _block_sum(np.exp(-2j * np.pi * k * x)) / (2 * r)


@dataclass
class OracleReport:
    miller: tuple[int, ...]
    k: float
    brute: np.ndarray
    cocycle: np.ndarray
    r: float
    deviation: float
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        g = lambda x: float(format(float(x), ".15g"))
        return {
            "miller": list(self.miller),
            "k": g(self.k),
            "r": g(self.r),
            "brute": [[g(z.real), g(z.imag)] for z in self.brute],
            "cocycle": [[g(z.real), g(z.imag)] for z in self.cocycle],
            "deviation": g(self.deviation),
            **self.meta,
        }


def compare(system, miller: Sequence[int], r: float, patch: TypedPointSet | None = None,
            engine: AmplitudeEngine | None = None) -> OracleReport:
    """Brute amplitudes at radius r against the cocycle amplitudes at the same k."""
    engine = engine or AmplitudeEngine(system)
    patch = patch or system.patch_for_radius(r)
    k = miller_to_k(miller, system.emb)[0]
    brute = brute_fb(patch, k, r)
    amps, res = engine.at_miller(miller)
    dev = float(np.max(np.abs(brute - amps.values)))
    return OracleReport(tuple(int(m) for m in miller), k, brute, amps.values, float(r), dev,
                        {"tolerance_note": "engineering budget; no rate is known for this convergence",
                         "cocycle_residual": float(res.residual)})


def convergence_trend(system, miller: Sequence[int], radii: Sequence[float] = (1e3, 1e4, 1e5),
                      engine: AmplitudeEngine | None = None) -> list[OracleReport]:
    """Reports at increasing radii, all cut from one patch covering the largest radius."""
    patch = system.patch_for_radius(max(radii))
    engine = engine or AmplitudeEngine(system)
    return [compare(system, miller, r, patch, engine) for r in radii]


@dataclass
class UniformityReport:
    bins: int
    counts: list[np.ndarray]
    expected: list[np.ndarray]
    max_deviation: np.ndarray  # per letter, max relative bin deviation

    @property
    def worst(self) -> float:
        return float(np.max(self.max_deviation))


def uniform_distribution_test(patch: TypedPointSet, emb, windows, bins: int = 10,
                              min_points: int = 10_000) -> UniformityReport:
    """Histogram of star-mapped control points in each interval window.

    The hull of W_i is cut into ``bins`` equal bins; the expected count of a
    bin is proportional to the measure of W_i inside it.
    """
    if bins <= 0:
        raise OracleError("need at least one bin")
    if emb.internal_dim != 1:
        raise OracleError("histogram test is implemented for one-dimensional internal space")
    counts, expected, worst = [], [], []
    for coeffs, W in zip(patch.coeffs, windows):
        if len(coeffs) < min_points:
            raise OracleError(f"only {len(coeffs)} points for a letter, need {min_points}")
        y = emb.star_coeffs(coeffs)[:, 0]
        a, b = W.hull
        edges = np.linspace(a, b, bins + 1)
        c, _ = np.histogram(np.clip(y, a, b), edges)
        meas = np.array([sum(max(0.0, min(hi, q) - max(lo, p)) for p, q in W.intervals)
                         for lo, hi in zip(edges[:-1], edges[1:])])
        e = len(y) * meas / meas.sum()
        ok = e > 0
        counts.append(c)
        expected.append(e)
        worst.append(float(np.max(np.abs(c[ok] - e[ok]) / e[ok])))
    return UniformityReport(bins, counts, expected, np.array(worst))


# ---------------------------------------------------------------------------
# closed forms


def fibonacci_closed_forms(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourier transforms of 1 on [tau-2, tau-1] and [-1, tau-2]."""
    tau = (1 + np.sqrt(5)) / 2
    y = np.asarray(y, dtype=float)
    fa = np.exp(1j * np.pi * y * (2 * tau - 3)) * np.sinc(y)
    fb = np.exp(1j * np.pi * y * (tau - 3)) / tau * np.sinc(y / tau)
    return fa, fb


def rho_tilde_series(y: np.ndarray, cutoff: float = 1e-16) -> np.ndarray:
    """Series for the transform of the second window of (12, 13, 1, 0)."""
    tau = (1 + np.sqrt(5)) / 2
    s = 1 - tau
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape, dtype=complex)
    n = 0
    while True:
        a = s ** (4 * n + 1)
        if abs(a) < cutoff:
            break
        out += -a * np.exp(-1j * np.pi * (2 * s + 2 * s ** (4 * n) + a) * y) * np.sinc(a * y)
        n += 1
    return out


@dataclass
class ClosedFormReport:
    system_id: str
    grid: np.ndarray
    max_error: float
    at_zero: dict


def closed_form_check(system_id: str, grid: Sequence[float] | None = None, system=None, eta: float | None = None,
                      tol: float = 1e-13) -> ClosedFormReport:
    """Cocycle-path window transforms against closed forms on a grid.

    ``system_id`` is "fibonacci" or "rho_tilde"; the matching rule is built
    from the shipped fixtures unless ``system`` is given.
    """
    from .fixtures import load_fixture
    from .system import build_system
    from .windows import solve_windows

    if system_id not in ("fibonacci", "rho_tilde"):
        raise OracleError(f"unknown system id {system_id!r}")
    y = np.linspace(-5, 5, 101) if grid is None else np.asarray(grid, dtype=float)
    system = system or build_system(load_fixture(system_id))
    if eta is None:
        eta = solve_windows(system).eta
    spec = internal_spec(system)
    res = riesz_limit(spec, system.emb.R, 1 / system.pf.lam, y.reshape(-1, 1), system.pf.v, tol=tol)
    f = eta * res.c
    if system_id == "fibonacci":
        fa, fb = fibonacci_closed_forms(y)
        err = max(np.max(np.abs(f[:, 0] - fa)), np.max(np.abs(f[:, 1] - fb)))
        res0 = riesz_limit(spec, system.emb.R, 1 / system.pf.lam, np.zeros(1), system.pf.v, tol=tol)
        zero = {"f_a": complex(eta * res0.c[0]), "f_b": complex(eta * res0.c[1])}
    else:
        i = system.rule.letters.index("1")
        ref = rho_tilde_series(y)
        err = np.max(np.abs(f[:, i] - ref))
        res0 = riesz_limit(spec, system.emb.R, 1 / system.pf.lam, np.zeros(1), system.pf.v, tol=tol)
        zero = {"f_1": complex(eta * res0.c[i]), "series": complex(rho_tilde_series(np.zeros(1))[0])}
    return ClosedFormReport(system_id, y, float(err), zero)
