"""Fourier-Bohr amplitudes and pure-point diffraction intensities."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cocycle import RieszProductResult, internal_spec, riesz_limit
from .numberfield import FieldElement, internal_frequency, star_map


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SPECTRA_THREADS", "1")))
    except ValueError:
        return 1


def density(system) -> tuple[float, np.ndarray]:
    """dens(Lambda) = 1 / sum_i v_i l_i and the per-letter densities v_i dens(Lambda)."""
    total = system.density
    return total, total * system.pf.v


def pisa_density(d: int, lam: float) -> float:
    """Closed form of the point density for the Pisa family of degree d."""
    return (lam**d - lam) / (2 * lam**d - (d + 1) * lam + (d - 1))


@dataclass(frozen=True)
class Amplitudes:
    values: np.ndarray
    formula: str  # "constant-covering", "per-letter" or "outside-module"


def amplitudes_at(result: RieszProductResult | None, dens_total: float, covering=None,
                  v: np.ndarray | None = None, volumes: np.ndarray | None = None,
                  eta: float | None = None, N: int | None = None) -> Amplitudes:
    """Per-letter amplitudes A_i(k) from the Riesz-product data at k's internal partner.

    With an a.e. constant covering function A_i = dens(Lambda) c_i.  Otherwise
    the per-letter form dens(Lambda_i) / vol(W_i) * f_i with f = eta c is
    used; it needs ``v``, ``volumes`` and ``eta``.  ``result=None`` stands for
    a wave number outside the Fourier module, where all amplitudes vanish.
    """
    if result is None:
        return Amplitudes(np.zeros(N or 0, dtype=complex), "outside-module")
    c = np.asarray(result.c)
    if covering is None or covering.constant:
        return Amplitudes(dens_total * c, "constant-covering")
    if v is None or volumes is None or eta is None:
        raise ValueError("non-constant covering needs v, volumes and eta for the per-letter formula")
    scale = dens_total * np.asarray(v) / np.asarray(volumes)
    return Amplitudes(scale * eta * c, "per-letter")


class AmplitudeEngine:
    """Evaluates amplitudes of a built system at Fourier-module elements."""

    def __init__(self, system, windows=None, tol: float = 1e-10, n_max: int = 200):
        self.system = system
        self.spec = internal_spec(system)
        self.windows = windows
        self.tol = tol
        self.n_max = n_max
        emb = system.emb
        d = emb.degree
        # real value and internal partner of theta * lam^i, per Miller index
        basis = [emb.theta * emb.field.gen**i for i in range(d)]
        self.k_basis = np.array([b.real_value() for b in basis])
        self.kstar_basis = np.array([star_map(b, emb) for b in basis]).reshape(d, emb.internal_dim)
        self.y_basis = np.array([internal_frequency(b, emb) for b in basis]).reshape(d, emb.internal_dim)

    @property
    def covering(self):
        return None if self.windows is None else self.windows.covering

    def riesz(self, Y) -> RieszProductResult:
        s = self.system
        return riesz_limit(self.spec, s.emb.R, 1.0 / s.pf.lam, Y, s.pf.v, tol=self.tol, n_max=self.n_max)

    def at_miller(self, miller) -> tuple[Amplitudes, RieszProductResult]:
        m = np.asarray(miller, dtype=float)
        res = self.riesz(m @ self.y_basis)
        return self._amps(res), res

    def at_field(self, k: FieldElement) -> Amplitudes:
        """Amplitudes at an exact wave number; zero outside the Fourier module."""
        emb = self.system.emb
        coords = k / emb.theta
        if not coords.is_integral():
            return amplitudes_at(None, self.system.density, N=self.system.N)
        return self.at_miller(coords.int_coeffs())[0]

    def _amps(self, res: RieszProductResult) -> Amplitudes:
        w = self.windows
        dens = self.system.density
        if w is None:
            return amplitudes_at(res, dens)
        return amplitudes_at(res, dens, w.covering, w.v, w.volumes, w.eta)

    def batch(self, millers: np.ndarray, threads: int = 1, chunk: int = 20000):
        """Amplitudes (n, N), residuals and formula tag for many Miller tuples."""
        millers = np.asarray(millers, dtype=np.int64).reshape(-1, self.system.emb.degree)
        Y = millers.astype(float) @ self.y_basis
        chunks = [slice(i, min(i + chunk, len(Y))) for i in range(0, len(Y), chunk)]

        def work(sl):
            res = self.riesz(Y[sl])
            return self._amps(res), res.residual

        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(work, chunks))
        else:
            parts = [work(sl) for sl in chunks]
        if not parts:
            return np.zeros((0, self.system.N), dtype=complex), np.zeros(0), "constant-covering"
        A = np.vstack([p[0].values.reshape(-1, self.system.N) for p in parts])
        resid = np.concatenate([np.atleast_1d(p[1]) for p in parts])
        return A, resid, parts[0][0].formula


@dataclass
class PeakRow:
    miller: tuple[int, ...]
    k: float
    kstar: np.ndarray
    amplitudes: np.ndarray
    intensity: float


@dataclass
class SpectrumTable:
    rows: list[PeakRow]
    letters: str
    weights: np.ndarray
    dens_total: float
    formula: str
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    @property
    def intensity(self) -> np.ndarray:
        return np.array([r.intensity for r in self.rows])

    def top(self, n: int, include_zero: bool = False) -> list[PeakRow]:
        rows = [r for r in self.rows if include_zero or any(r.miller)]
        return sorted(rows, key=lambda r: (-r.intensity, r.k))[:n]


def intensity(amplitudes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """I = |sum_i h_i A_i|^2 (last axis runs over letters)."""
    return np.abs(np.asarray(amplitudes) @ np.asarray(weights, dtype=complex)) ** 2


def miller_box(d: int, box: int | Sequence[int]) -> np.ndarray:
    bounds = [box] * d if np.isscalar(box) else list(box)
    if len(bounds) != d or any(b < 0 for b in bounds):
        raise ValueError("Miller box needs one non-negative bound per index")
    axes = [np.arange(-b, b + 1) for b in bounds]
    return np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, d)


def enumerate_peaks(system, box: int | Sequence[int] = 25, kmax: float = 10.0, kmin: float = 0.0,
                    floor: float = 1e-6, weights: Sequence[complex] | None = None, windows=None,
                    threads: int | None = None, engine: AmplitudeEngine | None = None) -> SpectrumTable:
    """Bragg peaks over a box of Miller indices with kmin <= k <= kmax.

    ``floor`` is relative: rows with I < floor * dens(Lambda)^2 are dropped.
    Rows are sorted by k (ties by Miller tuple), so the output is deterministic.
    """
    engine = engine or AmplitudeEngine(system, windows)
    N = system.N
    h = np.ones(N, dtype=complex) if weights is None else np.asarray(weights, dtype=complex)
    if h.shape != (N,):
        raise ValueError(f"expected {N} weights")
    threads = threads or default_threads()
    millers = miller_box(system.emb.degree, box)
    k = millers.astype(float) @ engine.k_basis
    sel = (k >= kmin - 1e-12) & (k <= kmax + 1e-12)
    millers, k = millers[sel], k[sel]
    A, resid, formula = engine.batch(millers, threads=threads)
    I = intensity(A, h)
    dens = system.density
    thr = floor * dens**2
    keep = I >= thr
    order = np.lexsort(tuple(millers[keep].T[::-1]) + (k[keep],))
    mk, kk, Ak, Ik = millers[keep][order], k[keep][order], A[keep][order], I[keep][order]
    kstar = mk.astype(float) @ engine.kstar_basis
    rows = [PeakRow(tuple(int(x) for x in mk[i]), float(kk[i]), kstar[i], Ak[i], float(Ik[i])) for i in range(len(kk))]
    coincide = int(np.sum(np.diff(kk) < 1e-12)) if len(kk) > 1 else 0
    meta = dict(box=box, kmin=kmin, kmax=kmax, floor=floor, threshold=thr, candidates=int(sel.sum()),
                max_residual=float(resid.max()) if len(resid) else 0.0, coincident_k=coincide,
                covering_degree=None if engine.covering is None else engine.covering.degree)
    if not rows:
        meta["warning"] = "no peaks above the floor"
    return SpectrumTable(rows, system.rule.letters, h, dens, formula, meta)


# ---------------------------------------------------------------------------
# export


def _g(x: float) -> str:
    return format(float(x), ".15g")


def spectrum_to_csv(table: SpectrumTable, d: int | None = None) -> str:
    if d is None:
        d = len(table.rows[0].miller) if table.rows else 0
    m = len(table.rows[0].kstar) if table.rows else max(d - 1, 0)
    head = [f"m{i}" for i in range(d)] + ["k"] + [f"kstar{i + 1}" for i in range(m)]
    for a in table.letters:
        head += [f"re_A_{a}", f"im_A_{a}"]
    head.append("intensity")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for r in table.rows:
        row = [str(x) for x in r.miller] + [_g(r.k)] + [_g(x) for x in r.kstar]
        for a in r.amplitudes:
            row += [_g(a.real), _g(a.imag)]
        row.append(_g(r.intensity))
        w.writerow(row)
    return buf.getvalue()


def spectrum_to_json(table: SpectrumTable) -> str:
    def num(x):
        return float(_g(x))

    doc = {
        "letters": table.letters,
        "weights": [[num(h.real), num(h.imag)] for h in table.weights],
        "density": num(table.dens_total),
        "formula": table.formula,
        "meta": {k: (num(v) if isinstance(v, float) else v) for k, v in table.meta.items()},
        "peaks": [
            {
                "miller": list(r.miller),
                "k": num(r.k),
                "kstar": [num(x) for x in r.kstar],
                "amplitudes": [[num(a.real), num(a.imag)] for a in r.amplitudes],
                "intensity": num(r.intensity),
            }
            for r in table.rows
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def spectrum_to_svg(table: SpectrumTable, width: int = 800, height: int = 300, labels: int = 8) -> str:
    pad = 30.0
    kmax = float(table.meta.get("kmax", max(table.k.max(), 1.0) if len(table) else 1.0))
    kmin = float(table.meta.get("kmin", 0.0))
    span = (kmax - kmin) or 1.0
    Imax = float(table.intensity.max()) if len(table) else 1.0
    X = lambda k: pad + (k - kmin) / span * (width - 2 * pad)
    H = lambda I: (I / Imax) * (height - 2 * pad)
    base = height - pad
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{base}" x2="{width - pad}" y2="{base}" stroke="black"/>']
    for t in range(int(np.ceil(kmin)), int(np.floor(kmax)) + 1):
        out.append(f'<line x1="{X(t):.3f}" y1="{base}" x2="{X(t):.3f}" y2="{base + 5}" stroke="black"/>')
        out.append(f'<text x="{X(t):.3f}" y="{base + 17}" font-size="10" text-anchor="middle">{t}</text>')
    out.append('<g stroke="#1f4e9c" stroke-width="1">')
    for r in table.rows:
        out.append(f'<line x1="{X(r.k):.3f}" y1="{base}" x2="{X(r.k):.3f}" y2="{base - H(r.intensity):.3f}"/>')
    out.append("</g>")
    for r in table.top(labels):
        lab = "(" + ",".join(str(x) for x in r.miller) + ")"
        out.append(f'<text x="{X(r.k):.3f}" y="{base - H(r.intensity) - 4:.3f}" font-size="9" '
                   f'text-anchor="middle">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_spectrum(table: SpectrumTable, fmt: str, d: int | None = None) -> str:
    if fmt == "csv":
        return spectrum_to_csv(table, d)
    if fmt == "json":
        return spectrum_to_json(table)
    if fmt == "svg":
        return spectrum_to_svg(table)
    raise ValueError(f"unknown format {fmt!r}")
