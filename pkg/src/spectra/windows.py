"""Windows (Rauzy fractals) of the covering model sets.

Internal dimension 1 uses an interval-union Hutchinson engine with exact-ish
endpoints; higher internal dimension uses star-mapped patch point clouds and
Monte-Carlo volumes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .numberfield import EmbeddingData, FieldElement

MERGE_TOL = 1e-12
SNAP_CLAIM = 2e-12  # endpoints this much farther than the nearest one keep their float value


class WindowError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted disjoint closed intervals, touching pieces merged."""

    intervals: tuple[tuple[float, float], ...]
    exact: tuple[tuple[FieldElement | None, FieldElement | None], ...] | None = None

    @classmethod
    def build(cls, pieces: Sequence[tuple[float, float]], tol: float = MERGE_TOL) -> "IntervalUnion":
        pieces = sorted((min(a, b), max(a, b)) for a, b in pieces)
        out: list[list[float]] = []
        for a, b in pieces:
            if out and a <= out[-1][1] + tol:
                out[-1][1] = max(out[-1][1], b)
            else:
                out.append([a, b])
        return cls(tuple((a, b) for a, b in out))

    @property
    def length(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    @property
    def hull(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]

    def __len__(self) -> int:
        return len(self.intervals)

    def affine(self, q: float, t: float) -> list[tuple[float, float]]:
        return [(q * a + t, q * b + t) for a, b in self.intervals]

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        hit = np.zeros(y.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (y >= a) & (y <= b)
        return hit

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion.build(self.intervals + other.intervals)

    def hausdorff(self, other: "IntervalUnion") -> float:
        """Hausdorff distance; for unions of intervals it is attained at endpoints."""
        def one_sided(A, B):
            worst = 0.0
            for a, b in A.intervals:
                for x in (a, b):
                    worst = max(worst, B._dist(x))
                # a gap of B inside [a, b] also counts
                for (_, gb), (ga, _) in zip(B.intervals, B.intervals[1:]):
                    lo, hi = max(a, gb), min(b, ga)
                    if lo < hi:
                        worst = max(worst, (hi - lo) / 2)
            return worst
        return max(one_sided(self, other), one_sided(other, self))

    def _dist(self, x: float) -> float:
        best = np.inf
        for a, b in self.intervals:
            if a <= x <= b:
                return 0.0
            best = min(best, abs(x - a), abs(x - b))
        return float(best)

    def ft(self, y) -> np.ndarray:
        """Integral of exp(2 pi i x y) over the union."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for a, b in self.intervals:
            L, c = b - a, (a + b) / 2
            out += L * np.exp(2j * np.pi * c * y) * np.sinc(L * y)
        return out

    def snapped(self, emb: EmbeddingData | None, tol: float = 1e-10) -> "IntervalUnion":
        """Replace endpoints by nearby low-height elements of Z[lam] and re-merge."""
        if emb is None:
            return self
        # Endpoints accumulate at low-height points, so several raw endpoints
        # can lie within tol of one element; only the nearest ones claim it.
        raw = [x for iv in self.intervals for x in iv]
        cand = [emb.snap(x, tol=tol) for x in raw]
        best: dict = {}
        for x, e in zip(raw, cand):
            if e is not None:
                d = abs(x - e.real_value())
                best[e] = min(best.get(e, np.inf), d)
        snaps = [e if e is not None and abs(x - e.real_value()) <= best[e] + SNAP_CLAIM else None
                 for x, e in zip(raw, cand)]
        pts = []
        for n, (a, b) in enumerate(self.intervals):
            ea, eb = snaps[2 * n], snaps[2 * n + 1]
            pts.append((ea, eb, ea.real_value() if ea is not None else a, eb.real_value() if eb is not None else b))
        out: list[list] = []
        for ea, eb, a, b in pts:
            if out and a <= out[-1][3] + MERGE_TOL:
                if b > out[-1][3]:
                    out[-1][1], out[-1][3] = eb, b
            else:
                out.append([ea, eb, a, b])
        return IntervalUnion(tuple((a, b) for _, _, a, b in out), tuple((ea, eb) for ea, eb, _, _ in out))


@dataclass(frozen=True)
class CoveringProfile:
    """Step function m_c on the union of windows, as (a, b, level) pieces."""

    pieces: tuple[tuple[float, float, int], ...]
    exact: bool
    levels: dict = field(default_factory=dict)  # level -> measure (or sample mass)

    @property
    def constant(self) -> bool:
        total = sum(self.levels.values())
        return total > 0 and max(self.levels.values()) >= 0.999 * total

    @property
    def degree(self) -> int | None:
        if not self.constant:
            return None
        return max(self.levels, key=self.levels.get)

    def integral(self) -> float:
        return float(sum(level * m for level, m in self.levels.items()))


@dataclass
class WindowSolution:
    letters: str
    windows: list  # IntervalUnion per letter, or (n_i, m) point clouds
    kind: str  # "intervals" or "cloud"
    v: np.ndarray
    volumes: np.ndarray | None = None
    volume_se: np.ndarray | None = None
    eta: float | None = None
    covering: CoveringProfile | None = None
    iterations: int = 0
    hausdorff_step: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.windows)

    def volume_ratio_error(self) -> np.ndarray:
        """|vol_i / v_i - eta| / eta per letter."""
        return np.abs(self.volumes / self.v - self.eta) / self.eta


# ---------------------------------------------------------------------------
# exact interval engine


def _hutchinson_intervals(W: list[IntervalUnion], Tstar, q: float) -> list[IntervalUnion]:
    N = len(W)
    out = []
    for i in range(N):
        pieces = []
        for j in range(N):
            for t in np.ravel(Tstar[i][j]):
                pieces += W[j].affine(q, float(t))
        out.append(IntervalUnion.build(pieces))
    return out


def solve_intervals(Tstar, q: float, v: Sequence[float], max_iter: int = 400, tol: float = 1e-12,
                    emb: EmbeddingData | None = None, letters: str | None = None) -> WindowSolution:
    """Attractor of W_i = U_j q W_j + T*_ij for a scalar contraction q.

    Starts from an interval that the map sends into itself, so the iterates
    decrease to the attractor; stops once successive Hausdorff distances drop
    below ``tol``.  Endpoints are snapped to Z[lam] where possible.
    """
    q = float(q)
    if not abs(q) < 1:
        raise WindowError(f"contraction |q| = {abs(q):.6g} is not < 1")
    N = len(Tstar)
    tmax = max((float(np.max(np.abs(np.ravel(c)))) for row in Tstar for c in row if np.size(c)), default=0.0)
    R = tmax / (1 - abs(q)) + 1.0
    W = [IntervalUnion(((-R, R),)) for _ in range(N)]
    step = np.inf
    for it in range(1, max_iter + 1):
        new = _hutchinson_intervals(W, Tstar, q)
        step = max(a.hausdorff(b) for a, b in zip(W, new))
        W = new
        if step < tol:
            break
    else:
        raise WindowError(f"interval iteration did not settle in {max_iter} steps (last step {step:.3g})")
    W = [w.snapped(emb) for w in W]
    sol = WindowSolution(letters or "".join(chr(97 + i) for i in range(N)), W, "intervals",
                         np.asarray(v, dtype=float), iterations=it, hausdorff_step=step)
    sol.meta["contraction"] = q
    return sol


def covering_profile_intervals(windows: Sequence[IntervalUnion]) -> CoveringProfile:
    """Exact step function m_c(y) = sum_i 1_{W_i}(y) over the union of windows."""
    cuts = sorted({x for w in windows for iv in w.intervals for x in iv})
    merged: list[list] = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= MERGE_TOL:
            continue
        mid = 0.5 * (a + b)
        level = int(sum(bool(w.contains(mid)) for w in windows))
        if level == 0:
            continue
        if merged and merged[-1][2] == level and abs(merged[-1][1] - a) <= MERGE_TOL:
            merged[-1][1] = b
        else:
            merged.append([a, b, level])
    levels: dict[int, float] = {}
    for a, b, level in merged:
        levels[level] = levels.get(level, 0.0) + (b - a)
    return CoveringProfile(tuple((a, b, lv) for a, b, lv in merged), True, levels)


def snap_profile_boundaries(profile: CoveringProfile, emb: EmbeddingData) -> list[FieldElement | None]:
    pts = sorted({p for a, b, _ in profile.pieces for p in (a, b)})
    return [emb.snap(p) for p in pts]


def rho_tilde_w1_series(sigma: float, cutoff: float = 1e-14) -> tuple[IntervalUnion, float]:
    """Union over n of sigma^{4n} [-sigma^2, -sigma^3] + sigma (sigma^{4n} - 1).

    Pieces shorter than ``cutoff`` are dropped; returns the union and the
    total length discarded (an upper bound for the truncation error).
    """
    s = float(sigma)
    pieces = []
    n = 0
    while True:
        scale = s ** (4 * n)
        L = abs(scale) * abs(s**3 - s**2)
        if L < cutoff:
            break
        a, b = scale * -(s**2), scale * -(s**3)
        shift = s * (scale - 1)
        pieces.append((a + shift, b + shift))
        n += 1
    r = abs(s) ** 4
    tail = abs(s) ** (4 * n) * abs(s**3 - s**2) / (1 - r)
    return IntervalUnion.build(pieces, tol=0.0), tail


# ---------------------------------------------------------------------------
# point clouds


def hutchinson_cloud(clouds: Sequence[np.ndarray], Tstar, Q: np.ndarray) -> list[np.ndarray]:
    """One step of the window IFS on finite point sets."""
    N = len(Tstar)
    out = []
    for i in range(N):
        parts = [np.asarray(clouds[j]) @ Q.T + t for j in range(N) for t in np.asarray(Tstar[i][j]).reshape(-1, Q.shape[0])]
        out.append(np.vstack(parts) if parts else np.zeros((0, Q.shape[0])))
    return out


def solve_cloud(system, target_points: int = 20000, max_steps: int = 200) -> WindowSolution:
    """Per-letter star images of an exact fixed-point patch.

    The patch is grown one inflation step at a time until every letter has
    at least ``target_points`` control points.  Any legal patch will do here
    (nesting is not needed), so the step count need not be a multiple of
    the fixed power.
    """
    emb = system.emb
    steps = 0
    patch = system.patch(0)
    while min(len(c) for c in patch.coeffs) < target_points:
        steps += 1
        if steps > max_steps:
            raise WindowError("patch growth exceeded the step cap")
        patch = system.patch(steps)
    clouds = [emb.star_coeffs(c) for c in patch.coeffs]
    if any(len(c) == 0 for c in clouds):
        raise WindowError("empty letter cloud")
    sol = WindowSolution(system.rule.letters, clouds, "cloud", system.pf.v.copy(), iterations=steps)
    sol.meta["patch_points"] = int(sum(len(c) for c in clouds))
    return sol


def _nn_median(cloud: np.ndarray, tree: cKDTree, max_pts: int = 20000, rng=None) -> float:
    rng = rng or np.random.default_rng(0)
    idx = np.arange(len(cloud)) if len(cloud) <= max_pts else rng.choice(len(cloud), max_pts, replace=False)
    d, _ = tree.query(cloud[idx], k=2)
    return float(np.median(d[:, 1]))


def tiling_lattice(system) -> np.ndarray | None:
    """Generators (l_i - l_N)* of the lattice by which the window union tiles.

    Only returned when the alphabet size equals the field degree (irreducible
    case) and the generators are independent; otherwise ``None``.
    """
    emb = system.emb
    if system.N != emb.degree or emb.internal_dim < 1:
        return None
    stars = [emb.star(l) for l in system.lengths]
    G = np.array([stars[i] - stars[-1] for i in range(system.N - 1)])
    if abs(np.linalg.det(G)) < 1e-9:
        return None
    return G


def _lattice_shifts(G: np.ndarray, a_lo, a_hi, b_lo, b_hi) -> np.ndarray:
    """Lattice vectors g (rows of n @ G) with ([a_lo, a_hi] + g) meeting [b_lo, b_hi]."""
    g_lo, g_hi = np.asarray(b_lo) - np.asarray(a_hi), np.asarray(b_hi) - np.asarray(a_lo)
    Gi = np.linalg.inv(G)
    # coordinates n = g Gi range over the image of the box of admissible g
    n_lo = np.floor(np.minimum(g_lo[:, None] * Gi, g_hi[:, None] * Gi).sum(axis=0)).astype(int)
    n_hi = np.ceil(np.maximum(g_lo[:, None] * Gi, g_hi[:, None] * Gi).sum(axis=0)).astype(int)
    last = np.arange(n_lo[-1], n_hi[-1] + 1)
    out = []
    for head in itertools.product(*[range(l, h + 1) for l, h in zip(n_lo[:-1], n_hi[:-1])]):
        n = np.column_stack([np.broadcast_to(np.array(head, dtype=float), (len(last), len(head))), last])
        g = n @ G
        out.append(g[np.all((g >= g_lo) & (g <= g_hi), axis=1)])
    return np.vstack(out)


def _chunks(sel: np.ndarray, size: int = 256):
    # sorted chunks keep the per-chunk query bound close to each member's own bound
    return np.array_split(sel, -(-len(sel) // size)) if len(sel) else []


def _box_distance(Z: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.maximum(np.maximum(lo - Z, Z - hi), 0.0), axis=1)


def estimate_volumes_cloud(sol: WindowSolution, mc_samples: int = 40000, lattice: np.ndarray | None = None,
                           eps_factor: float = 2.0, seed: int = 0, max_se: float | None = None,
                           max_cloud: int = 150_000, ball_points: int = 200):
    """Monte-Carlo volumes of point-cloud windows.

    With a tiling lattice G the union of the windows is a fundamental domain,
    so every point of internal space has exactly one lift into it.  Samples
    are drawn uniformly in the cell {t G : t in [0,1)^n} and labelled by the
    nearest cloud point among all their lattice translates; vol_i is the
    covolume times the fraction labelled i.  Without a lattice, samples fill
    the bounding box and count when their nearest point lies within eps
    (``eps_factor`` times the median nearest-neighbour spacing).

    The covering function is estimated from local point counts: every
    letter's cloud has the same point density inside its window, so the
    number of cloud points in a small ball around a sample, divided by the
    expected count for a single layer, rounds to m_c there.
    """
    rng = np.random.default_rng(seed)
    clouds = [np.asarray(c) for c in sol.windows]
    N = len(clouds)
    allpts = np.vstack(clouds)
    labels = np.concatenate([np.full(len(c), i) for i, c in enumerate(clouds)])
    if len(allpts) > max_cloud:
        keep = np.sort(rng.choice(len(allpts), max_cloud, replace=False))
        allpts, labels = allpts[keep], labels[keep]
    m = allpts.shape[1]
    tree = cKDTree(allpts)
    spacing = _nn_median(allpts, tree, rng=rng)
    eps = eps_factor * spacing
    plo, phi = allpts.min(axis=0), allpts.max(axis=0)
    if lattice is not None:
        G = np.asarray(lattice, dtype=float)
        box = float(abs(np.linalg.det(G)))
        Y = rng.random((mc_samples, m)) @ G
        cell_lo, cell_hi = np.minimum(G, 0).sum(axis=0), np.maximum(G, 0).sum(axis=0)
        # a lift farther than this from every cloud point is left unlabelled
        cap = 4 * eps
        best = np.full(mc_samples, np.inf)
        idx = np.full(mc_samples, -1)
        lift = np.zeros_like(Y)
        shifts = _lattice_shifts(G, cell_lo, cell_hi, plo - cap, phi + cap)
        # translates near the middle of the cloud first, so most lifts are found early and bound the rest
        centre = allpts.mean(axis=0) - G.sum(axis=0) / 2
        shifts = shifts[np.argsort(np.linalg.norm(shifts - centre, axis=1), kind="stable")]
        for g in shifts:
            Z = Y + g
            bound = np.minimum(best, cap)
            sel = np.flatnonzero(_box_distance(Z, plo, phi) < bound)
            sel = sel[np.argsort(bound[sel])]
            for j in _chunks(sel):
                d, k = tree.query(Z[j], distance_upper_bound=float(bound[j].max()))
                better = d < best[j]
                jj = j[better]
                best[jj], idx[jj], lift[jj] = d[better], k[better], Z[jj]
        cls = np.where(idx >= 0, labels[np.maximum(idx, 0)], -1)
        centres = lift[cls >= 0]
        method = "periodic"
    else:
        lo, hi = plo - eps, phi + eps
        box = float(np.prod(hi - lo))
        Y = lo + (hi - lo) * rng.random((mc_samples, m))
        dist, idx = tree.query(Y)
        cls = np.where(dist <= eps, labels[idx], -1)
        centres = Y[cls >= 0]
        method = "dilation"
    p = np.array([np.mean(cls == i) for i in range(N)])
    vols = box * p
    se = box * np.sqrt(p * (1 - p) / mc_samples)
    if max_se is not None and np.max(se / np.maximum(vols, 1e-300)) > max_se:
        raise WindowError("Monte-Carlo standard error above requested bound")
    eta = float(vols.sum() / sol.v.sum())
    # standard error of vol_i - v_i * sum_j vol_j, relative to eta v_i
    ratio_sigma = np.empty(N)
    for i in range(N):
        w = -sol.v[i] * np.ones(N)
        w[i] += 1
        var = (np.sum(w**2 * p) - np.sum(w * p) ** 2) / mc_samples
        ratio_sigma[i] = box * np.sqrt(max(var, 0.0)) / (eta * sol.v[i])

    dens = len(allpts) / vols.sum()
    unit_ball = np.pi ** (m / 2) / math.gamma(m / 2 + 1)
    rho = (ball_points / (dens * unit_ball)) ** (1 / m)
    counts = np.asarray(tree.query_ball_point(centres, rho, return_length=True), dtype=float)
    if lattice is not None:
        # translated copies of the union contribute near its boundary
        for g in _lattice_shifts(G, plo - rho, phi + rho, plo, phi):
            if not np.any(g):
                continue
            Z = centres - g
            sel = np.flatnonzero(_box_distance(Z, plo, phi) < rho)
            if len(sel):
                counts[sel] += tree.query_ball_point(Z[sel], rho, return_length=True)
    level = np.rint(counts / (dens * unit_ball * rho**m)).astype(int)
    lv, mass = np.unique(level[level > 0], return_counts=True)
    levels = {int(a): float(b) * box / mc_samples for a, b in zip(lv, mass)}
    prof = CoveringProfile((), False, levels)

    sol.volumes, sol.volume_se, sol.eta, sol.covering = vols, se, eta, prof
    sol.meta.update(method=method, eps=eps, spacing=spacing, mc_samples=mc_samples,
                    ratio_sigma=ratio_sigma, ball_radius=rho, box_volume=box,
                    unlabelled=float(np.mean(cls < 0)))
    if lattice is not None:
        sol.meta["lattice_covolume"] = box
    return vols, eta, prof


def estimate_volumes(sol: WindowSolution, emb: EmbeddingData | None = None, mc_samples: int = 40000,
                     lattice: np.ndarray | None = None, **kw):
    """Volumes, eta = vol_i / v_i and the covering profile.

    Exact for interval windows; Monte-Carlo for point clouds.
    """
    if sol.kind == "intervals":
        vols = np.array([w.length for w in sol.windows])
        sol.volumes = vols
        sol.volume_se = np.zeros_like(vols)
        sol.eta = float(vols.sum() / sol.v.sum())
        sol.covering = covering_profile_intervals(sol.windows)
        if emb is not None:
            sol.meta["level_boundaries"] = snap_profile_boundaries(sol.covering, emb)
        return vols, sol.eta, sol.covering
    return estimate_volumes_cloud(sol, mc_samples=mc_samples, lattice=lattice, **kw)


def solve_windows(system, tol: float = 1e-12, target_points: int = 20000, mc_samples: int = 40000) -> WindowSolution:
    """Solve and measure the windows of a built system."""
    emb = system.emb
    if emb.internal_dim == 1:
        sol = solve_intervals(system.Tstar, emb.Q[0, 0], system.pf.v, tol=tol, emb=emb, letters=system.rule.letters)
    else:
        sol = solve_cloud(system, target_points=target_points)
        estimate_volumes(sol, emb, mc_samples=mc_samples, lattice=tiling_lattice(system))
        return sol
    estimate_volumes(sol, emb)
    return sol


# ---------------------------------------------------------------------------
# rendering

PALETTE = ("#1f4e9c", "#c0392b", "#2e8b3d", "#d68910", "#7d3c98", "#17a589", "#566573", "#a04000")


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def render_windows(sol: WindowSolution, style: dict | None = None) -> str:
    """SVG picture of the windows: stacked bars (1D) or scatter (first two internal coordinates)."""
    style = dict(style or {})
    size = float(style.get("size", 480))
    palette = style.get("palette", PALETTE)
    max_points = int(style.get("max_points", 4000))
    pad = 30.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(size)}" height="{_fmt(size)}" '
           f'viewBox="0 0 {_fmt(size)} {_fmt(size)}">',
           f'<rect width="{_fmt(size)}" height="{_fmt(size)}" fill="white"/>']
    if sol.kind == "intervals":
        lo = min(w.hull[0] for w in sol.windows)
        hi = max(w.hull[1] for w in sol.windows)
        span = (hi - lo) or 1.0
        sx = (size - 2 * pad) / span
        X = lambda x: pad + (x - lo) * sx
        row_h = (size - 2 * pad) / (sol.N + 1)
        for i, w in enumerate(sol.windows):
            y0 = pad + i * row_h
            col = palette[i % len(palette)]
            out.append(f'<g fill="{col}"><title>{sol.letters[i]}</title>')
            for a, b in w.intervals:
                out.append(f'<rect x="{_fmt(X(a))}" y="{_fmt(y0)}" width="{_fmt(max((b - a) * sx, 0.5))}" '
                           f'height="{_fmt(0.6 * row_h)}"/>')
            out.append("</g>")
        axis_y = size - pad
        out.append(f'<line x1="{_fmt(pad)}" y1="{_fmt(axis_y)}" x2="{_fmt(size - pad)}" y2="{_fmt(axis_y)}" stroke="black"/>')
        for t in range(int(np.ceil(lo)), int(np.floor(hi)) + 1):
            out.append(f'<line x1="{_fmt(X(t))}" y1="{_fmt(axis_y - 5)}" x2="{_fmt(X(t))}" y2="{_fmt(axis_y + 5)}" stroke="black"/>')
    else:
        pts = [np.asarray(c)[:, :2] for c in sol.windows]
        allp = np.vstack(pts)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        span = float(max(hi - lo)) or 1.0
        s = (size - 2 * pad) / span
        X = lambda x: pad + (x - lo[0]) * s
        Y = lambda y: size - pad - (y - lo[1]) * s
        for i, c in enumerate(pts):
            step = max(1, len(c) // max_points)
            col = palette[i % len(palette)]
            out.append(f'<g fill="{col}"><title>{sol.letters[i]}</title>')
            for x, y in c[::step]:
                out.append(f'<circle cx="{_fmt(X(x))}" cy="{_fmt(Y(y))}" r="0.8"/>')
            out.append("</g>")
        # unit ticks on both axes through the origin
        ox, oy = X(0.0), Y(0.0)
        out.append(f'<line x1="{_fmt(pad)}" y1="{_fmt(oy)}" x2="{_fmt(size - pad)}" y2="{_fmt(oy)}" stroke="black" stroke-width="0.5"/>')
        out.append(f'<line x1="{_fmt(ox)}" y1="{_fmt(pad)}" x2="{_fmt(ox)}" y2="{_fmt(size - pad)}" stroke="black" stroke-width="0.5"/>')
        for t in range(int(np.ceil(lo[0])), int(np.floor(hi[0])) + 1):
            out.append(f'<line x1="{_fmt(X(t))}" y1="{_fmt(oy - 4)}" x2="{_fmt(X(t))}" y2="{_fmt(oy + 4)}" stroke="black"/>')
        for t in range(int(np.ceil(lo[1])), int(np.floor(hi[1])) + 1):
            out.append(f'<line x1="{_fmt(ox - 4)}" y1="{_fmt(Y(t))}" x2="{_fmt(ox + 4)}" y2="{_fmt(Y(t))}" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
