"""Internal Fourier matrix, its cocycle and the matrix Riesz product C(y).

All evaluators accept a single point ``y`` of shape ``(d-1,)`` or a batch of
shape ``(n, d-1)``; batched results carry a leading axis of length ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI_I = 2j * np.pi


@dataclass(frozen=True)
class FourierMatrixSpec:
    """Flattened list of (row, column, exponent) triples of the Fourier matrix."""

    N: int
    rows: np.ndarray  # (K,)
    cols: np.ndarray  # (K,)
    exponents: np.ndarray  # (K, m) star-mapped (or direct) displacements
    M: np.ndarray

    @classmethod
    def from_cells(cls, cells: list[list[np.ndarray]], M: np.ndarray) -> "FourierMatrixSpec":
        N = len(cells)
        rows, cols, exps = [], [], []
        dim = None
        for i in range(N):
            for j in range(N):
                cell = np.asarray(cells[i][j], dtype=float)
                if cell.ndim == 1:
                    cell = cell[:, None]
                if len(cell):
                    dim = cell.shape[1]
                for t in cell:
                    rows.append(i)
                    cols.append(j)
                    exps.append(t)
        exps = np.array(exps, dtype=float).reshape(len(rows), dim or 0)
        spec = cls(N, np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), exps, np.asarray(M))
        counts = np.zeros((N, N), dtype=np.int64)
        np.add.at(counts, (spec.rows, spec.cols), 1)
        if not np.array_equal(counts, spec.M):
            raise ValueError("exponent multiplicities do not match the substitution matrix")
        return spec

    @property
    def dim(self) -> int:
        return self.exponents.shape[1]


def internal_spec(system) -> FourierMatrixSpec:
    return FourierMatrixSpec.from_cells(system.Tstar, system.M)


def _as_batch(y, dim: int) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1
    y = y.reshape(-1, dim) if dim else y.reshape(-1, 0)
    if single and y.shape[0] != 1:
        raise ValueError(f"expected a point of dimension {dim}")
    return y, single


def eval_internal_B(spec: FourierMatrixSpec, y) -> np.ndarray:
    """B_ij(y) = sum over t in T_ij of exp(2 pi i <t* | y>)."""
    Y, single = _as_batch(y, spec.dim)
    if Y.shape[1] != spec.dim:
        raise ValueError(f"dimension mismatch: y has {Y.shape[1]} components, expected {spec.dim}")
    phases = np.exp(TWO_PI_I * (Y @ spec.exponents.T))  # (n, K)
    out = np.zeros((Y.shape[0], spec.N * spec.N), dtype=complex)
    flat = spec.rows * spec.N + spec.cols
    for k in range(len(flat)):
        out[:, flat[k]] += phases[:, k]
    out = out.reshape(-1, spec.N, spec.N)
    return out[0] if single else out


def eval_direct_B(T: list[list[np.ndarray]] | FourierMatrixSpec, k, M: np.ndarray | None = None) -> np.ndarray:
    """Direct-space Fourier matrix sum over x in T_ij of exp(2 pi i x k)."""
    spec = T if isinstance(T, FourierMatrixSpec) else FourierMatrixSpec.from_cells(T, M)
    k = np.asarray(k, dtype=float)
    return eval_internal_B(spec, k.reshape(-1, 1) if k.ndim else k.reshape(1))


def cocycle_product(spec: FourierMatrixSpec, R: np.ndarray, y, n: int) -> np.ndarray:
    """B(y) B(Ry) ... B(R^{n-1} y), with the empty product the identity."""
    Y, single = _as_batch(y, spec.dim)
    P = np.broadcast_to(np.eye(spec.N, dtype=complex), (Y.shape[0], spec.N, spec.N)).copy()
    for _ in range(n):
        P = P @ eval_internal_B(spec, Y).reshape(-1, spec.N, spec.N)
        Y = Y @ R.T
    return P[0] if single else P


@dataclass(frozen=True)
class RieszProductResult:
    C: np.ndarray
    c: np.ndarray
    n_used: int | np.ndarray
    residual: float | np.ndarray
    second_singular: float | np.ndarray
    first_singular: float | np.ndarray
    theta: float

    @property
    def rank1_ratio(self):
        return self.second_singular / self.first_singular


def riesz_limit(spec: FourierMatrixSpec, R: np.ndarray, beta: float, y, v: np.ndarray,
                tol: float = 1e-10, n_max: int = 200) -> RieszProductResult:
    """C(y) = lim beta^n B(y) B(Ry) ... B(R^{n-1} y) and c(y) = C(y) v.

    Each factor is scaled by beta as it is multiplied in, so partial products
    stay O(1).  Iteration stops once every point in the batch has a
    successive-difference residual below ``tol``; points that already
    converged keep their value.  Non-convergence is reported through the
    residual rather than raised.
    """
    Y, single = _as_batch(y, spec.dim)
    n_pts = Y.shape[0]
    N = spec.N
    P = np.broadcast_to(np.eye(N, dtype=complex), (n_pts, N, N)).copy()
    residual = np.full(n_pts, np.inf)
    n_used = np.zeros(n_pts, dtype=np.int64)
    active = np.arange(n_pts)
    Ya = Y.copy()
    n = 0
    while len(active) and n < n_max:
        B = eval_internal_B(spec, Ya).reshape(-1, N, N)
        nxt = P[active] @ (beta * B)
        res = np.abs(nxt - P[active]).reshape(len(active), -1).max(axis=1)
        P[active] = nxt
        residual[active] = res
        n += 1
        n_used[active] = n
        keep = res >= tol
        active = active[keep]
        Ya = (Ya @ R.T)[keep]
    sv = np.linalg.svd(P, compute_uv=False)
    c = P @ np.asarray(v, dtype=complex)
    theta = float(max(abs(np.linalg.eigvals(R)))) if R.size else 0.0
    if single:
        return RieszProductResult(P[0], c[0], int(n_used[0]), float(residual[0]),
                                  float(sv[0, 1]) if N > 1 else 0.0, float(sv[0, 0]), theta)
    second = sv[:, 1] if N > 1 else np.zeros(n_pts)
    return RieszProductResult(P, c, n_used, residual, second, sv[:, 0], theta)


def window_ft(result: RieszProductResult, eta: float) -> np.ndarray:
    """f_i(y) = eta * c_i(y), the inverse Fourier transform of the window indicators."""
    return eta * result.c


def expected_steps(theta: float, tol: float, scale: float = 1.0) -> int:
    """Rough iteration count log(tol/scale)/log(theta) for the geometric tail."""
    if theta <= 0:
        return 1
    return int(np.ceil(np.log(tol / max(scale, 1e-300)) / np.log(theta)))


def empirical_cB(spec: FourierMatrixSpec, R: np.ndarray, beta: float, Y: np.ndarray, n_max: int = 60) -> float:
    """Largest max-norm of beta^n B^(n)(y) seen over the given points and n <= n_max."""
    Y, _ = _as_batch(Y, spec.dim)
    N = spec.N
    P = np.broadcast_to(np.eye(N, dtype=complex), (Y.shape[0], N, N)).copy()
    best = 1.0
    for _ in range(n_max):
        P = P @ (beta * eval_internal_B(spec, Y).reshape(-1, N, N))
        Y = Y @ R.T
        best = max(best, float(np.abs(P).max()))
    return best


def fibonacci_q(y, n: int = 80) -> np.ndarray:
    """Scalar recursion q_{n+1}(y) = |s| q_n(s y) + s^2 e^{2 pi i s^2 y} q_{n-1}(s^2 y), s = 1 - tau.

    Starts from q_0 = q_1 = |s|; the limit is c_a(y) of the Fibonacci rule.
    q_m is needed at the points s^j y, so a table over (m, j) is filled
    bottom-up.
    """
    s = (1 - np.sqrt(5)) / 2
    y = np.atleast_1d(np.asarray(y, dtype=float))
    J = 2 * n + 2
    pts = y[None, :] * s ** np.arange(J + 1)[:, None]  # pts[j] = s^j y
    prev = np.full(pts.shape, abs(s), dtype=complex)  # q_0 at every s^j y
    cur = prev.copy()  # q_1
    for _ in range(1, n):
        nxt = np.empty_like(cur)
        nxt[:-2] = abs(s) * cur[1:-1] + s**2 * np.exp(TWO_PI_I * s**2 * pts[:-2]) * prev[2:]
        nxt[-2:] = cur[-2:]
        prev, cur = cur, nxt
    return cur[0]
