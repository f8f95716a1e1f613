"""Exact arithmetic in Q(lambda) and the Minkowski embedding of Z[lambda].

Field elements are rational coefficient vectors over the power basis
``1, lam, ..., lam**(d-1)``.  Polynomials are integer tuples ordered from the
constant term upwards, so ``x**2 - x - 1`` is ``(-1, -1, 1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import mpmath
import numpy as np


class FieldError(ValueError):
    """Raised when a polynomial or embedding violates the PV-unit setting."""


# ----------------------------------------------------------------------------
# integer / rational polynomial helpers


def _trim(p: list) -> list:
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def poly_mul(a: Sequence, b: Sequence) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def poly_divmod(num: Sequence, den: Sequence) -> tuple[list, list]:
    """Exact division over Q; returns (quotient, remainder) as Fractions."""
    num = [Fraction(c) for c in num]
    den = _trim([Fraction(c) for c in den])
    if len(num) < len(den):
        return [Fraction(0)], _trim(num)
    quot = [Fraction(0)] * (len(num) - len(den) + 1)
    lead = den[-1]
    for k in range(len(quot) - 1, -1, -1):
        c = num[k + len(den) - 1] / lead
        quot[k] = c
        if c:
            for j, dj in enumerate(den):
                num[k + j] -= c * dj
    rem = _trim(num[: len(den) - 1] or [Fraction(0)])
    return _trim(quot), rem


def poly_derivative(p: Sequence[int]) -> list[int]:
    return [i * c for i, c in enumerate(p)][1:] or [0]


def poly_str(p: Sequence, var: str = "x") -> str:
    """Human readable form, highest power first."""
    terms = []
    for k in range(len(p) - 1, -1, -1):
        c = p[k]
        if c == 0:
            continue
        mag = abs(c)
        if k == 0:
            body = f"{mag}"
        else:
            mono = var if k == 1 else f"{var}^{k}"
            body = mono if mag == 1 else f"{mag}*{mono}"
        sign = "-" if c < 0 else "+"
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


def charpoly(M: np.ndarray | Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Exact characteristic polynomial det(xI - M) via Faddeev-LeVerrier."""
    A = [[int(x) for x in row] for row in np.asarray(M, dtype=object).tolist()]
    n = len(A)
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    Mk = [[0] * n for _ in range(n)]  # M_0 = 0
    c_prev = 1
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        prod = [[sum(A[i][l] * Mk[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            prod[i][i] += c_prev
        Mk = prod
        AM = [[sum(A[i][l] * Mk[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        tr = sum(AM[i][i] for i in range(n))
        c = Fraction(-tr, k)
        assert c.denominator == 1
        c_prev = int(c)
        coeffs[n - k] = c_prev
    return tuple(coeffs)


def _roots(p: Sequence[int], extended: bool = False) -> list[complex]:
    if extended:
        mpmath.mp.dps = 50
        rts = mpmath.polyroots(list(reversed([int(c) for c in p])), maxsteps=500, extraprec=200)
        return [complex(r) for r in rts]
    rts = np.roots(np.array(list(reversed(p)), dtype=float))
    return [complex(polish_root(p, complex(r))) for r in rts]


def polish_root(p: Sequence[int], z: complex, steps: int = 8) -> complex:
    dp = poly_derivative(p)
    for _ in range(steps):
        f = sum(c * z**k for k, c in enumerate(p))
        g = sum(c * z**k for k, c in enumerate(dp))
        if g == 0:
            break
        step = f / g
        z = z - step
        if abs(step) < 1e-17 * max(1.0, abs(z)):
            break
    return z


def minimal_polynomial(M, lam: float, round_tol: float = 1e-4) -> tuple[int, ...]:
    """Monic irreducible integer factor of charpoly(M) vanishing at ``lam``.

    Candidate factors are products over subsets of the remaining roots (closed
    under complex conjugation) together with ``lam``; the smallest candidate
    with integer coefficients that divides the characteristic polynomial
    exactly is returned.
    """
    p = charpoly(M)
    for extended in (False, True):
        found = _minpoly_from_roots(p, lam, _roots(p, extended), round_tol)
        if found is not None:
            break
    else:
        raise FieldError("could not recover an integer factor; root precision insufficient")
    _check_pv_unit(found, lam)
    return found


def _minpoly_from_roots(p, lam, roots, round_tol):
    i0 = min(range(len(roots)), key=lambda i: abs(roots[i] - lam))
    if abs(roots[i0] - lam) > 1e-6 * max(1.0, lam):
        raise FieldError(f"{lam} is not a root of the characteristic polynomial")
    rest = [r for i, r in enumerate(roots) if i != i0]
    # group conjugate pairs so subsets stay real
    groups: list[list[complex]] = []
    used = [False] * len(rest)
    for i, r in enumerate(rest):
        if used[i]:
            continue
        used[i] = True
        if abs(r.imag) > 1e-9:
            j = min(
                (j for j in range(len(rest)) if not used[j]),
                key=lambda j: abs(rest[j] - r.conjugate()),
                default=None,
            )
            if j is not None:
                used[j] = True
                groups.append([r, rest[j]])
                continue
        groups.append([r])
    for size in range(len(groups) + 1):
        cands = []
        for combo in itertools.combinations(range(len(groups)), size):
            rts = [complex(lam)] + [z for g in combo for z in groups[g]]
            cands.append(rts)
        cands.sort(key=len)
        for rts in cands:
            c = np.array([1.0 + 0j])
            for z in rts:
                c = np.convolve(c, np.array([-z, 1.0]))
            if np.max(np.abs(c.imag)) > round_tol:
                continue
            ints = np.round(c.real)
            if np.max(np.abs(c.real - ints)) > round_tol:
                continue
            cand = tuple(int(v) for v in ints)
            _, rem = poly_divmod(p, cand)
            if all(r == 0 for r in rem):
                return cand
    return None


def _check_pv_unit(poly: Sequence[int], lam: float) -> None:
    if abs(poly[0]) != 1:
        raise FieldError(f"constant term {poly[0]} is not +-1; inflation factor is not a unit")
    for z in _roots(poly):
        if abs(z - lam) < 1e-8:
            continue
        if abs(z) >= 1.0:
            raise FieldError(f"conjugate {z} of {lam} has modulus >= 1; not a PV number")


# ----------------------------------------------------------------------------
# the field and its elements


def _frac_solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Solve A x = b exactly by Gauss-Jordan elimination."""
    n = len(A)
    aug = [list(map(Fraction, row)) + [Fraction(b[i])] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [aug[i][n] for i in range(n)]


class NumberField:
    """The field Q(lam) for a monic irreducible integer polynomial."""

    def __init__(self, minpoly: Sequence[int]):
        mp = tuple(int(c) for c in minpoly)
        if mp[-1] != 1:
            raise FieldError("minimal polynomial must be monic")
        self.minpoly = mp
        self.degree = len(mp) - 1

    def __repr__(self) -> str:
        return f"NumberField({poly_str(self.minpoly)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, NumberField) and other.minpoly == self.minpoly

    def __hash__(self) -> int:
        return hash(self.minpoly)

    def __call__(self, coeffs: Iterable) -> "FieldElement":
        return FieldElement(self, coeffs)

    def from_int(self, n) -> "FieldElement":
        return FieldElement(self, [n])

    @cached_property
    def zero(self) -> "FieldElement":
        return FieldElement(self, [0])

    @cached_property
    def one(self) -> "FieldElement":
        return FieldElement(self, [1])

    @cached_property
    def gen(self) -> "FieldElement":
        return FieldElement(self, [0, 1]) if self.degree > 1 else FieldElement(self, [-self.minpoly[0]])

    @cached_property
    def gen_inverse(self) -> "FieldElement":
        # lam * (lam^{d-1} + a_{d-1} lam^{d-2} + ... + a_1) = -a_0
        a = self.minpoly
        a0 = a[0]
        coeffs = [Fraction(-a[k + 1], a0) for k in range(self.degree)]
        return FieldElement(self, coeffs)

    @cached_property
    def lam(self) -> float:
        """The real (Perron-Frobenius) root, largest real root."""
        return max(z.real for z in _roots(self.minpoly) if abs(z.imag) < 1e-9)

    @cached_property
    def power_sums(self) -> tuple[int, ...]:
        """p_m = sum of m-th powers of all roots, m = 0 .. 2d-2 (Newton's identities)."""
        d = self.degree
        a = self.minpoly
        # elementary symmetric e_k = (-1)^k a_{d-k}
        e = [1] + [(-1) ** k * a[d - k] for k in range(1, d + 1)]
        p = [d]
        for m in range(1, 2 * d):
            s = sum((-1) ** (i - 1) * e[i] * p[m - i] for i in range(1, min(m - 1, d) + 1))
            if m <= d:
                s += (-1) ** (m - 1) * m * e[m]
            p.append(s)
        return tuple(p)

    def reduce(self, coeffs: Sequence) -> list[Fraction]:
        c = [Fraction(x) for x in coeffs]
        d = self.degree
        a = self.minpoly
        for k in range(len(c) - 1, d - 1, -1):
            lead = c[k]
            if lead:
                for j in range(d):
                    c[k - d + j] -= lead * a[j]
            c[k] = Fraction(0)
        c = c[:d] + [Fraction(0)] * max(0, d - len(c))
        return c


@dataclass(frozen=True, eq=False)
class FieldElement:
    field: NumberField
    coeffs: tuple[Fraction, ...] = field(default=())

    def __init__(self, fld: NumberField, coeffs: Iterable = ()):
        object.__setattr__(self, "field", fld)
        object.__setattr__(self, "coeffs", tuple(fld.reduce(list(coeffs) or [0])))

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldError("elements from different fields")
            return other
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.field, [other])
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, poly_mul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = self.field.one
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.field.minpoly, self.coeffs))

    def __float__(self) -> float:
        return float(self.real_value())

    def __repr__(self) -> str:
        return f"FieldElement({self.to_str()})"

    def real_value(self, dps: int = 0) -> float:
        """Value under the identity embedding (the PF root)."""
        if dps:
            mpmath.mp.dps = dps
            lam = mpmath.findroot(
                lambda x: sum(c * x**k for k, c in enumerate(self.field.minpoly)),
                self.field.lam,
            )
            return sum(mpmath.mpf(c.numerator) / c.denominator * lam**k for k, c in enumerate(self.coeffs))
        lam = self.field.lam
        return sum(float(c) * lam**k for k, c in enumerate(self.coeffs))

    def mul_matrix(self) -> list[list[Fraction]]:
        """Matrix of y -> self*y on the power basis (columns are images of lam^j)."""
        d = self.field.degree
        cols = [(self * FieldElement(self.field, [0] * j + [1])).coeffs for j in range(d)]
        return [[cols[j][i] for j in range(d)] for i in range(d)]

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero field element")
        d = self.field.degree
        e0 = [Fraction(1)] + [Fraction(0)] * (d - 1)
        return FieldElement(self.field, _frac_solve(self.mul_matrix(), e0))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def is_integral(self) -> bool:
        """True when all power-basis coefficients are integers (element of Z[lam])."""
        return all(c.denominator == 1 for c in self.coeffs)

    def int_coeffs(self) -> tuple[int, ...]:
        if not self.is_integral():
            raise FieldError(f"{self.to_str()} is not in Z[lam]")
        return tuple(int(c) for c in self.coeffs)

    def trace(self) -> Fraction:
        ps = self.field.power_sums
        return sum((c * ps[k] for k, c in enumerate(self.coeffs)), Fraction(0))

    def to_str(self, var: str = "L") -> str:
        den = 1
        for c in self.coeffs:
            den = den * c.denominator // np.gcd(den, c.denominator)
        nums = [int(c * den) for c in self.coeffs]
        body = poly_str(nums, var)
        if den == 1:
            return body
        return f"({body})/{den}"


def fe_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def fe_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def fe_mul_lambda_inv(a: FieldElement) -> FieldElement:
    """Multiply by lam^-1, which lies in Z[lam] for a unit."""
    return a * a.field.gen_inverse


def trace(x: FieldElement) -> Fraction:
    return x.trace()


# ----------------------------------------------------------------------------
# Minkowski embedding


@dataclass(frozen=True)
class EmbeddingData:
    field: NumberField
    real_roots: tuple[float, ...]
    complex_roots: tuple[complex, ...]
    B: np.ndarray
    Bstar: np.ndarray
    Q: np.ndarray
    theta: FieldElement

    @property
    def minpoly(self) -> tuple[int, ...]:
        return self.field.minpoly

    @property
    def degree(self) -> int:
        return self.field.degree

    @property
    def internal_dim(self) -> int:
        return self.field.degree - 1

    @property
    def lam(self) -> float:
        return self.real_roots[0]

    @property
    def R(self) -> np.ndarray:
        return self.Q.T

    @property
    def contraction(self) -> float:
        """Spectral radius of Q (its largest conjugate modulus)."""
        if self.internal_dim == 0:
            return 0.0
        return float(max(abs(np.linalg.eigvals(self.Q))))

    @property
    def lattice_density(self) -> float:
        return 1.0 / abs(np.linalg.det(self.B))

    @cached_property
    def _star_matrix(self) -> np.ndarray:
        return self.B[1:, :]

    @cached_property
    def pairing_weights(self) -> np.ndarray:
        """Diagonal D with tr(xy) = <Phi(x) | D Phi(y)>."""
        r = len(self.real_roots)
        return np.array([1.0] * r + [2.0, -2.0] * len(self.complex_roots))

    def star(self, x: FieldElement) -> np.ndarray:
        return star_map(x, self)

    def star_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Star map of (many) power-basis coefficient rows."""
        return np.asarray(coeffs, dtype=float) @ self._star_matrix.T

    def real_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.B[0, :]

    def snap(self, value: float, height: int = 64, tol: float = 1e-10) -> FieldElement | None:
        """Low-height element of Z[lam] whose real value is within ``tol``.

        Only implemented for quadratic fields, where internal space is a line
        and window endpoints are real numbers of Z[lam].
        """
        if self.degree != 2:
            return None
        lam = self.lam
        best = None
        for b in sorted(range(-height, height + 1), key=abs):
            a = round(value - b * lam)
            err = abs(a + b * lam - value)
            if err < tol and (best is None or err < best[0]):
                best = (err, a, b)
                break
        if best is None:
            return None
        return self.field([best[1], best[2]])


def sort_roots(roots: Sequence[complex], lam: float) -> tuple[list[float], list[complex]]:
    reals = sorted((z.real for z in roots if abs(z.imag) < 1e-9), reverse=True)
    cplx = [z if z.imag > 0 else z.conjugate() for z in roots if z.imag > 1e-9]
    cplx.sort(key=lambda z: (-abs(z), -z.real))
    if abs(reals[0] - lam) > 1e-8:
        raise FieldError("PF root is not the largest real conjugate")
    return reals, cplx


def conjugates(x: FieldElement, emb: EmbeddingData) -> tuple[list[float], list[complex]]:
    c = [float(v) for v in x.coeffs]
    re = [sum(ck * r**k for k, ck in enumerate(c)) for r in emb.real_roots]
    cx = [sum(ck * z**k for k, ck in enumerate(c)) for z in emb.complex_roots]
    return re, cx


def star_map(x: FieldElement, emb: EmbeddingData) -> np.ndarray:
    """(kappa_2(x), ..., kappa_r(x), Re s_1(x), Im s_1(x), ...)."""
    re, cx = conjugates(x, emb)
    out = list(re[1:])
    for z in cx:
        out += [z.real, z.imag]
    return np.array(out, dtype=float)


def build_embedding(minpoly: Sequence[int]) -> EmbeddingData:
    fld = NumberField(minpoly)
    roots = _roots(fld.minpoly)
    d = fld.degree
    for i, j in itertools.combinations(range(d), 2):
        if abs(roots[i] - roots[j]) < 1e-7:
            raise FieldError("repeated roots; polynomial is not irreducible")
    lam = max(z.real for z in roots if abs(z.imag) < 1e-9)
    others = [z for z in roots if abs(z - lam) > 1e-9]
    if any(abs(z) >= lam - 1e-12 for z in others):
        raise FieldError("PF root is not strictly dominant")
    _check_pv_unit(fld.minpoly, lam)
    reals, cplx = sort_roots(roots, lam)

    B = np.zeros((d, d))
    for i in range(d):
        row = [r**i for r in reals]
        for z in cplx:
            w = z**i
            row += [w.real, w.imag]
        B[:, i] = row
    Bstar = np.linalg.inv(B).T

    blocks = [np.array([[r]]) for r in reals[1:]]
    for z in cplx:
        blocks.append(np.array([[z.real, -z.imag], [z.imag, z.real]]))
    Q = _block_diag(blocks) if blocks else np.zeros((0, 0))

    theta = _theta_candidate(fld)
    emb = EmbeddingData(fld, tuple(reals), tuple(cplx), B, Bstar, Q, theta)
    fourier_module_generator(emb)  # raises on inconsistency
    return emb


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k : k + m, k : k + m] = b
        k += m
    return out


def _theta_candidate(fld: NumberField) -> FieldElement:
    # Euler: the trace dual of Z[lam] is Z[lam] / f'(lam)
    dp = poly_derivative(fld.minpoly)
    return FieldElement(fld, dp).inverse()


def trace_dual_basis(fld: NumberField) -> list[FieldElement]:
    """Elements y_i with tr(lam^j y_i) = delta_ij."""
    d = fld.degree
    ps = fld.power_sums
    G = [[Fraction(ps[i + j]) for j in range(d)] for i in range(d)]
    out = []
    for i in range(d):
        e = [Fraction(int(i == j)) for j in range(d)]
        # y_i = sum_k c_k lam^k, tr(lam^j y_i) = sum_k c_k p_{j+k}
        out.append(FieldElement(fld, _frac_solve(G, e)))
    return out


def fourier_module_generator(emb: EmbeddingData, tol: float = 1e-8) -> FieldElement:
    """Generator theta of the Fourier module, L* = theta Z[lam], verified two ways.

    (a) the first row of the dual basis matrix holds the real values of the
        trace-dual basis, and that basis spans the same Z-module as
        theta * (1, lam, ..., lam^{d-1});
    (b) tr(theta lam^i lam^j) is an integer for all i, j < d.
    """
    fld = emb.field
    theta = emb.theta
    d = fld.degree
    dual = trace_dual_basis(fld)
    row = emb.Bstar[0, :]
    for i, y in enumerate(dual):
        if abs(y.real_value() - row[i]) > tol * max(1.0, abs(row[i])):
            raise FieldError(f"dual basis row disagrees with trace dual at index {i}")
        if not (y / theta).is_integral():
            raise FieldError("dual basis element not in theta*Z[lam]")
    powers = [fld.gen**i for i in range(d)]
    for i in range(d):
        for j in range(d):
            if (theta * powers[i] * powers[j]).trace().denominator != 1:
                raise FieldError("trace criterion fails for theta")
    # theta itself is in the Z-span of the dual basis: its coordinates are traces
    for j in range(d):
        if (theta * powers[j]).trace().denominator != 1:
            raise FieldError("theta not in dual module")
    return theta


def miller_to_k(indices: Sequence[int], emb: EmbeddingData) -> tuple[float, np.ndarray, FieldElement]:
    """Wave number k = theta * (m_0 + m_1 lam + ...) for Miller indices m."""
    fld = emb.field
    if len(indices) != fld.degree:
        raise ValueError(f"expected {fld.degree} Miller indices, got {len(indices)}")
    kf = emb.theta * fld([int(m) for m in indices])
    return kf.real_value(), star_map(kf, emb), kf


def internal_frequency(kf: FieldElement, emb: EmbeddingData) -> np.ndarray:
    """Internal-space partner of k in the dual lattice.

    For x in Z[lam] and k in the Fourier module,
    exp(-2 pi i k x) = exp(2 pi i <x* | y>) with y returned here.  Real
    conjugates enter once, complex conjugate pairs as (2 Re, -2 Im).
    """
    return emb.pairing_weights[1:] * star_map(kf, emb)
