"""Symbolic layer: substitution rules, their matrices, PF data and patches."""

from __future__ import annotations

import ast
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from .numberfield import FieldElement, NumberField, charpoly, polish_root


class RuleError(ValueError):
    """Invalid rule text or rule structure."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class ConvergenceError(RuntimeError):
    pass


class LengthError(ValueError):
    pass


class PatchError(ValueError):
    pass


SATURATE = 2**63 - 1


@dataclass(frozen=True)
class SubstitutionRule:
    letters: tuple[str, ...]
    images: tuple[tuple[int, ...], ...]
    name: str = ""
    lengths_override: tuple[str, ...] | None = None

    def __post_init__(self):
        N = len(self.letters)
        if N == 0:
            raise RuleError("empty alphabet")
        if len(self.images) != N:
            raise RuleError("need exactly one image per letter")
        seen = set()
        for j, img in enumerate(self.images):
            if not img:
                raise RuleError(f"empty image for letter {self.letters[j]!r}")
            for i in img:
                if not 0 <= i < N:
                    raise RuleError(f"letter index {i} out of range")
            seen.update(img)
        dead = [self.letters[i] for i in range(N) if i not in seen]
        if dead:
            raise RuleError(f"letters never produced: {', '.join(dead)}")

    @property
    def alphabet_size(self) -> int:
        return len(self.letters)

    def word(self, indices: Sequence[int]) -> str:
        return "".join(self.letters[i] for i in indices)

    def apply(self, word: Sequence[int], times: int = 1) -> list[int]:
        w = list(word)
        for _ in range(times):
            w = [c for a in w for c in self.images[a]]
        return w

    def __str__(self) -> str:
        return " ; ".join(f"{a} -> {self.word(img)}" for a, img in zip(self.letters, self.images))


def rule_from_images(images: Sequence[str], letters: str | None = None, name: str = "") -> SubstitutionRule:
    """Build a rule from image strings, e.g. ``("ab", "a")``; letters default to sorted order."""
    if letters is None:
        letters = "".join(sorted(set("".join(images))))
    idx = {a: i for i, a in enumerate(letters)}
    return SubstitutionRule(tuple(letters), tuple(tuple(idx[c] for c in img) for img in images), name)


_RULE_RE = re.compile(r"\s*(\S)\s*->\s*(\S*)\s*$")


def parse_rule(text: str, name: str = "") -> SubstitutionRule:
    """Parse the rule-file grammar.

    ``letter -> letters`` clauses separated by ``;`` or newlines, ``#``
    comments, optional ``name: ...`` and ``lengths: e1, e2, ...`` lines where
    each ``e`` is an integer polynomial in ``L``.
    """
    lhs: list[str] = []
    rhs: list[tuple[str, int, int]] = []
    lengths = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        low = stripped.lower()
        if low.startswith("name:"):
            name = stripped.split(":", 1)[1].strip() or name
            continue
        if low.startswith("lengths:"):
            body = stripped.split(":", 1)[1]
            lengths = tuple(e.strip() for e in body.split(","))
            if any(not e for e in lengths):
                raise RuleError("empty length expression", lineno, line.index(":") + 2)
            for e in lengths:
                _check_length_expr(e, lineno, line.find(e) + 1)
            continue
        col = 0
        for clause in line.split(";"):
            start = col + 1
            col += len(clause) + 1
            if not clause.strip():
                continue
            m = _RULE_RE.match(clause)
            if m is None:
                if "->" not in clause:
                    raise RuleError(f"expected 'letter -> letters', got {clause.strip()!r}", lineno, start)
                left = clause.split("->", 1)[0].strip()
                if len(left) != 1:
                    raise RuleError(f"letters must be single characters, got {left!r}", lineno, start)
                raise RuleError(f"malformed clause {clause.strip()!r}", lineno, start)
            a, img = m.group(1), m.group(2)
            if a in lhs:
                raise RuleError(f"letter {a!r} defined twice", lineno, start)
            if not img:
                raise RuleError(f"empty image for letter {a!r}", lineno, start + clause.index("->") + 2)
            lhs.append(a)
            rhs.append((img, lineno, start + clause.index("->") + 2))
    if not lhs:
        raise RuleError("no substitution clauses found", 1, 1)
    idx = {a: i for i, a in enumerate(lhs)}
    images = []
    for img, lineno, col in rhs:
        for off, c in enumerate(img):
            if c not in idx:
                raise RuleError(f"unknown letter {c!r}", lineno, col + off)
        images.append(tuple(idx[c] for c in img))
    if lengths is not None and len(lengths) != len(lhs):
        raise RuleError(f"expected {len(lhs)} lengths, got {len(lengths)}")
    return SubstitutionRule(tuple(lhs), tuple(images), name, lengths)


_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Pow,
            ast.USub, ast.UAdd, ast.Constant, ast.Name, ast.Load)


def _length_ast(expr: str) -> ast.Expression:
    tree = ast.parse(expr.replace("^", "**"), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ValueError(f"unsupported syntax in {expr!r}")
        if isinstance(node, ast.Name) and node.id != "L":
            raise ValueError(f"unknown symbol {node.id!r} in {expr!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, int):
            raise ValueError(f"non-integer constant in {expr!r}")
    return tree


def _check_length_expr(expr: str, line: int, col: int) -> None:
    try:
        _length_ast(expr)
    except (SyntaxError, ValueError) as exc:
        raise RuleError(f"bad length expression: {exc}", line, col) from None


def eval_length(expr: str, fld: NumberField) -> FieldElement:
    """Evaluate an integer polynomial in ``L`` exactly in the field."""
    tree = _length_ast(expr)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            return fld.from_int(node.value)
        if isinstance(node, ast.Name):
            return fld.gen
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        a, b = ev(node.left), node.right
        if isinstance(node.op, ast.Pow):
            if not isinstance(b, ast.Constant):
                raise ValueError("exponent must be an integer literal")
            return a ** b.value
        b = ev(b)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        return a * b

    return ev(tree)


# ----------------------------------------------------------------------------
# matrices and PF data


def substitution_matrix(rule: SubstitutionRule) -> np.ndarray:
    N = rule.alphabet_size
    M = np.zeros((N, N), dtype=np.int64)
    for j, img in enumerate(rule.images):
        for i in img:
            M[i, j] += 1
    return M


def is_primitive(M: np.ndarray) -> bool:
    """Some power M^k with k <= N^2 - 2N + 2 is entrywise positive (Wielandt)."""
    A = (np.asarray(M) > 0).astype(np.int64)
    N = A.shape[0]
    bound = N * N - 2 * N + 2
    P = A.copy()
    k = 1
    while True:
        if P.all():
            return True
        if k >= bound:
            return False
        # boolean product keeps entries in {0, 1}
        P = (P @ A > 0).astype(np.int64)
        k += 1


@dataclass(frozen=True)
class PFData:
    lam: float
    v: np.ndarray
    u: np.ndarray
    P: np.ndarray


def pf_eigendata(M: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> PFData:
    """PF eigenvalue with right/left eigenvectors normalised <1|v> = <u|v> = 1."""
    M = np.asarray(M, dtype=float)
    if not is_primitive(M):
        raise ValueError("substitution matrix is not primitive")
    N = M.shape[0]

    def power(A):
        x = np.full(N, 1.0 / N)
        lam_old = 0.0
        for _ in range(max_iter):
            y = A @ x
            lam = y.sum() / x.sum()
            y /= y.sum()
            if np.max(np.abs(y - x)) < 1e-14 and abs(lam - lam_old) < 1e-14 * lam:
                return lam, y
            x, lam_old = y, lam
        raise ConvergenceError("power iteration did not converge")

    lam, v = power(M)
    _, u = power(M.T)
    lam = float(polish_root(charpoly(M.astype(np.int64)), complex(lam)).real)
    # one inverse-iteration refinement at the polished eigenvalue
    shift = lam * (1 + 1e-13)
    for vec, A in ((v, M), (u, M.T)):
        try:
            vec[:] = np.linalg.solve(A - shift * np.eye(N), vec)
        except np.linalg.LinAlgError:
            pass
        vec /= vec.sum()
    v = np.abs(v)
    v /= v.sum()
    u = np.abs(u)
    u /= u @ v
    res = max(np.max(np.abs(M @ v - lam * v)), np.max(np.abs(u @ M - lam * u)), abs(u @ v - 1))
    if res > max(tol, 1e-12) * max(1.0, lam) * 10:
        raise ConvergenceError(f"PF residual {res:.2e} above tolerance")
    return PFData(lam, v, u, np.outer(v, u))


# ----------------------------------------------------------------------------
# legal words and fixed seeds


def legal_pairs(rule: SubstitutionRule) -> set[tuple[int, int]]:
    """All two-letter words occurring in some iterate of the rule."""
    pairs = set()
    for img in rule.images:
        pairs.update(zip(img, img[1:]))
    frontier = list(pairs)
    while frontier:
        x, y = frontier.pop()
        p = (rule.images[x][-1], rule.images[y][0])
        if p not in pairs:
            pairs.add(p)
            frontier.append(p)
    return pairs


def find_fixed_power_and_seed(rule: SubstitutionRule) -> tuple[int, tuple[int, int]]:
    """Smallest power p admitting a legal seed x|y fixed under rule^p."""
    N = rule.alphabet_size
    legal = sorted(legal_pairs(rule))
    last = list(range(N))
    first = list(range(N))
    for p in range(1, N * N + 1):
        last = [rule.images[a][-1] for a in last]
        first = [rule.images[a][0] for a in first]
        # last[x] is the last letter of rho^p(x)
        for x, y in legal:
            if last[x] == x and first[y] == y:
                return p, (x, y)
    raise RuleError("no fixed legal seed found (rule not primitive?)")


# ----------------------------------------------------------------------------
# natural lengths and displacements


def _field_nullvector(A: list[list[FieldElement]]) -> list[FieldElement]:
    """One nonzero kernel vector of a corank-1 matrix over the field."""
    n = len(A)
    m = len(A[0])
    rows = [list(r) for r in A]
    pivots = []
    r = 0
    for c in range(m):
        piv = next((i for i in range(r, n) if not rows[i][c].is_zero()), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(n):
            if i != r and not rows[i][c].is_zero():
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(m) if c not in pivots]
    if not free:
        raise LengthError("eigenvalue equation has only the trivial solution")
    fc = free[0]
    fld = A[0][0].field
    x = [fld.zero] * m
    x[fc] = fld.one
    for i, c in enumerate(pivots):
        x[c] = -rows[i][fc]
    return x


def left_eigenvector_exact(M: np.ndarray, fld: NumberField) -> list[FieldElement]:
    N = M.shape[0]
    lam = fld.gen
    A = [[fld.from_int(int(M[j, i])) - (lam if i == j else 0) for j in range(N)] for i in range(N)]
    return _field_nullvector(A)


def _module_index(elements: Sequence[FieldElement]) -> int:
    """Index in Z[lam] of the lam-invariant module generated by ``elements``."""
    fld = elements[0].field
    d = fld.degree
    rows = []
    for x in elements:
        y = x
        for _ in range(d):
            rows.append(list(y.int_coeffs()))
            y = y * fld.gen
    snf = smith_normal_form(Matrix(rows), domain=ZZ)
    diag = [abs(int(snf[i, i])) for i in range(min(snf.shape))]
    if any(v == 0 for v in diag[:d]) or len(diag) < d:
        return 0
    idx = 1
    for v in diag[:d]:
        idx *= v
    return idx


@dataclass(frozen=True)
class NaturalLengths:
    lengths: tuple[FieldElement, ...]
    scaling: FieldElement  # lengths = scaling * (left eigenvector normalised to last-smallest = 1)
    module_index: int


def natural_lengths(rule: SubstitutionRule, fld: NumberField, max_retries: int = 8) -> NaturalLengths:
    """Interval lengths in Z[lam] along the left PF eigenvector, generating all of Z[lam].

    The eigenvector is scaled so that its smallest entry is 1 and then cleared
    of denominators.  If the displacement positions only generate a proper
    lam-invariant submodule, the lengths are divided by small-height
    candidates until the module becomes Z[lam].
    """
    M = substitution_matrix(rule)
    u = left_eigenvector_exact(M, fld)
    smallest = min(u, key=lambda x: abs(x.real_value()))
    if u[0].real_value() / smallest.real_value() < 0:
        smallest = -smallest
    scale = smallest.inverse()
    lengths = [x * scale for x in u]
    den = 1
    for x in lengths:
        for c in x.coeffs:
            den = den * c.denominator // np.gcd(den, c.denominator)
    lengths = [x * den for x in lengths]
    scale = scale * den
    if any(x.real_value() <= 0 for x in lengths):
        raise LengthError("left eigenvector is not positive")

    def index_of(ls):
        T = displacement_matrix(rule, ls, check=False)
        elems = [t for row in T.T for cell in row for t in cell] + list(ls)
        elems = [e for e in elems if not e.is_zero()]
        return _module_index(elems)

    idx = index_of(lengths)
    tries = 0
    while idx != 1:
        if tries >= max_retries or idx == 0:
            raise LengthError(f"positions generate a submodule of index {idx}; no admissible scaling found")
        tries += 1
        # candidate divisors of small height, smallest norm first
        best = None
        for coeffs in itertools.product(range(-2, 3), repeat=fld.degree):
            g = fld(list(coeffs))
            if g.is_zero() or abs(g.real_value()) < 1e-9:
                continue
            try:
                cand = [x / g for x in lengths]
            except ZeroDivisionError:
                continue
            if not all(c.is_integral() for c in cand) or any(c.real_value() <= 0 for c in cand):
                continue
            j = index_of(cand)
            if j and j < idx and (best is None or j < best[0]):
                best = (j, cand, g)
        if best is None:
            raise LengthError(f"positions generate a submodule of index {idx}; no admissible scaling found")
        idx, lengths, g = best
        scale = scale / g
    return NaturalLengths(tuple(lengths), scale, idx)


@dataclass(frozen=True)
class DisplacementMatrix:
    T: tuple[tuple[tuple[FieldElement, ...], ...], ...]  # T[i][j]: positions of letter i in image j
    lengths: tuple[FieldElement, ...]

    @property
    def N(self) -> int:
        return len(self.lengths)

    def int_arrays(self) -> list[list[np.ndarray]]:
        d = self.lengths[0].field.degree
        return [[np.array([t.int_coeffs() for t in cell], dtype=np.int64).reshape(-1, d)
                 for cell in row] for row in self.T]


def displacement_matrix(rule: SubstitutionRule, lengths: Sequence[FieldElement], check: bool = True) -> DisplacementMatrix:
    N = rule.alphabet_size
    fld = lengths[0].field
    T = [[[] for _ in range(N)] for _ in range(N)]
    for j, img in enumerate(rule.images):
        pos = fld.zero
        for i in img:
            T[i][j].append(pos)
            pos = pos + lengths[i]
        if check and pos != fld.gen * lengths[j]:
            raise LengthError(
                f"image of {rule.letters[j]!r} has length {pos.to_str()} != lam * {lengths[j].to_str()}; "
                "lengths are not PF-proportional"
            )
    return DisplacementMatrix(tuple(tuple(tuple(c) for c in row) for row in T), tuple(lengths))


# ----------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class TypedPointSet:
    """Control points per letter as integer power-basis coefficients."""

    coeffs: tuple[np.ndarray, ...]
    positions: tuple[np.ndarray, ...]
    left: float
    right: float
    steps: int
    counts: tuple[int, ...] = field(default=())

    @property
    def radius(self) -> float:
        return min(-self.left, self.right)

    @property
    def total(self) -> int:
        return sum(len(p) for p in self.positions)

    def within(self, r: float) -> list[np.ndarray]:
        return [np.abs(p) <= r for p in self.positions]


def companion(fld: NumberField) -> np.ndarray:
    """Integer matrix of multiplication by lam on coefficient vectors."""
    d = fld.degree
    C = np.zeros((d, d), dtype=np.int64)
    for j in range(d):
        img = (fld.gen * fld([0] * j + [1])).coeffs
        C[:, j] = [int(c) for c in img]
    return C


def iterate_patch(rule: SubstitutionRule, T: DisplacementMatrix, seed: tuple[int, int], n: int) -> TypedPointSet:
    """Apply the set inflation n times to a legal seed x|y straddling 0."""
    x, y = seed
    if (x, y) not in legal_pairs(rule):
        raise PatchError(f"seed {rule.letters[x]}|{rule.letters[y]} is not legal")
    fld = T.lengths[0].field
    d = fld.degree
    lam = fld.lam
    C = companion(fld)
    Tint = T.int_arrays()
    N = rule.alphabet_size
    pts = [np.zeros((0, d), dtype=np.int64) for _ in range(N)]
    lx = np.array(T.lengths[x].int_coeffs(), dtype=np.int64)
    pts[x] = np.vstack([pts[x], -lx[None, :]])
    pts[y] = np.vstack([pts[y], np.zeros((1, d), dtype=np.int64)])
    limit = 2**62 // max(1, int(np.abs(C).sum(axis=0).max()) + 1)
    for _ in range(n):
        scaled = [p @ C.T for p in pts]
        new = []
        for i in range(N):
            blocks = [scaled[j][:, None, :] + Tint[i][j][None, :, :] for j in range(N) if len(Tint[i][j])]
            new.append(np.concatenate([b.reshape(-1, d) for b in blocks]) if blocks else np.zeros((0, d), np.int64))
        pts = new
        if max((int(np.abs(p).max()) if len(p) else 0) for p in pts) > limit:
            raise PatchError("coordinate overflow; reduce the iteration count")
    powers = np.array([lam**k for k in range(d)])
    positions = []
    coeffs = []
    for p in pts:
        xs = p.astype(float) @ powers
        order = np.argsort(xs, kind="stable")
        positions.append(xs[order])
        coeffs.append(p[order])
    M = substitution_matrix(rule).astype(object)
    seed_counts = np.zeros(N, dtype=object)
    seed_counts[x] += 1
    seed_counts[y] += 1
    counts = np.linalg.matrix_power(M, n) @ seed_counts if n else seed_counts
    counts = tuple(min(int(c), SATURATE) for c in counts)
    left = -float(T.lengths[x].real_value()) * lam**n
    right = float(T.lengths[y].real_value()) * lam**n
    return TypedPointSet(tuple(coeffs), tuple(positions), left, right, n, counts)
