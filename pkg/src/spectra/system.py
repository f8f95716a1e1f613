"""Assembly of everything derived from a rule: field, lengths, displacements."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .numberfield import EmbeddingData, FieldElement, build_embedding, minimal_polynomial
from .substitution import (
    DisplacementMatrix,
    LengthError,
    PFData,
    SubstitutionRule,
    TypedPointSet,
    displacement_matrix,
    eval_length,
    find_fixed_power_and_seed,
    iterate_patch,
    natural_lengths,
    pf_eigendata,
    substitution_matrix,
)


@dataclass(frozen=True, eq=False)
class InflationSystem:
    rule: SubstitutionRule
    M: np.ndarray
    pf: PFData
    emb: EmbeddingData
    lengths: tuple[FieldElement, ...]
    T: DisplacementMatrix
    power: int
    seed: tuple[int, int]
    module_index: int = 1

    @property
    def N(self) -> int:
        return self.rule.alphabet_size

    @property
    def name(self) -> str:
        return self.rule.name

    @cached_property
    def Tstar(self) -> list[list[np.ndarray]]:
        """Star images of the displacements, T*[i][j] of shape (M_ij, d-1)."""
        out = []
        for row in self.T.int_arrays():
            out.append([self.emb.star_coeffs(cell) if len(cell) else np.zeros((0, self.emb.internal_dim))
                        for cell in row])
        return out

    @cached_property
    def length_values(self) -> np.ndarray:
        return np.array([x.real_value() for x in self.lengths])

    @cached_property
    def density(self) -> float:
        """Point density, the inverse of the mean tile length sum_i v_i l_i."""
        return 1.0 / float(self.pf.v @ self.length_values)

    def patch(self, steps: int) -> TypedPointSet:
        return iterate_patch(self.rule, self.T, self.seed, steps)

    def patch_for_radius(self, r: float) -> TypedPointSet:
        """Smallest fixed-point patch (iteration count a multiple of the power) covering [-r, r]."""
        lam = self.pf.lam
        lx = self.length_values[self.seed[0]]
        ly = self.length_values[self.seed[1]]
        n = 0
        while min(lx, ly) * lam**n < r:
            n += self.power
        return self.patch(n)


def build_system(rule: SubstitutionRule) -> InflationSystem:
    M = substitution_matrix(rule)
    pf = pf_eigendata(M)
    emb = build_embedding(minimal_polynomial(M, pf.lam))
    if rule.lengths_override:
        lengths = tuple(eval_length(e, emb.field) for e in rule.lengths_override)
        if not all(x.is_integral() for x in lengths):
            raise LengthError("length overrides must lie in Z[lam]")
        index = 1
    else:
        nl = natural_lengths(rule, emb.field)
        lengths, index = nl.lengths, nl.module_index
    T = displacement_matrix(rule, lengths)
    power, seed = find_fixed_power_and_seed(rule)
    return InflationSystem(rule, M, pf, emb, lengths, T, power, seed, index)
