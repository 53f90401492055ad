"""Subgroup computations in Gamma_n(p): chains, densities, slices."""

from .chain import (AbelianBoundReport, DensitySequence, SolvableSumReport, StabilizerChain,
                    abelian_bound_check, boundary_slice_dim, build_chain, commutator_density,
                    density_from_chain, density_sequence, derived_subgroup_chain,
                    solvable_sum_check)
from .experiments import random_generation_dimension_experiment
from .fp import IncrementalBasis, nullspace, rank, rref, solve
from .slices import (SlicePolynomial, polihamu_formula, polihamu_pair, weight,
                     weight_by_division)

__all__ = [
    "AbelianBoundReport", "DensitySequence", "IncrementalBasis", "SlicePolynomial",
    "SolvableSumReport", "StabilizerChain", "abelian_bound_check", "boundary_slice_dim",
    "build_chain", "commutator_density", "density_from_chain", "density_sequence",
    "derived_subgroup_chain", "nullspace", "polihamu_formula", "polihamu_pair",
    "random_generation_dimension_experiment", "rank",
    "rref", "solve", "solvable_sum_check", "weight", "weight_by_division",
]
