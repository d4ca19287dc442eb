"""Algebraic Bethe ansatz for the two-site Bose-Hubbard (Josephson) dimer."""

from .bae import BetheRoots, find_all_solutions, solve_newton
from .betvec import bethe_vector, product_form_oracle
from .correlators import compare
from .integrable import ABAParams, ModelParams, exact_spectrum, from_aba, to_aba

__all__ = [
    "ABAParams",
    "ModelParams",
    "BetheRoots",
    "to_aba",
    "from_aba",
    "exact_spectrum",
    "solve_newton",
    "find_all_solutions",
    "bethe_vector",
    "product_form_oracle",
    "compare",
]
