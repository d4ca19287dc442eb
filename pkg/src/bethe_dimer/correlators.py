"""Scalar products, norms and imbalance form factors of Bethe vectors.

All three are the same double sum over the expansion coefficients,

    N! conj(Fb_0) Fk_0 + sum_{r,n>=1} sum_j conj(Fb_r) Fk_n C[r, r-n+j] C[n, j]
                                       * w(n, j) (N-n+j)! / sqrt(j! (r-n+j)!),

with weight ``w = 1`` for the overlap and ``w = 1 - 2(n-j)/N`` for
``<(N1 - N2)/N>``. Out-of-range ``C`` indices contribute nothing. Each
formula has a Fock-space counterpart in :func:`direct_overlap`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import mpmath
import numpy as np

from .betvec import compute_C_recursion, compute_F, f_values, product_form_oracle
from .fock import TwoModeState, apply_number, inner_product
from .integrable import ABAParams

__all__ = [
    "NonRealNormError",
    "OverlapReport",
    "scalar_product_formula",
    "norm_formula",
    "imbalance_form_factor_formula",
    "normalized_form_factor",
    "direct_overlap",
    "compare",
]

REL_FLOOR = 1e-300
SUM_DPS = 34


class NonRealNormError(ValueError):
    """A norm evaluated from the formula has a non-negligible imaginary part."""


def _factorial_weight(N: int, n: int, j: int, i: int):
    """``(N-n+j)! / sqrt(j! i!)`` with ``i = r-n+j``."""
    return mpmath.factorial(N - n + j) / mpmath.sqrt(mpmath.factorial(j) * mpmath.factorial(i))


def _mpc(z) -> mpmath.mpc:
    z = complex(z)
    return mpmath.mpc(z.real, z.imag)


def _double_sum(F_bra, F_ket, C: np.ndarray, N: int, imbalance: bool) -> complex:
    # Near-degenerate root strings make the terms cancel by many orders of
    # magnitude, so the accumulation runs in extended precision. The double
    # inputs are converted exactly.
    F_bra = np.asarray(F_bra, dtype=complex)
    F_ket = np.asarray(F_ket, dtype=complex)
    if F_bra.shape != (N + 1,) or F_ket.shape != (N + 1,):
        raise ValueError(f"coefficient vectors must have length {N + 1}")
    if C.shape[0] < N + 1:
        raise ValueError(f"C table covers n <= {C.shape[0] - 1}, need {N}")
    with mpmath.workdps(SUM_DPS):
        Fb = [mpmath.conj(_mpc(x)) for x in F_bra]
        Fk = [_mpc(x) for x in F_ket]
        total = mpmath.factorial(N) * Fb[0] * Fk[0]
        for r in range(1, N + 1):
            for n in range(1, N + 1):
                for j in range(n + 1):
                    i = r - n + j
                    if i < 0 or i > r or C[r, i] == 0 or C[n, j] == 0:
                        continue
                    w = _factorial_weight(N, n, j, i)
                    if imbalance:
                        w *= mpmath.mpf(N - 2 * (n - j)) / N
                    total += Fb[r] * Fk[n] * _mpc(C[r, i]) * _mpc(C[n, j]) * w
        return complex(total)


def scalar_product_formula(F_bra, F_ket, C: np.ndarray, N: int) -> complex:
    """``<bra|ket>`` from expansion coefficients sharing one ``C`` table."""
    return _double_sum(F_bra, F_ket, C, N, imbalance=False)


def norm_formula(F, C: np.ndarray, N: int) -> float:
    value = scalar_product_formula(F, F, C, N)
    if abs(value.imag) > 1e-10 * abs(value):
        raise NonRealNormError(f"norm has imaginary part {value.imag:g} (value {value})")
    return value.real


def imbalance_form_factor_formula(F_bra, F_ket, C: np.ndarray, N: int) -> complex:
    """Unnormalized ``<bra|(N1 - N2)/N|ket>``."""
    if N < 1:
        raise ValueError("the imbalance form factor needs N >= 1")
    return _double_sum(F_bra, F_ket, C, N, imbalance=True)


def normalized_form_factor(F_bra, F_ket, C: np.ndarray, N: int) -> complex:
    ff = imbalance_form_factor_formula(F_bra, F_ket, C, N)
    return ff / math.sqrt(norm_formula(F_bra, C, N) * norm_formula(F_ket, C, N))


def direct_overlap(
    bra: TwoModeState, ket: TwoModeState, weight: int | None = None
) -> complex:
    """``<bra|ket>``, or ``<bra|(N1 - N2)/N|ket>`` when ``weight = N``."""
    if weight is None:
        return inner_product(bra, ket)
    if weight < 1:
        raise ValueError("imbalance weight needs N >= 1")
    imb = (apply_number(1, ket) - apply_number(2, ket)) * (1 / weight)
    return inner_product(bra, imb)


@dataclass(frozen=True)
class OverlapReport:
    kind: Literal["overlap", "form-factor"]
    formula_value: complex
    oracle_value: complex
    rel_error: float
    N: int
    on_shell_flags: tuple[bool, bool]
    norm_product: float

    @property
    def abs_error(self) -> float:
        return abs(self.formula_value - self.oracle_value)

    def agrees(self, rel_tol: float = 1e-9, abs_tol: float = 1e-8) -> bool:
        """Relative agreement, or absolute agreement scaled by the norms near zero."""
        return self.rel_error < rel_tol or self.abs_error < abs_tol * self.norm_product

    def to_dict(self) -> dict:
        out = asdict(self)
        out["on_shell_flags"] = list(self.on_shell_flags)
        return out


def compare(
    bra_roots: Sequence[complex],
    ket_roots: Sequence[complex],
    p: ABAParams,
    kind: Literal["overlap", "form-factor"] = "overlap",
    on_shell: tuple[bool, bool] = (False, False),
) -> OverlapReport:
    """Evaluate one formula and its Fock-space oracle for two root sets."""
    N = len(ket_roots)
    if len(bra_roots) != N:
        raise ValueError("bra and ket must live in the same sector")
    C = compute_C_recursion(N, p.eta)
    Fb = compute_F(f_values(bra_roots, p.omega))
    Fk = compute_F(f_values(ket_roots, p.omega))
    bra = product_form_oracle(bra_roots, p)
    ket = product_form_oracle(ket_roots, p)
    if kind == "overlap":
        formula = scalar_product_formula(Fb, Fk, C, N)
        oracle = direct_overlap(bra, ket)
    elif kind == "form-factor":
        formula = imbalance_form_factor_formula(Fb, Fk, C, N)
        oracle = direct_overlap(bra, ket, weight=N)
    else:
        raise ValueError(f"unknown comparison kind {kind!r}")
    rel = abs(formula - oracle) / max(abs(oracle), REL_FLOOR)
    return OverlapReport(kind, formula, oracle, rel, N, tuple(on_shell), bra.norm() * ket.norm())
