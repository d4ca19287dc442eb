"""Sparse two-mode bosonic Fock space.

States are immutable maps from occupation pairs ``(n1, n2)`` to complex
amplitudes, bounded by a total-occupation cutoff. Every other module checks
its closed-form results against operators built from these primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

__all__ = [
    "CutoffOverflowError",
    "OccPair",
    "TwoModeState",
    "Operator",
    "vacuum",
    "basis_state",
    "apply_create",
    "apply_annihilate",
    "apply_number",
    "inner_product",
    "restrict_to_sector",
    "embed_sector",
    "basis_up_to",
    "sector_matrix",
]


class CutoffOverflowError(ValueError):
    """Raised when an operator would populate a state above its cutoff."""


class OccPair(NamedTuple):
    n1: int
    n2: int


@dataclass(frozen=True)
class TwoModeState:
    """Sparse amplitudes over occupation pairs with ``n1 + n2 <= cutoff``."""

    amps: Mapping[OccPair, complex]
    cutoff: int
    drop_tol: float = 0.0

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be nonnegative, got {self.cutoff}")
        clean = {}
        for key, value in self.amps.items():
            n1, n2 = key
            if n1 < 0 or n2 < 0:
                raise ValueError(f"negative occupation in {key}")
            if n1 + n2 > self.cutoff:
                raise CutoffOverflowError(
                    f"occupation {key} exceeds cutoff {self.cutoff}"
                )
            value = complex(value)
            if value == 0 or abs(value) < self.drop_tol:
                continue
            clean[OccPair(int(n1), int(n2))] = value
        object.__setattr__(self, "amps", MappingProxyType(clean))

    def __getitem__(self, key) -> complex:
        return self.amps.get(OccPair(*key), 0j)

    def __add__(self, other: TwoModeState) -> TwoModeState:
        out = dict(self.amps)
        for key, value in other.amps.items():
            out[key] = out.get(key, 0j) + value
        return TwoModeState(out, max(self.cutoff, other.cutoff), self.drop_tol)

    def __sub__(self, other: TwoModeState) -> TwoModeState:
        return self + (-1.0) * other

    def __mul__(self, scalar) -> TwoModeState:
        return TwoModeState(
            {k: scalar * v for k, v in self.amps.items()}, self.cutoff, self.drop_tol
        )

    __rmul__ = __mul__

    def __neg__(self) -> TwoModeState:
        return -1.0 * self

    def is_zero(self) -> bool:
        return not self.amps

    def max_abs(self) -> float:
        return max((abs(v) for v in self.amps.values()), default=0.0)

    def norm(self) -> float:
        return math.sqrt(inner_product(self, self).real)

    def sectors(self) -> set[int]:
        """Total occupations present in the support."""
        return {n1 + n2 for n1, n2 in self.amps}

    def zero_like(self) -> TwoModeState:
        return TwoModeState({}, self.cutoff, self.drop_tol)


Operator = Callable[[TwoModeState], TwoModeState]


def vacuum(cutoff: int) -> TwoModeState:
    return TwoModeState({OccPair(0, 0): 1.0}, cutoff)


def basis_state(n1: int, n2: int, cutoff: int | None = None) -> TwoModeState:
    if cutoff is None:
        cutoff = n1 + n2
    return TwoModeState({OccPair(n1, n2): 1.0}, cutoff)


def _check_site(site: int) -> None:
    if site not in (1, 2):
        raise ValueError(f"site must be 1 or 2, got {site!r}")


def apply_create(site: int, s: TwoModeState) -> TwoModeState:
    _check_site(site)
    out = {}
    for (n1, n2), amp in s.amps.items():
        if n1 + n2 + 1 > s.cutoff:
            raise CutoffOverflowError(
                f"a{site}^dagger on |{n1},{n2}> exceeds cutoff {s.cutoff}"
            )
        if site == 1:
            out[OccPair(n1 + 1, n2)] = math.sqrt(n1 + 1) * amp
        else:
            out[OccPair(n1, n2 + 1)] = math.sqrt(n2 + 1) * amp
    return TwoModeState(out, s.cutoff, s.drop_tol)


def apply_annihilate(site: int, s: TwoModeState) -> TwoModeState:
    _check_site(site)
    out = {}
    for (n1, n2), amp in s.amps.items():
        if site == 1 and n1 > 0:
            out[OccPair(n1 - 1, n2)] = math.sqrt(n1) * amp
        elif site == 2 and n2 > 0:
            out[OccPair(n1, n2 - 1)] = math.sqrt(n2) * amp
    return TwoModeState(out, s.cutoff, s.drop_tol)


def apply_number(site: int, s: TwoModeState) -> TwoModeState:
    _check_site(site)
    idx = site - 1
    return TwoModeState(
        {k: k[idx] * amp for k, amp in s.amps.items()}, s.cutoff, s.drop_tol
    )


def inner_product(bra: TwoModeState, ket: TwoModeState) -> complex:
    """Return ``<bra|ket>``, conjugate-linear in ``bra``."""
    if len(bra.amps) > len(ket.amps):
        return sum(
            (bra.amps[k].conjugate() * v for k, v in ket.amps.items() if k in bra.amps),
            0j,
        )
    return sum(
        (v.conjugate() * ket.amps[k] for k, v in bra.amps.items() if k in ket.amps),
        0j,
    )


def restrict_to_sector(s: TwoModeState, N: int) -> np.ndarray:
    """Amplitudes of the fixed-``N`` sector; index ``k`` is ``|k>_1 |N-k>_2``."""
    return np.array([s[(k, N - k)] for k in range(N + 1)], dtype=complex)


def embed_sector(vec, N: int, cutoff: int | None = None) -> TwoModeState:
    """Inverse of :func:`restrict_to_sector`."""
    vec = np.asarray(vec)
    if vec.shape != (N + 1,):
        raise ValueError(f"expected a vector of length {N + 1}, got shape {vec.shape}")
    return TwoModeState(
        {OccPair(k, N - k): vec[k] for k in range(N + 1)},
        N if cutoff is None else cutoff,
    )


def basis_up_to(cutoff: int, max_total: int | None = None) -> Iterable[TwoModeState]:
    """Yield every basis ket with ``n1 + n2 <= max_total`` in a cutoff space."""
    top = cutoff if max_total is None else max_total
    for total in range(top + 1):
        for n1 in range(total + 1):
            yield basis_state(n1, total - n1, cutoff)


def sector_matrix(op: Operator, N: int, cutoff: int | None = None) -> np.ndarray:
    """Dense matrix of a number-conserving operator on the fixed-``N`` sector.

    Raises ``ValueError`` if ``op`` moves amplitude out of the sector.
    """
    cutoff = N if cutoff is None else cutoff
    mat = np.zeros((N + 1, N + 1), dtype=complex)
    for k in range(N + 1):
        image = op(basis_state(k, N - k, cutoff))
        leaked = image.sectors() - {N}
        if leaked:
            raise ValueError(f"operator does not conserve total number (sectors {leaked})")
        mat[:, k] = restrict_to_sector(image, N)
    return mat
