"""R-matrix, Lax operators, monodromy entries and the dimer Hamiltonian.

Operators acting on :class:`~bethe_dimer.fock.TwoModeState` are plain
callables assembled from the Fock primitives, so the same code path yields
sector matrices (``A``, ``D``, transfer matrix) and sector-changing maps
(``B``, ``C``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .fock import (
    Operator,
    TwoModeState,
    apply_annihilate,
    apply_create,
    apply_number,
    basis_up_to,
    sector_matrix,
)

__all__ = [
    "SingularPointError",
    "ModelParams",
    "ABAParams",
    "to_aba",
    "from_aba",
    "r_weights",
    "build_r_matrix",
    "check_yang_baxter",
    "lax_entry",
    "build_monodromy_entry",
    "check_rll",
    "build_transfer_matrix",
    "check_transfer_commutativity",
    "build_hamiltonian",
    "hamiltonian_from_transfer",
    "check_hamiltonian_identity",
    "exact_spectrum",
]


class SingularPointError(ValueError):
    """The R-matrix is evaluated where ``u + eta = 0``."""


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the two-site Bose-Hubbard Hamiltonian.

    ``K`` is the on-site interaction, ``dmu`` the external potential
    difference and ``ej`` the tunnelling amplitude. Only the Hermitian
    (repulsive, ``K > 0``) regime with ``ej > 0`` is supported.
    """

    K: float
    dmu: float
    ej: float

    def __post_init__(self):
        if not (self.K > 0 and self.ej > 0):
            raise ValueError(
                f"need K > 0 and ej > 0 for a real eta, got K={self.K}, ej={self.ej}"
            )


@dataclass(frozen=True)
class ABAParams:
    """Quantum parameter ``eta`` and inhomogeneity ``omega``, both real."""

    eta: float
    omega: float

    def __post_init__(self):
        for name in ("eta", "omega"):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
        if self.eta == 0:
            raise ValueError("eta must be nonzero")


def to_aba(mp: ModelParams) -> ABAParams:
    """Map physical couplings onto ``(eta, omega)``.

    ``eta = sqrt(K / ej)`` and ``omega = -dmu / (ej * eta)``; with this map
    the Hamiltonian equals ``hamiltonian_from_transfer`` on every sector.
    """
    if not (mp.K > 0 and mp.ej > 0):
        raise ValueError("to_aba needs K > 0 and ej > 0")
    eta = math.sqrt(mp.K / mp.ej)
    # + 0.0 turns a signed zero into 0.0
    return ABAParams(eta=eta, omega=-mp.dmu / (mp.ej * eta) + 0.0)


def from_aba(p: ABAParams, ej: float = 1.0) -> ModelParams:
    """Inverse of :func:`to_aba` at a chosen tunnelling amplitude."""
    return ModelParams(K=ej * p.eta**2, dmu=-ej * p.eta * p.omega + 0.0, ej=ej)


def r_weights(u: complex, eta: float) -> tuple[complex, complex]:
    """Return ``(b(u), c(u)) = (u / (u + eta), eta / (u + eta))``."""
    denom = u + eta
    if denom == 0:
        raise SingularPointError(f"R-matrix is singular at u = -eta = {-eta}")
    b = u / denom
    # c = 1 - b keeps b + c = 1 exact in floating point.
    return b, 1 - b


def build_r_matrix(u: complex, eta: float) -> np.ndarray:
    b, c = r_weights(u, eta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, b, c, 0],
            [0, c, b, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


_SWAP = np.eye(4)[[0, 2, 1, 3]]
_P23 = np.kron(np.eye(2), _SWAP)


def check_yang_baxter(u: complex, v: complex, eta: float) -> float:
    """Max-entry residual of ``R12(u-v) R13(u) R23(v) = R23(v) R13(u) R12(u-v)``."""
    eye2 = np.eye(2)
    r12 = np.kron(build_r_matrix(u - v, eta), eye2)
    r23 = np.kron(eye2, build_r_matrix(v, eta))
    r13 = _P23 @ np.kron(build_r_matrix(u, eta), eye2) @ _P23
    lhs = r12 @ r13 @ r23
    rhs = r23 @ r13 @ r12
    return float(np.max(np.abs(lhs - rhs)))


def _scaled(op: Operator, coeff: complex) -> Operator:
    return lambda s: coeff * op(s)


def _sum(*ops: Operator) -> Operator:
    def summed(s: TwoModeState) -> TwoModeState:
        out = s.zero_like()
        for op in ops:
            out = out + op(s)
        return out

    return summed


def _compose(*ops: Operator) -> Operator:
    """Operator product; the rightmost factor acts first."""

    def composed(s: TwoModeState) -> TwoModeState:
        for op in reversed(ops):
            s = op(s)
        return s

    return composed


def _ident(s: TwoModeState) -> TwoModeState:
    return s


def _create(site):
    return lambda s: apply_create(site, s)


def _annihilate(site):
    return lambda s: apply_annihilate(site, s)


def _number(site):
    return lambda s: apply_number(site, s)


def lax_entry(row: int, col: int, u: complex, eta: float, site: int) -> Operator:
    """Entry of ``L_site(u) = [[u + eta N, a], [a^dagger, 1/eta]]``."""
    if (row, col) == (0, 0):
        return _sum(_scaled(_ident, u), _scaled(_number(site), eta))
    if (row, col) == (0, 1):
        return _annihilate(site)
    if (row, col) == (1, 0):
        return _create(site)
    if (row, col) == (1, 1):
        return _scaled(_ident, 1 / eta)
    raise IndexError(f"Lax entry ({row}, {col}) out of range")


def build_monodromy_entry(
    which: Literal["A", "B", "C", "D"], u: complex, p: ABAParams
) -> Operator:
    """Entry of the monodromy matrix ``L_1(u + omega) L_2(u - omega)``."""
    eta, om = p.eta, p.omega
    n1, n2 = _number(1), _number(2)
    if which == "A":
        return _sum(
            _scaled(_ident, u * u - om * om),
            _scaled(_sum(n1, n2), eta * u),
            _scaled(_compose(n1, n2), eta**2),
            _scaled(n1, -eta * om),
            _scaled(n2, eta * om),
            _compose(_create(2), _annihilate(1)),
        )
    if which == "B":
        return _sum(
            _compose(_sum(_scaled(_ident, u + om), _scaled(n1, eta)), _annihilate(2)),
            _scaled(_annihilate(1), 1 / eta),
        )
    if which == "C":
        return _sum(
            _compose(_sum(_scaled(_ident, u - om), _scaled(n2, eta)), _create(1)),
            _scaled(_create(2), 1 / eta),
        )
    if which == "D":
        return _sum(
            _compose(_create(1), _annihilate(2)),
            _scaled(_ident, eta**-2),
        )
    raise ValueError(f"unknown monodromy entry {which!r}")


def check_rll(u: complex, v: complex, p: ABAParams, cutoff: int, site: int = 1) -> float:
    """Max residual of ``R12(u-v) L1(u) L2(v) = L2(v) L1(u) R12(u-v)``.

    Both sides are 4x4 blocks of operators on the quantum space of ``site``;
    each block is applied to every basis ket that leaves room for two
    creation operators below ``cutoff``.
    """
    if cutoff < 2:
        raise ValueError("check_rll needs cutoff >= 2")
    R = build_r_matrix(u - v, p.eta)
    Lu = [[lax_entry(a, b, u, p.eta, site) for b in range(2)] for a in range(2)]
    Lv = [[lax_entry(a, b, v, p.eta, site) for b in range(2)] for a in range(2)]

    kets = list(basis_up_to(cutoff, cutoff - 2))
    worst = 0.0
    for ket in kets:
        # (L1(u) L2(v))[(a,b),(c,d)] = Lu[a][c] Lv[b][d]; (L2 L1) reverses order
        prod12 = {}
        prod21 = {}
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        prod12[a, b, c, d] = Lu[a][c](Lv[b][d](ket))
                        prod21[a, b, c, d] = Lv[b][d](Lu[a][c](ket))
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        diff = ket.zero_like()
                        for e in range(2):
                            for f in range(2):
                                left = R[2 * a + b, 2 * e + f]
                                if left != 0:
                                    diff = diff + left * prod12[e, f, c, d]
                                right = R[2 * e + f, 2 * c + d]
                                if right != 0:
                                    diff = diff - right * prod21[a, b, e, f]
                        worst = max(worst, diff.max_abs())
    return worst


def build_transfer_matrix(u: complex, p: ABAParams, N: int) -> np.ndarray:
    """Sector matrix of ``t(u) = A(u) + D(u)``."""
    t = _sum(build_monodromy_entry("A", u, p), build_monodromy_entry("D", u, p))
    return sector_matrix(t, N)


def check_transfer_commutativity(u: complex, v: complex, p: ABAParams, N: int) -> float:
    """``max|[t(u), t(v)]|`` divided by ``max|t(u)| * max|t(v)|`` on sector ``N``."""
    tu = build_transfer_matrix(u, p, N)
    tv = build_transfer_matrix(v, p, N)
    scale = np.max(np.abs(tu)) * np.max(np.abs(tv))
    comm = np.max(np.abs(tu @ tv - tv @ tu))
    return float(comm / scale) if scale > 0 else float(comm)


def build_hamiltonian(mp: ModelParams, N: int) -> np.ndarray:
    """Sector matrix of the two-site Bose-Hubbard Hamiltonian.

    ``H = K/8 (N1 - N2)^2 - dmu/2 (N1 - N2) - ej/2 (a1^+ a2 + a2^+ a1)``
    with index ``k`` labelling ``|k>_1 |N-k>_2``.
    """
    imbalance = _sum(_number(1), _scaled(_number(2), -1))
    hopping = _sum(
        _compose(_create(1), _annihilate(2)), _compose(_create(2), _annihilate(1))
    )
    H = _sum(
        _scaled(_compose(imbalance, imbalance), mp.K / 8),
        _scaled(imbalance, -mp.dmu / 2),
        _scaled(hopping, -mp.ej / 2),
    )
    return sector_matrix(H, N)


def hamiltonian_from_transfer(p: ABAParams, ej: float, N: int) -> np.ndarray:
    """``-ej/2 [t(0) + (omega^2 - eta^-2) I - eta^2 N^2 / 4 I]`` on sector ``N``."""
    shift = p.omega**2 - p.eta**-2 - p.eta**2 * N * N / 4
    return -0.5 * ej * (build_transfer_matrix(0.0, p, N) + shift * np.eye(N + 1))


def check_hamiltonian_identity(mp: ModelParams, N: int) -> float:
    """Max-entry gap between the Hamiltonian and its transfer-matrix form."""
    gap = build_hamiltonian(mp, N) - hamiltonian_from_transfer(to_aba(mp), mp.ej, N)
    return float(np.max(np.abs(gap)))


def exact_spectrum(mp: ModelParams, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of the sector."""
    return np.linalg.eigh(build_hamiltonian(mp, N))
