"""Bethe ansatz equations of the dimer and a multi-start Newton solver.

The equations are used with denominators cleared,

    r_i = eta^2 (v_i^2 - omega^2) prod_{j != i} (v_i - v_j + eta)
          - prod_{j != i} (v_i - v_j - eta),

which is polynomial and finite everywhere. Solutions are certified by
building their Bethe vector and matching its Rayleigh quotient against the
exact spectrum of the sector.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .betvec import bethe_vector
from .integrable import ABAParams, build_hamiltonian, from_aba

__all__ = [
    "BetheRoots",
    "BAESolveError",
    "CompletenessWarning",
    "canonical_order",
    "bae_residual",
    "bae_jacobian",
    "scaled_residual",
    "solve_newton",
    "start_radius",
    "min_separation",
    "singular_gap",
    "random_starts",
    "find_all_solutions",
    "tag_energy",
]

logger = logging.getLogger(__name__)

COINCIDE_TOL = 1e-8
ORDER_DIGITS = 9
CERTIFY_DPS = 34
SCREEN_TOL = 1e-5
DEDUP_TOL = 1e-7
COEFF_TOL = 1e-15
CANDIDATES_PER_LEVEL = 4


class BAESolveError(RuntimeError):
    """Newton did not produce an admissible root set.

    ``reason`` is ``"no-convergence"`` or ``"rejected"`` (converged onto
    coinciding roots).
    """

    def __init__(self, reason: str, message: str, roots=None):
        super().__init__(message)
        self.reason = reason
        self.roots = roots


class CompletenessWarning(UserWarning):
    """Fewer than ``N + 1`` certified solutions were found."""


@dataclass(frozen=True)
class BetheRoots:
    """A certified (or at least converged) set of rapidities.

    ``residual`` is the scaled BAE residual (see :func:`scaled_residual`).
    ``energy`` and ``eig_residual`` are filled in once the Bethe vector has
    been matched to an exact eigenvalue of the Hamiltonian with tunnelling
    ``ej``.
    """

    v: tuple[complex, ...]
    residual: float
    params: ABAParams
    energy: float | None = None
    eig_residual: float | None = None
    level: int | None = None

    @property
    def N(self) -> int:
        return len(self.v)

    def as_array(self) -> np.ndarray:
        return np.array(self.v, dtype=complex)


def canonical_order(roots: Sequence[complex]) -> tuple[complex, ...]:
    """Sort lexicographically by (real, imag), ties within 1e-9 merged."""
    roots = [complex(v) for v in roots]
    return tuple(
        sorted(roots, key=lambda z: (round(z.real, ORDER_DIGITS), round(z.imag, ORDER_DIGITS)))
    )


def _leave_one_out(factors: np.ndarray) -> np.ndarray:
    """``out[..., k] = prod_{j != k} factors[..., j]`` without division."""
    n = factors.shape[-1]
    ones = np.ones(factors.shape[:-1] + (1,), dtype=factors.dtype)
    prefix = np.concatenate([ones, np.cumprod(factors, axis=-1)[..., : n - 1]], axis=-1)
    rev = np.cumprod(factors[..., ::-1], axis=-1)[..., ::-1]
    suffix = np.concatenate([rev[..., 1:], ones], axis=-1)
    return prefix * suffix


def _system(V: np.ndarray, eta: float, omega: float):
    """Residuals and Jacobians for a batch ``V`` of shape (B, N)."""
    B, N = V.shape
    diff = V[:, :, None] - V[:, None, :]
    eye = np.eye(N, dtype=bool)
    plus = np.where(eye, 1.0, diff + eta)
    minus = np.where(eye, 1.0, diff - eta)
    P = plus.prod(axis=-1)
    M = minus.prod(axis=-1)
    lead = eta**2 * (V**2 - omega**2)
    R = lead * P - M

    # dP_i/dv_k = -prod_{j != i,k} plus_ij for k != i, and sum of those for k = i
    lo_plus = np.where(eye, 0.0, _leave_one_out(plus))
    lo_minus = np.where(eye, 0.0, _leave_one_out(minus))
    J = -lead[:, :, None] * lo_plus + lo_minus
    diag = 2 * eta**2 * V * P + lead * lo_plus.sum(axis=-1) - lo_minus.sum(axis=-1)
    J[:, np.arange(N), np.arange(N)] = diag
    return R, J


def bae_residual(roots: Sequence[complex], p: ABAParams) -> np.ndarray:
    V = np.asarray(roots, dtype=complex).reshape(1, -1)
    if V.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    return _system(V, p.eta, p.omega)[0][0]


def bae_jacobian(roots: Sequence[complex], p: ABAParams) -> np.ndarray:
    V = np.asarray(roots, dtype=complex).reshape(1, -1)
    return _system(V, p.eta, p.omega)[1][0]


def _magnitude_scale(V: np.ndarray, eta: float, omega: float) -> np.ndarray:
    """Size of the monomials in each residual, used to make it scale-free."""
    N = V.shape[1]
    gaps = np.abs(V[:, :, None] - V[:, None, :]) + abs(eta)
    gaps = np.where(np.eye(N, dtype=bool), 1.0, gaps).prod(axis=-1)
    return (eta**2 * (np.abs(V) ** 2 + omega**2) + 1.0) * gaps


def _scaled(R: np.ndarray, V: np.ndarray, p: ABAParams) -> np.ndarray:
    return np.max(np.abs(R) / _magnitude_scale(V, p.eta, p.omega), axis=1)


def scaled_residual(roots: Sequence[complex], p: ABAParams) -> float:
    """Largest residual relative to the magnitude of its monomials.

    The raw residual grows like ``|v|^(N+1)``; this backward-error measure is
    comparable across ``N`` and ``eta`` and stays meaningful when a pair of
    roots sits almost exactly ``eta`` apart (both products then nearly vanish).
    """
    V = np.asarray(roots, dtype=complex).reshape(1, -1)
    if V.shape[1] == 0:
        return 0.0
    R = _system(V, p.eta, p.omega)[0]
    return float(_scaled(R, V, p)[0])


def min_separation(v: Sequence[complex]) -> float:
    v = np.asarray(v, dtype=complex)
    if len(v) < 2:
        return math.inf
    d = np.abs(v[:, None] - v[None, :])
    return float(d[~np.eye(len(v), dtype=bool)].min())


def singular_gap(v: Sequence[complex], eta: float) -> float:
    """``min_{i != j} |v_i - v_j - eta|``; zero on an exact singular string."""
    v = np.asarray(v, dtype=complex)
    if len(v) < 2:
        return math.inf
    d = np.abs(v[:, None] - v[None, :] - eta)
    return float(d[~np.eye(len(v), dtype=bool)].min())


def _newton_batch(V0: np.ndarray, p: ABAParams, tol: float, max_iter: int, max_step: float):
    """Damped root-space Newton on each row of ``V0``."""
    V = V0.astype(complex, copy=True)
    B, N = V.shape
    active = np.ones(B, dtype=bool)
    res = np.full(B, np.inf)
    for _ in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        R, J = _system(V[idx], p.eta, p.omega)
        with np.errstate(all="ignore"):
            err = _scaled(R, V[idx], p)
        res[idx] = err
        done = (err < tol) | ~np.isfinite(err)
        active[idx[done]] = False
        if _ == max_iter:
            break
        idx, R, J = idx[~done], R[~done], J[~done]
        if idx.size == 0:
            break
        step = _solve_batch(J, -R)
        bad = ~np.all(np.isfinite(step), axis=1)
        active[idx[bad]] = False
        step[bad] = 0
        size = np.max(np.abs(step), axis=1)
        damp = np.where(size > max_step, max_step / np.maximum(size, 1e-300), 1.0)
        V[idx] += damp[:, None] * step
    return V, res


def _solve_batch(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        try:
            return np.linalg.solve(J, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            out = np.full_like(rhs, np.nan)
            for b in range(len(J)):
                try:
                    out[b] = np.linalg.solve(J[b], rhs[b])
                except np.linalg.LinAlgError:
                    pass
            return out


def start_radius(p: ABAParams, N: int, factor: float = 2.0) -> float:
    """Radius of the disk random starts are drawn from."""
    return factor * (abs(p.omega) + 1 / abs(p.eta) + abs(p.eta) * N)


def solve_newton(
    initial: Sequence[complex],
    p: ABAParams,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> BetheRoots:
    """Newton iteration on the cleared-denominator equations from one start.

    Convergence is declared when :func:`scaled_residual` drops below
    ``tol``. Raises :class:`BAESolveError` if the iteration stalls or lands
    on coinciding roots.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    V0 = np.asarray(initial, dtype=complex).reshape(1, -1)
    N = V0.shape[1]
    if N == 0:
        return BetheRoots((), 0.0, p)
    V, res = _newton_batch(V0, p, tol, max_iter, max_step=start_radius(p, N))
    v, r = V[0], float(res[0])
    if not r < tol:
        raise BAESolveError(
            "no-convergence", f"Newton did not converge in {max_iter} steps (residual {r:.3g})", v
        )
    if min_separation(v) <= COINCIDE_TOL:
        raise BAESolveError("rejected", "converged onto coinciding roots", v)
    return BetheRoots(canonical_order(v), r, p)


# Symmetric coordinates. With Q(u) = prod_j (u - v_j) the residual of root i
# equals eta * T(v_i), where T(u) = (u^2 - omega^2) Q(u + eta) + Q(u - eta) / eta^2.
# For distinct roots the equations therefore say that Q divides T. Newton on
# the monic coefficients of Q has no coinciding-root attractors and stays
# well conditioned when roots form near-exact strings spaced by eta.


def _shift_matrix(N: int, h: float) -> np.ndarray:
    """``S @ q`` gives the ascending coefficients of ``Q(u + h)``."""
    S = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        for m in range(k + 1):
            S[m, k] = math.comb(k, m) * h ** (k - m)
    return S


def _t_matrix(N: int, p: ABAParams) -> np.ndarray:
    up = _shift_matrix(N, p.eta)
    down = _shift_matrix(N, -p.eta)
    L = np.zeros((N + 3, N + 1))
    L[2:, :] += up
    L[: N + 1, :] += down / p.eta**2 - p.omega**2 * up
    return L


def _divmod_monic(T: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched division of degree ``N+2`` by monic degree ``N`` (ascending order)."""
    N = Q.shape[1] - 1
    R = T.astype(complex, copy=True)
    quo = np.zeros((T.shape[0], 3), dtype=complex)
    for d in range(N + 2, N - 1, -1):
        c = R[:, d].copy()
        quo[:, d - N] = c
        R[:, d - N : d + 1] -= c[:, None] * Q
    return quo, R[:, :N]


def _coefficient_newton(q0: np.ndarray, p: ABAParams, tol: float, max_iter: int):
    """Newton on the remainder of ``T`` modulo ``Q``; returns coefficients, residuals."""
    B, N = q0.shape
    L = _t_matrix(N, p)
    q = q0.astype(complex, copy=True)
    res = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Q = np.concatenate([q[idx], np.ones((idx.size, 1))], axis=1)
        T = Q @ L.T
        quo, rem = _divmod_monic(T, Q)
        with np.errstate(all="ignore"):
            err = np.max(np.abs(rem), axis=1) / np.max(np.abs(T), axis=1)
        res[idx] = err
        # iterate well past tol: root extraction amplifies coefficient error
        done = (err < COEFF_TOL) | ~np.isfinite(err)
        active[idx[done]] = False
        if it == max_iter:
            break
        keep = ~done
        idx, Q, quo, rem = idx[keep], Q[keep], quo[keep], rem[keep]
        if idx.size == 0:
            break
        # d(rem)/dq_k = rem(L[:, k] - quo * u^k, Q)
        J = np.empty((idx.size, N, N), dtype=complex)
        for k in range(N):
            dT = np.broadcast_to(L[:, k], (idx.size, N + 3)).astype(complex)
            dT[:, k : k + 3] -= quo
            J[:, :, k] = _divmod_monic(dT, Q)[1]
        step = _solve_batch(J, -rem)
        bad = ~np.all(np.isfinite(step), axis=1)
        active[idx[bad]] = False
        q[idx[~bad]] += step[~bad]
    return q, res


def _roots_of(q: np.ndarray) -> np.ndarray:
    return np.roots(np.concatenate([[1.0], q[::-1]]))


def _polish(v: np.ndarray, p: ABAParams, steps: int = 3) -> tuple[np.ndarray, float]:
    """A few root-space Newton steps, kept only if they help and stay local."""
    r0 = scaled_residual(v, p)
    V, res = _newton_batch(v[None, :], p, 0.0, steps, max_step=1e-6 * (1 + np.max(np.abs(v))))
    if res[0] < r0 and np.max(np.abs(V[0] - v)) < 1e-6 * (1 + np.max(np.abs(v))):
        return V[0], float(res[0])
    return v, r0


def tag_energy(
    roots: BetheRoots,
    energies: np.ndarray,
    vectors: np.ndarray,
    H: np.ndarray,
    rel_tol: float = 1e-8,
    dps: int | None = CERTIFY_DPS,
) -> BetheRoots | None:
    """Attach the exact level reproduced by the Bethe vector of ``roots``.

    The level is the eigenvector with the largest overlap; the match is
    accepted when the Rayleigh quotient and the eigen-residual of the
    normalized Bethe vector are both within ``rel_tol`` of the spectral
    radius (floored at 1). Returns ``None`` otherwise.
    """
    psi = bethe_vector(roots.v, roots.params, dps=dps)
    norm = np.linalg.norm(psi)
    if not norm > 0 or not np.isfinite(norm):
        return None
    psi = psi / norm
    lam = np.vdot(psi, H @ psi).real
    eig_res = float(np.linalg.norm(H @ psi - lam * psi))
    k = int(np.argmax(np.abs(vectors.conj().T @ psi)))
    scale = max(1.0, float(np.max(np.abs(energies))))
    if abs(lam - energies[k]) > rel_tol * scale or eig_res > rel_tol * scale:
        return None
    return BetheRoots(roots.v, roots.residual, roots.params, float(lam), eig_res, k)


def _same_set(a: Sequence[complex], b: Sequence[complex]) -> bool:
    """Equal as unordered sets: both canonically ordered, entrywise within 1e-7."""
    return len(a) == len(b) and bool(np.max(np.abs(np.subtract(a, b)), initial=0.0) < DEDUP_TOL)


def _n_threads() -> int:
    raw = os.environ.get("BETHE_DIMER_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def random_starts(p: ABAParams, N: int, attempts: int, seed: int, radius_factor: float = 2.0):
    """``attempts`` root sets drawn uniformly from the start disk."""
    rng = np.random.default_rng(seed)
    r0 = start_radius(p, N, radius_factor)
    radius = r0 * np.sqrt(rng.random((attempts, N)))
    angle = 2 * np.pi * rng.random((attempts, N))
    return radius * np.exp(1j * angle)


def _solve_batch_of_starts(starts: np.ndarray, p: ABAParams, tol: float, max_iter: int):
    """Coefficient-space Newton, root extraction and polishing for one batch."""
    q0 = np.array([np.poly(s)[::-1][:-1] for s in starts])
    q, cres = _coefficient_newton(q0, p, tol, max_iter)
    out = []
    for qq, cr in zip(q, cres):
        if not cr < tol:
            continue
        v = _roots_of(qq)
        if not np.all(np.isfinite(v)):
            continue
        v, r = _polish(v, p)
        if r < tol and min_separation(v) > COINCIDE_TOL:
            out.append((canonical_order(v), r))
    return out


def find_all_solutions(
    p: ABAParams,
    N: int,
    attempts: int | None = None,
    tol: float = 1e-10,
    seed: int = 0,
    ej: float = 1.0,
    radius_factor: float = 2.0,
    max_iter: int = 100,
    batch_size: int = 64,
    stop_when_complete: bool = True,
    cert_tol: float = 1e-8,
) -> list[BetheRoots]:
    """Multi-start Newton for every Bethe root set of sector ``N``.

    Random root sets drawn from the start disk are refined by Newton in the
    symmetric (polynomial-coefficient) coordinates, converted back to roots
    and polished. Each converged set is certified against the exact spectrum
    of ``from_aba(p, ej)``; sets reproducing the same level are merged, the
    one with the smallest residual kept. The result is sorted by energy.
    A :class:`CompletenessWarning` is issued when fewer than ``N + 1``
    levels are reproduced.

    Batches run on a thread pool (``BETHE_DIMER_THREADS`` caps it) but are
    merged in submission order, so the output depends only on ``seed``.
    """
    if attempts is None:
        attempts = 200 * (N + 1)
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = build_hamiltonian(from_aba(p, ej), N)
    energies, vectors = np.linalg.eigh(H)
    if N == 0:
        tagged = tag_energy(BetheRoots((), 0.0, p), energies, vectors, H, cert_tol)
        return [tagged] if tagged is not None else []

    starts = random_starts(p, N, attempts, seed, radius_factor)
    batches = [starts[i : i + batch_size] for i in range(0, attempts, batch_size)]
    # Screen in double precision, then certify one set per level at high
    # precision; candidates per level are tried in order of residual.
    candidates: dict[int, list[BetheRoots]] = {}
    found: dict[int, BetheRoots] = {}

    def run(batch):
        return _solve_batch_of_starts(batch, p, tol, max_iter)

    def certify():
        for level, group in candidates.items():
            if level in found:
                continue
            for cand in sorted(group, key=lambda c: c.residual):
                tagged = tag_energy(cand, energies, vectors, H, rel_tol=cert_tol)
                if tagged is not None and tagged.level == level:
                    found[level] = tagged
                    break

    n_workers = max(1, min(_n_threads(), len(batches)))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for lo in range(0, len(batches), n_workers):
            for converged in pool.map(run, batches[lo : lo + n_workers]):
                for v, r in converged:
                    screened = tag_energy(
                        BetheRoots(v, r, p), energies, vectors, H, SCREEN_TOL, dps=None
                    )
                    if screened is None:
                        logger.debug("discarding uncertified root set %s", v)
                        continue
                    group = candidates.setdefault(screened.level, [])
                    if screened.level in found or any(_same_set(v, c.v) for c in group):
                        continue
                    if len(group) < CANDIDATES_PER_LEVEL:
                        group.append(screened)
                    elif r < max(c.residual for c in group):
                        group.remove(max(group, key=lambda c: c.residual))
                        group.append(screened)
            if stop_when_complete and len(candidates) == N + 1:
                certify()
                if len(found) == N + 1:
                    break
    certify()

    solutions = [found[k] for k in sorted(found)]
    if len(solutions) < N + 1:
        warnings.warn(
            f"found {len(solutions)} of {N + 1} Bethe states for N={N}, {p}",
            CompletenessWarning,
            stacklevel=2,
        )
    return solutions
