"""Command-line front end.

Every mode prints one JSON object (``config``, ``results``, ``checks``) or a
lossy CSV table on stdout. Exit codes: 0 success, 1 failed verification,
2 invalid configuration, 3 incomplete Bethe spectrum.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from . import bae, betvec, correlators, fock, integrable
from .integrable import ABAParams, ModelParams

MODES = ("spectrum", "roots", "state", "overlap", "form-factor", "verify")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INCOMPLETE = 3


class ConfigError(ValueError):
    pass


class IncompleteError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str
    N: int
    params: ModelParams | ABAParams
    tol: float = 1e-10
    attempts: int | None = None
    seed: int = 0
    format: str = "json"
    normalized: bool = False
    index: int = 0
    bra: int = 0
    ket: int = 0
    bra_roots: tuple[complex, ...] | None = None
    ket_roots: tuple[complex, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.N < 0:
            raise ConfigError("N must be >= 0")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.attempts is not None and self.attempts < 1:
            raise ConfigError("attempts must be >= 1")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")

    @property
    def aba(self) -> ABAParams:
        if isinstance(self.params, ABAParams):
            return self.params
        return integrable.to_aba(self.params)

    @property
    def model(self) -> ModelParams:
        if isinstance(self.params, ModelParams):
            return self.params
        return integrable.from_aba(self.params)


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(rf"[+-]?{_NUM}|[+-]?(?:{_NUM})?i|[+-]?{_NUM}[+-](?:{_NUM})?i")


def parse_offshell_roots(text: str) -> list[complex]:
    """Parse comma-separated ``a+bi`` tokens; ``a``, ``bi`` alone also accepted."""
    out = []
    for pos, token in enumerate(text.split(","), start=1):
        token = token.strip()
        if not _TOKEN.fullmatch(token):
            raise ConfigError(f"cannot parse root at token {pos}: {token!r}")
        out.append(complex(token.replace("i", "j")))
    return out


def _cplx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _dump(obj) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_dump(obj[k])}" for k in sorted(obj))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(x) for x in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, (complex, np.complexfloating)):
        return _dump(_cplx(obj))
    return json.dumps(str(obj))


def _csv_cell(key: str, value) -> dict[str, str]:
    if isinstance(value, list) and value and isinstance(value[0], list):
        z = [complex(*v) if len(v) == 2 else complex(v[0]) for v in value]
        return {
            f"{key}_re": ";".join(f"{x.real:.10g}" for x in z),
            f"{key}_abs": ";".join(f"{abs(x):.10g}" for x in z),
        }
    if isinstance(value, list) and len(value) == 2 and all(isinstance(x, float) for x in value):
        z = complex(*value)
        return {f"{key}_re": f"{z.real:.10g}", f"{key}_abs": f"{abs(z):.10g}"}
    if isinstance(value, list):
        return {key: ";".join(str(x) for x in value)}
    if isinstance(value, float):
        return {key: f"{value:.10g}"}
    return {key: "" if value is None else str(value)}


def _to_csv(rows: list[dict]) -> str:
    flat = []
    for row in rows:
        cells = {}
        for key in sorted(row):
            cells.update(_csv_cell(key, row[key]))
        flat.append(cells)
    header = sorted({k for row in flat for k in row})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)
    return buf.getvalue()


def _config_dict(cfg: RunConfig) -> dict:
    model, aba = cfg.model, cfg.aba
    out = {
        "mode": cfg.mode,
        "N": cfg.N,
        "input": "model" if isinstance(cfg.params, ModelParams) else "aba",
        "model_params": {"K": model.K, "dmu": model.dmu, "ej": model.ej},
        "aba_params": {"eta": aba.eta, "omega": aba.omega},
        "tol": cfg.tol,
        "attempts": cfg.attempts if cfg.attempts is not None else 200 * (cfg.N + 1),
        "seed": cfg.seed,
        "normalized": cfg.normalized,
    }
    if cfg.mode == "state":
        out["index"] = cfg.index
    if cfg.mode in ("overlap", "form-factor"):
        out["bra"] = _cplx_list(cfg.bra_roots) if cfg.bra_roots is not None else cfg.bra
        out["ket"] = _cplx_list(cfg.ket_roots) if cfg.ket_roots is not None else cfg.ket
    return out


def _cplx_list(zs) -> list[list[float]]:
    return [_cplx(z) for z in zs]


def _solve(cfg: RunConfig) -> list[bae.BetheRoots]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bae.CompletenessWarning)
        sols = bae.find_all_solutions(
            cfg.aba, cfg.N, attempts=cfg.attempts, tol=cfg.tol, seed=cfg.seed, ej=cfg.model.ej
        )
    if len(sols) < cfg.N + 1:
        raise IncompleteError(f"found {len(sols)} of {cfg.N + 1} Bethe states for N={cfg.N}")
    return sols


def _roots_row(s: bae.BetheRoots) -> dict:
    return {
        "level": s.level,
        "roots": _cplx_list(s.v),
        "scaled_residual": s.residual,
        "max_abs_residual": float(np.max(np.abs(bae.bae_residual(s.v, s.params)), initial=0.0)),
        "energy": s.energy,
        "eig_residual": s.eig_residual,
    }


def _mode_spectrum(cfg: RunConfig):
    exact = np.linalg.eigvalsh(integrable.build_hamiltonian(cfg.model, cfg.N))
    sols = _solve(cfg)
    rows = []
    for k, (E, s) in enumerate(zip(exact, sols)):
        rows.append(
            {
                "level": k,
                "exact_energy": float(E),
                "bae_energy": s.energy,
                "rel_error": abs(s.energy - E) / max(1.0, float(np.max(np.abs(exact)))),
                "roots": _cplx_list(s.v),
            }
        )
    return rows, []


def _mode_roots(cfg: RunConfig):
    return [_roots_row(s) for s in _solve(cfg)], []


def _pick(sols: list[bae.BetheRoots], i: int, what: str) -> bae.BetheRoots:
    if not 0 <= i < len(sols):
        raise ConfigError(f"{what} index {i} out of range 0..{len(sols) - 1}")
    return sols[i]


def _mode_state(cfg: RunConfig):
    sols = _solve(cfg)
    s = _pick(sols, cfg.index, "state")
    psi = betvec.bethe_vector(s.v, cfg.aba)
    if cfg.normalized:
        psi = betvec.normalize(psi)
    rows = [{"n1": k, "n2": cfg.N - k, "amplitude": _cplx(a)} for k, a in enumerate(psi)]
    return rows, []


def _side(cfg: RunConfig, roots, index: int, what: str, sols_cache: list):
    if roots is not None:
        if len(roots) != cfg.N:
            raise ConfigError(f"{what} roots have length {len(roots)}, expected N={cfg.N}")
        on_shell = bae.scaled_residual(roots, cfg.aba) < cfg.tol
        return tuple(roots), bool(on_shell)
    if not sols_cache:
        sols_cache.extend(_solve(cfg))
    return _pick(sols_cache, index, what).v, True


def _mode_correlator(cfg: RunConfig):
    cache: list = []
    bra, bra_on = _side(cfg, cfg.bra_roots, cfg.bra, "bra", cache)
    ket, ket_on = _side(cfg, cfg.ket_roots, cfg.ket, "ket", cache)
    if cfg.mode == "form-factor" and cfg.N < 1:
        raise ConfigError("form-factor needs N >= 1")
    kind = "overlap" if cfg.mode == "overlap" else "form-factor"
    rep = correlators.compare(bra, ket, cfg.aba, kind, (bra_on, ket_on))
    row = rep.to_dict()
    row["bra_roots"] = _cplx_list(bra)
    row["ket_roots"] = _cplx_list(ket)
    if cfg.normalized:
        C = betvec.compute_C_recursion(cfg.N, cfg.aba.eta)
        Fb = betvec.compute_F(betvec.f_values(bra, cfg.aba.omega))
        Fk = betvec.compute_F(betvec.f_values(ket, cfg.aba.omega))
        nb = correlators.norm_formula(Fb, C, cfg.N)
        nk = correlators.norm_formula(Fk, C, cfg.N)
        row["normalized_value"] = rep.formula_value / math.sqrt(nb * nk)
    for key in ("formula_value", "oracle_value", "normalized_value"):
        if key in row:
            row[key] = _cplx(row[key])
    checks = [_check("formula_vs_oracle", rep.rel_error, 1e-9, rep.agrees())]
    return [row], checks


def _check(name: str, value: float, threshold: float, passed: bool | None = None) -> dict:
    ok = bool(value < threshold) if passed is None else bool(passed)
    return {"name": name, "value": float(value), "threshold": threshold, "status": "pass" if ok else "fail"}


def _rel_table_error(a: np.ndarray, b: np.ndarray) -> float:
    worst = 0.0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        worst = max(worst, abs(x - y) / abs(y) if y != 0 else abs(x))
    return worst


def _verify_checks(cfg: RunConfig) -> list[dict]:
    rng = np.random.default_rng(cfg.seed)
    p, mp, N = cfg.aba, cfg.model, cfg.N
    checks = []

    def draw_uv(eta):
        while True:
            u, v = rng.uniform(-3, 3, size=2)
            if min(abs(u + eta), abs(v + eta), abs(u - v + eta)) > 0.1:
                return u, v

    yb = 0.0
    for _ in range(100):
        eta = rng.uniform(0.2, 3.0) * rng.choice([-1, 1])
        yb = max(yb, integrable.check_yang_baxter(*draw_uv(eta), eta))
    checks.append(_check("yang_baxter", yb, 1e-12))

    rll = 0.0
    for _ in range(20):
        u, v = draw_uv(p.eta)
        rll = max(rll, integrable.check_rll(u, v, p, 8, site=int(rng.integers(1, 3))))
    checks.append(_check("rll", rll, 1e-10))

    checks.append(_check("canonical_commutation", _ccr_residual(6), 1e-12))

    tc = max(
        integrable.check_transfer_commutativity(*rng.uniform(-3, 3, size=2), p, n)
        for n in range(N + 1)
        for _ in range(5)
    )
    checks.append(_check("transfer_commutativity", tc, 1e-10))

    ham = max(integrable.check_hamiltonian_identity(mp, n) for n in range(N + 1))
    checks.append(_check("hamiltonian_identity", ham, 1e-12))

    checks.append(_check("a1dag_commutes_with_dop", betvec.check_a1dag_commutes(p.eta, 8), 1e-12))

    nmax = max(N, 6)
    rec = betvec.compute_C_recursion(nmax, p.eta)
    closed = betvec.compute_C_closed_table(nmax, p.eta)
    oracle = np.zeros_like(rec)
    for n in range(nmax + 1):
        oracle[n, : n + 1] = betvec.coefficients_from_state(betvec.apply_D_power(n, p.eta), n)
    c_err = max(_rel_table_error(rec, oracle), _rel_table_error(closed, oracle))
    checks.append(_check("c_table_triple_agreement", c_err, 1e-10))

    dpow = max(
        betvec.check_D_power_vacuum(n, p.eta) / abs(p.eta) ** (-2 * n) for n in range(11)
    )
    checks.append(_check("d_power_vacuum", dpow, 1e-12))

    binom = 0.0
    for _ in range(10):
        X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        Y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        binom = max(binom, betvec.check_binomial_identity(2, X, Y), betvec.check_binomial_identity(3, X, Y))
        for n in range(1, 7):
            binom = max(binom, betvec.permutation_expansion(n, X, Y, relative=True))
    checks.append(_check("binomial_identities", binom, 1e-12))

    with warnings.catch_warnings():
        # the completeness check below reports the shortfall
        warnings.simplefilter("ignore", bae.CompletenessWarning)
        sols = bae.find_all_solutions(p, N, attempts=cfg.attempts, tol=cfg.tol, seed=cfg.seed, ej=mp.ej)
    exact = np.linalg.eigvalsh(integrable.build_hamiltonian(mp, N))
    scale = max(1.0, float(np.max(np.abs(exact))))
    complete = len(sols) == N + 1
    e_err = max((abs(s.energy - exact[s.level]) / scale for s in sols), default=0.0)
    checks.append(_check("bae_completeness", N + 1 - len(sols), 1, complete))
    checks.append(_check("bae_energies", e_err, 1e-8, complete and e_err < 1e-8))
    checks.append(_check("bethe_eigen_residual", max((s.eig_residual for s in sols), default=0.0), 1e-8))

    asm = 0.0
    offshell = [tuple(r) for r in bae.random_starts(p, N, 10, cfg.seed + 1)]
    for roots in [s.v for s in sols] + offshell:
        a = betvec.bethe_vector(roots, p)
        o = fock.restrict_to_sector(betvec.product_form_oracle(roots, p), N)
        asm = max(asm, np.linalg.norm(a - o) / np.linalg.norm(o))
    checks.append(_check("state_assembly_vs_product_form", asm, 1e-9))

    if N >= 1:
        worst, ok = 0.0, True
        for _ in range(10):
            b, k = bae.random_starts(p, N, 2, int(rng.integers(1 << 31)))
            for kind in ("overlap", "form-factor"):
                rep = correlators.compare(b, k, p, kind)
                worst, ok = max(worst, rep.rel_error), ok and rep.agrees()
        for i, s in enumerate(sols):
            rep = correlators.compare(s.v, offshell[i % len(offshell)], p, "overlap", (True, False))
            worst, ok = max(worst, rep.rel_error), ok and rep.agrees()
        checks.append(_check("formula_vs_oracle", worst, 1e-9, ok))

        orth = 0.0
        for i, a in enumerate(sols):
            for b in sols[i + 1 :]:
                rep = correlators.compare(a.v, b.v, p, "overlap", (True, True))
                orth = max(orth, abs(rep.formula_value) / rep.norm_product)
        checks.append(_check("on_shell_orthogonality", orth, 1e-8))
    return checks


def _ccr_residual(cutoff: int) -> float:
    worst = 0.0
    for ket in fock.basis_up_to(cutoff, cutoff - 1):
        for i in (1, 2):
            for j in (1, 2):
                lhs = fock.apply_annihilate(i, fock.apply_create(j, ket))
                rhs = fock.apply_create(j, fock.apply_annihilate(i, ket))
                diff = lhs - rhs - (ket if i == j else ket.zero_like())
                worst = max(worst, diff.max_abs())
    return worst


def _mode_verify(cfg: RunConfig):
    return [], _verify_checks(cfg)


_DISPATCH: dict[str, Callable[[RunConfig], tuple[list, list]]] = {
    "spectrum": _mode_spectrum,
    "roots": _mode_roots,
    "state": _mode_state,
    "overlap": _mode_correlator,
    "form-factor": _mode_correlator,
    "verify": _mode_verify,
}


def run(cfg: RunConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Execute one mode, write the report to ``out`` and return the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        results, checks = _DISPATCH[cfg.mode](cfg)
    except IncompleteError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INCOMPLETE
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    if cfg.format == "json":
        out.write(_dump({"config": _config_dict(cfg), "results": results, "checks": checks}) + "\n")
    else:
        out.write(_to_csv(results if results else checks))
    failed = [c["name"] for c in checks if c["status"] != "pass"]
    if failed:
        print("failed checks: " + ", ".join(failed), file=err)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", type=int, required=True, help="total boson number")
    phys = common.add_argument_group("physical couplings")
    phys.add_argument("--K", type=float)
    phys.add_argument("--dmu", type=float)
    phys.add_argument("--ej", type=float)
    aba = common.add_argument_group("integrable parameters")
    aba.add_argument("--eta", type=float)
    aba.add_argument("--omega", type=float)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--attempts", type=int, default=None, help="default 200*(N+1)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--normalized", action="store_true")

    parser = argparse.ArgumentParser(
        prog="bethe-dimer",
        description="Bethe ansatz toolkit for the two-site Bose-Hubbard dimer.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("spectrum", parents=[common], help="exact and Bethe energies")
    sub.add_parser("roots", parents=[common], help="all Bethe root sets")
    state = sub.add_parser("state", parents=[common], help="Bethe vector amplitudes")
    state.add_argument("--index", type=int, default=0)
    for name in ("overlap", "form-factor"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--bra", type=int, default=0, help="solution index")
        sp.add_argument("--ket", type=int, default=0, help="solution index")
        sp.add_argument("--bra-roots", help='off-shell roots, e.g. "0.5+0.5i,0.5-0.5i"')
        sp.add_argument("--ket-roots")
    sub.add_parser("verify", parents=[common], help="run the invariant suite")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    model = [ns.K, ns.dmu, ns.ej]
    aba = [ns.eta, ns.omega]
    has_model = any(x is not None for x in model)
    has_aba = any(x is not None for x in aba)
    if has_model == has_aba:
        raise ConfigError("give exactly one of --K/--dmu/--ej or --eta/--omega")
    if has_model:
        if any(x is None for x in model):
            raise ConfigError("--K, --dmu and --ej must be given together")
        params = ModelParams(*model)
    else:
        if any(x is None for x in aba):
            raise ConfigError("--eta and --omega must be given together")
        params = ABAParams(*aba)
    bra_roots = getattr(ns, "bra_roots", None)
    ket_roots = getattr(ns, "ket_roots", None)
    return RunConfig(
        mode=ns.mode,
        N=ns.N,
        params=params,
        tol=ns.tol,
        attempts=ns.attempts,
        seed=ns.seed,
        format=ns.format,
        normalized=ns.normalized,
        index=getattr(ns, "index", 0),
        bra=getattr(ns, "bra", 0),
        ket=getattr(ns, "ket", 0),
        bra_roots=tuple(parse_offshell_roots(bra_roots)) if bra_roots else None,
        ket_roots=tuple(parse_offshell_roots(ket_roots)) if ket_roots else None,
    )


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
