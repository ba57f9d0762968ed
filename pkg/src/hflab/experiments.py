"""Convergence sweeps, bound audits and closure tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import tensor_algebra as ta
from .fock import (
    AntisymDensity,
    SlaterOrbitals,
    build_fock_basis,
    closure_defect,
    embed_density,
    marginal,
    random_fermionic_density,
    reduced_density,
    slater_density,
)
from .hierarchy import (
    BoundReport,
    apriori_bound,
    error_term,
    f_minus_n,
    remainder_R,
    scaled_time,
    write_reports,
)
from .nbody import MeanFieldSystem, exact_trajectory
from .sampling import random_density, random_hermitian, random_potential
from .tdhf import tdhf_trajectory
from .tensor_algebra import operator_norm, partial_trace, trace_norm

__all__ = [
    "ConfigError",
    "SweepConfig",
    "SweepResult",
    "SWEEP_COLUMNS",
    "build_system",
    "initial_orbitals",
    "run_convergence_sweep",
    "run_bound_audit",
    "random_bound_audit",
    "closure_table",
]

SWEEP_COLUMNS = ("N", "t", "err_tracenorm", "defect2", "opnorm_D1", "T_scaled", "bound", "margin")
SWEEP_FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    """Experiment parameters; loaded from a flat JSON object, overridable by CLI flags."""

    d: int = 8
    N_list: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    t_final: float = 0.5
    dt: float = 1e-3
    hbar: float = 1.0
    seed: int = 0
    potential_seed: int | None = None
    one_body_seed: int | None = None
    vnorm: float = 1.0
    lnorm: float = 1.0
    one_body: list | None = None  # explicit L as nested [re, im] pairs or reals
    initial: str | list[int] = "coordinate"
    output_every: int = 50
    bound_m: int = 2
    audit_max_dim: int = 512
    dense_oracle: bool | None = None
    workers: int = 1
    out: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "SweepConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    @property
    def oracle_enabled(self) -> bool:
        if self.dense_oracle is None:
            return self.d <= 4 and max(self.N_list) <= 3
        return self.dense_oracle

    def validate(self) -> None:
        try:
            self.N_list = sorted(int(n) for n in self.N_list)
            self.d = int(self.d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad dimension or particle list: {exc}") from exc
        if not self.N_list or min(self.N_list) < 1:
            raise ConfigError("N_list must hold positive particle numbers")
        if max(self.N_list) > self.d:
            raise ConfigError(f"max(N_list)={max(self.N_list)} exceeds d={self.d}")
        if self.t_final <= 0 or self.dt <= 0 or self.hbar <= 0:
            raise ConfigError("t_final, dt and hbar must be positive")
        if not math.isclose(round(self.t_final / self.dt) * self.dt, self.t_final, rel_tol=1e-9):
            raise ConfigError("t_final must be a multiple of dt")
        if self.output_every < 1 or self.bound_m < 0 or self.workers < 1:
            raise ConfigError("output_every, workers must be >= 1 and bound_m >= 0")
        if self.vnorm < 0:
            raise ConfigError("vnorm must be nonnegative")
        if self.oracle_enabled and self.d ** max(self.N_list) > ta.DENSE_CAP:
            raise ConfigError(f"dense oracle needs d^maxN <= {ta.DENSE_CAP}")

    def to_dict(self) -> dict:
        return asdict(self)

    def physics_dict(self) -> dict:
        """Settings that affect results; output location and worker count excluded."""
        return {k: v for k, v in self.to_dict().items() if k not in ("out", "workers")}

    def digest(self) -> str:
        payload = self.physics_dict()
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class SweepResult:
    rows: list[dict]
    manifest: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _fmt(row[k]) for k in SWEEP_COLUMNS})
        return buf.getvalue()

    def column(self, name: str, N: int | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows if N is None or r["N"] == N], dtype=float)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# --- building blocks --------------------------------------------------------


def _seeds(cfg: SweepConfig) -> tuple[int, int]:
    children = np.random.SeedSequence(cfg.seed).generate_state(2)
    lseed = cfg.one_body_seed if cfg.one_body_seed is not None else int(children[0])
    vseed = cfg.potential_seed if cfg.potential_seed is not None else int(children[1])
    return lseed, vseed


def build_system(cfg: SweepConfig, N: int) -> MeanFieldSystem:
    """System with the configured ``L`` and ``V``; both are independent of ``N``."""
    lseed, vseed = _seeds(cfg)
    if cfg.one_body is not None:
        arr = np.asarray(cfg.one_body, dtype=float)
        L = arr[..., 0] + 1j * arr[..., 1] if arr.ndim == 3 else arr.astype(complex)
        if L.shape != (cfg.d, cfg.d):
            raise ConfigError(f"one_body must be {cfg.d}x{cfg.d}")
    else:
        L = random_hermitian(cfg.d, np.random.default_rng(lseed), norm=cfg.lnorm)
    V = random_potential(cfg.d, np.random.default_rng(vseed), norm=cfg.vnorm)
    try:
        return MeanFieldSystem(cfg.d, N, L, V, cfg.hbar)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def initial_orbitals(cfg: SweepConfig, N: int) -> SlaterOrbitals:
    """Slater orbitals selected by ``cfg.initial``.

    ``"coordinate"`` takes the first N basis vectors, ``"random:<seed>"`` a
    random orthonormal set, and a list of mode indices picks those modes.
    """
    sel = cfg.initial
    if sel == "coordinate":
        return SlaterOrbitals.coordinate(cfg.d, N)
    if isinstance(sel, str) and sel.startswith("random:"):
        return SlaterOrbitals.random(cfg.d, N, int(sel.split(":", 1)[1]) + N)
    if isinstance(sel, list):
        if len(sel) < N or len(set(sel[:N])) != N or not all(0 <= i < cfg.d for i in sel[:N]):
            raise ConfigError(f"initial mode list must name {N} distinct modes below d")
        return SlaterOrbitals(np.eye(cfg.d, dtype=complex)[:, sel[:N]])
    raise ConfigError(f"unknown initial selector {sel!r}")


def _initial_differences(D0: AntisymDensity, F0: np.ndarray, n: int, m: int) -> list[float]:
    """``||E_{N,n+k}(0)||_tr`` for ``k = 0..m``."""
    out = []
    for k in range(m + 1):
        j = n + k
        out.append(trace_norm(marginal(D0, j) - f_minus_n(F0, j)))
    return out


def _run_point(cfg: SweepConfig, N: int) -> dict:
    sys = build_system(cfg, N)
    orbitals = initial_orbitals(cfg, N)
    D0 = slater_density(orbitals)
    F0 = reduced_density(D0, 1)
    nsteps = int(round(cfg.t_final / cfg.dt))
    ftraj = tdhf_trajectory(sys, F0, nsteps * cfg.dt, cfg.dt, save_every=cfg.output_every)
    dtraj = exact_trajectory(sys, D0, ftraj.times)
    vnorm = sys.vnorm
    f0_norm = operator_norm(F0)
    m = min(cfg.bound_m, N - 2) if N >= 2 else -1
    eps0 = None
    if m >= 0 and sys.d ** (1 + m) <= ta.DENSE_CAP:
        eps0 = _initial_differences(D0, F0, 1, m)

    oracle_gap = None
    if cfg.oracle_enabled:
        dense = exact_trajectory(sys, embed_density(D0), ftraj.times)
        oracle_gap = max(
            trace_norm(partial_trace(a, sys.d, 1) - reduced_density(b, 1)) if N > 1 else
            trace_norm(a - embed_density(b))
            for a, b in zip(dense.states, dtraj.states)
        )

    rows = []
    for t, D, F in zip(ftraj.times, dtraj.states, ftraj.states):
        d1 = reduced_density(D, 1)
        T = scaled_time(vnorm, t, sys.hbar)
        row = {
            "N": N,
            "t": float(t),
            "err_tracenorm": trace_norm(d1 - F),
            "defect2": closure_defect(D, 2) if N >= 2 else math.nan,
            "opnorm_D1": operator_norm(d1),
            "T_scaled": T,
            "bound": "inapplicable",
            "margin": "inapplicable",
        }
        if eps0 is not None and T < 1:
            b = apriori_bound(N, 1, m, T, eps0, f0_norm)
            row["bound"], row["margin"] = b, b - row["err_tracenorm"]
        rows.append(row)
    return {"N": N, "rows": rows, "oracle_gap": oracle_gap}


def _map_points(fn, cfg: SweepConfig):
    if cfg.workers > 1 and len(cfg.N_list) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(fn, [cfg] * len(cfg.N_list), cfg.N_list))
    else:
        results = [fn(cfg, N) for N in cfg.N_list]
    return sorted(results, key=lambda r: r["N"])


def _manifest(cfg: SweepConfig, kind: str, extra: dict) -> dict:
    lseed, vseed = _seeds(cfg)
    return {
        "kind": kind,
        "code_version": f"hflab {__version__}",
        "format_version": SWEEP_FORMAT_VERSION,
        "config": cfg.physics_dict(),
        "config_hash": cfg.digest(),
        "one_body_seed": lseed,
        "potential_seed": vseed,
        **extra,
    }


def run_convergence_sweep(cfg: SweepConfig) -> SweepResult:
    """Exact N-body flow against TDHF for every N in ``cfg.N_list``.

    Writes ``sweep.csv`` and ``sweep_manifest.json`` when ``cfg.out`` is set.
    """
    cfg.validate()
    results = _map_points(_run_point, cfg)
    rows = sorted((r for res in results for r in res["rows"]), key=lambda r: (r["N"], r["t"]))
    gaps = {str(res["N"]): res["oracle_gap"] for res in results if res["oracle_gap"] is not None}
    manifest = _manifest(
        cfg,
        "sweep",
        {"columns": list(SWEEP_COLUMNS), "oracle_max_gap": gaps or None, "outputs": ["sweep.csv"]},
    )
    result = SweepResult(rows, manifest)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(result.to_csv())
        (out / "sweep_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result


# --- audits -----------------------------------------------------------------


def _audit_point(cfg: SweepConfig, N: int) -> dict:
    sys = build_system(cfg, N)
    orbitals = initial_orbitals(cfg, N)
    D0 = slater_density(orbitals)
    F0 = reduced_density(D0, 1)
    nsteps = int(round(cfg.t_final / cfg.dt))
    ftraj = tdhf_trajectory(sys, F0, nsteps * cfg.dt, cfg.dt, save_every=cfg.output_every)
    dtraj = exact_trajectory(sys, D0, ftraj.times)
    d, vnorm = sys.d, sys.vnorm
    f0_norm = operator_norm(F0)
    m = min(cfg.bound_m, N - 2)
    eps0 = _initial_differences(D0, F0, 1, m) if m >= 0 and d ** (1 + m) <= ta.DENSE_CAP else None
    fits = lambda k: d**k <= cfg.audit_max_dim  # noqa: E731
    reports = []
    for t, D, F in zip(ftraj.times, dtraj.states, ftraj.states):
        t = float(t)
        ctx = {"vnorm": vnorm, "F0_norm": f0_norm}
        for n in (1, 2, 3):
            if fits(n):
                reports.append(
                    BoundReport("fminus_tracenorm", trace_norm(f_minus_n(F, n)), 1.0, N, n, t, ctx)
                )
        for n in (2, 3):
            if fits(n + 1):
                bound = 2 * n * (n - 1) * vnorm * operator_norm(F)
                reports.append(
                    BoundReport("remainder_tracenorm", trace_norm(remainder_R(sys, F, n)), bound, N, n, t, ctx)
                )
        if N >= 2:
            d1 = reduced_density(D, 1)
            reports.append(
                BoundReport("opnorm_squared", operator_norm(d1) ** 2, closure_defect(D, 2), N, 1, t, ctx)
            )
        for n in range(1, N):
            if fits(n + 1):
                meas = trace_norm(error_term(sys, D, n))
                reports.append(BoundReport("error_term", meas, 3 * n * n * vnorm / N, N, n, t, ctx))
        T = scaled_time(vnorm, t, sys.hbar)
        if eps0 is not None:
            meas = trace_norm(reduced_density(D, 1) - F)
            if T < 1:
                bound = apriori_bound(N, 1, m, T, eps0, f0_norm)
                reports.append(BoundReport("apriori", meas, bound, N, 1, t, {**ctx, "T": T, "m": m}))
            else:
                reports.append(
                    BoundReport("apriori", meas, math.nan, N, 1, t, {**ctx, "T": T}, applicable=False)
                )
    return {"N": N, "reports": reports}


def run_bound_audit(cfg: SweepConfig) -> list[BoundReport]:
    """Bound reports along the sweep trajectories; writes ``audit.csv`` when ``cfg.out`` is set."""
    cfg.validate()
    results = _map_points(_audit_point, cfg)
    order = {"fminus_tracenorm": 0, "remainder_tracenorm": 1, "opnorm_squared": 2, "error_term": 3, "apriori": 4}
    reports = [r for res in results for r in res["reports"]]
    reports.sort(key=lambda r: (r.N, r.t, order[r.quantity], r.n))
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_reports(out / "audit.csv", reports)
        manifest = _manifest(
            cfg,
            "audit",
            {
                "outputs": ["audit.csv"],
                "reports": len(reports),
                "failures": sum(not r.passed for r in reports),
            },
        )
        (out / "audit_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return reports


def random_bound_audit(cases: int = 100, seed: int = 0) -> list[BoundReport]:
    """The four exact bounds on seeded random instances, one report each per case.

    ``||F_n^-||_tr <= 1`` and the ``R_n`` bound use random one-body densities
    with ``d <= 4``.  The error-term bound uses random fermionic densities with
    ``n + 1 <= N <= d <= 4`` and dense marginals.  ``||D_{:1}||^2 <= defect``
    uses random fermionic densities with ``d <= 8`` through the
    second-quantized marginals.
    """
    reports = []
    root = np.random.SeedSequence(seed)
    for case, child in enumerate(root.spawn(cases)):
        rng = np.random.default_rng(child)
        # ||F_n^-||_tr <= 1
        d, n = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        F = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        reports.append(BoundReport("fminus_tracenorm", trace_norm(f_minus_n(F, n)), 1.0, None, n, None, {"d": d}))
        # ||R_n(F)||_tr <= 2 n (n - 1) ||V|| ||F||
        d, n = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        vn = float(rng.uniform(0.1, 2.0))
        sys = MeanFieldSystem(d, n + 1, random_hermitian(d, rng), random_potential(d, rng, vn))
        F = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        bound = 2 * n * (n - 1) * vn * operator_norm(F)
        reports.append(
            BoundReport("remainder_tracenorm", trace_norm(remainder_R(sys, F, n)), bound, None, n, None, {"d": d})
        )
        # error term, dense marginals
        n = int(rng.integers(1, 4))
        d = int(rng.integers(n + 1, 5))
        N = int(rng.integers(n + 1, d + 1))
        vn = float(rng.uniform(0.1, 2.0))
        sys = MeanFieldSystem(d, N, random_hermitian(d, rng), random_potential(d, rng, vn))
        D = embed_density(random_fermionic_density(d, N, rng))
        meas = trace_norm(error_term(sys, D, n))
        reports.append(BoundReport("error_term", meas, 3 * n * n * vn / N, N, n, None, {"d": d}))
        # ||D_{:1}||^2 <= closure defect, second-quantized
        d = int(rng.integers(3, 9))
        N = int(rng.integers(2, min(d - 1, 5) + 1))
        D = random_fermionic_density(d, N, rng)
        meas = operator_norm(reduced_density(D, 1)) ** 2
        reports.append(BoundReport("opnorm_squared", meas, closure_defect(D, 2), N, 1, None, {"d": d}))
    return reports


def closure_table(d: int, N_list, seed: int = 0) -> list[dict]:
    """Closure defects of Slater states and of an even mixture of two orthogonal Slater states."""
    rows = []
    for N in N_list:
        if N < 2 or N > d:
            raise ConfigError(f"closure table needs 2 <= N <= d, got N={N}")
        slater = slater_density(SlaterOrbitals.random(d, N, seed + N))
        basis = build_fock_basis(d, N)
        mix = np.zeros((basis.dim, basis.dim), dtype=complex)
        if basis.dim >= 2:
            mix[0, 0] = mix[-1, -1] = 0.5
        else:
            mix[0, 0] = 1.0
        rows.append(
            {
                "N": N,
                "slater_defect": closure_defect(slater, 2),
                "inverse_N": 1.0 / N,
                "mixture_defect": closure_defect(AntisymDensity(basis, mix), 2),
                "slater_opnorm_D1": operator_norm(reduced_density(slater, 1)),
            }
        )
    return rows
