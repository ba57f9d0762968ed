"""Quick property suites behind ``hflab selftest``.

Each check returns ``(name, passed, detail)``.  The pytest suite covers the
same ground in more depth; this module exists so an installed copy can be
verified without the test tree.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .experiments import random_bound_audit
from .fock import (
    SlaterOrbitals,
    closure_defect,
    embed_density,
    random_fermionic_density,
    reduced_density,
    slater_density,
)
from .hierarchy import claim_identity_check, remainder_R, sigma_factorization_defect
from .nbody import MeanFieldSystem, build_hamiltonian, evolve_exact
from .sampling import random_density
from .tdhf import tdhf_trajectory
from .tensor_algebra import (
    all_permutations,
    antisymmetrizer,
    operator_norm,
    partial_trace,
    perm_compose,
    perm_sign,
    permutation_operator,
    trace_norm,
)

Check = tuple[str, bool, str]


def check_permutations() -> Check:
    worst = 0.0
    for n in (1, 2, 3, 4):
        perms = all_permutations(n)
        mats = {p: permutation_operator(p, 2) for p in perms}
        for p in perms:
            for q in perms:
                pq = perm_compose(p, q)
                worst = max(worst, np.abs(mats[p] @ mats[q] - mats[pq]).max())
                if perm_sign(pq) != perm_sign(p) * perm_sign(q):
                    return "permutation representation", False, f"sign not multiplicative at {p}, {q}"
    return "permutation representation", worst == 0, f"max deviation {worst:.1e}"


def check_projectors() -> Check:
    worst = 0.0
    for d in (2, 3, 4):
        for n in (1, 2, 3):
            p = antisymmetrizer(d, n)
            worst = max(worst, operator_norm(p @ p - p), operator_norm(p - p.T))
            if not math.isclose(np.trace(p), math.comb(d, n), abs_tol=1e-10):
                return "antisymmetrizer", False, f"trace mismatch at d={d}, n={n}"
    return "antisymmetrizer", worst <= 1e-12, f"max deviation {worst:.1e}"


def check_oracle() -> Check:
    worst = 0.0
    for d, N in ((3, 2), (4, 2), (4, 3)):
        D = random_fermionic_density(d, N, seed=d * 10 + N)
        dense = embed_density(D)
        for n in range(1, min(N, 3)):
            worst = max(worst, np.abs(reduced_density(D, n) - partial_trace(dense, d, n)).max())
    return "Fock marginals vs dense partial trace", worst <= 1e-10, f"max deviation {worst:.1e}"


def check_slater_defect() -> Check:
    worst = 0.0
    for N in (2, 3, 4, 5):
        D = slater_density(SlaterOrbitals.random(6, N, seed=N))
        worst = max(worst, abs(closure_defect(D, 2) - 1 / N))
    return "Slater closure defect = 1/N", worst <= 1e-10, f"max deviation {worst:.1e}"


def check_identities() -> Check:
    worst = 0.0
    for d in (2, 3):
        for n in (1, 2, 3):
            worst = max(worst, sigma_factorization_defect(d, n))
        sys = MeanFieldSystem.random(d, 4, seed=d)
        F = random_density(d, seed=d + 1)
        for n in (2, 3):
            worst = max(worst, claim_identity_check(sys.V, F, n))
        worst = max(worst, np.abs(remainder_R(sys, F, 1)).max())
    return "structural identities", worst <= 1e-10, f"max deviation {worst:.1e}"


def check_representations() -> Check:
    sys = MeanFieldSystem.random(3, 2, seed=11)
    D0 = slater_density(SlaterOrbitals.random(3, 2, seed=12))
    a = evolve_exact(sys, D0, 1.0)
    b = evolve_exact(sys, embed_density(D0), 1.0)
    gap = trace_norm(embed_density(a) - b)
    h = build_hamiltonian(sys, dense=True)
    herm = operator_norm(h - h.conj().T)
    return "dense vs Fock evolution", gap <= 1e-9 and herm <= 1e-12, f"gap {gap:.1e}"


def check_tdhf_isospectral() -> Check:
    sys = MeanFieldSystem.random(4, 2, seed=21)
    F0 = random_density(4, seed=22)
    traj = tdhf_trajectory(sys, F0, 0.5, 1e-3, save_every=50)
    ev0 = np.linalg.eigvalsh(F0)
    worst = max(np.abs(np.linalg.eigvalsh(F) - ev0).max() for F in traj.states)
    return "TDHF isospectrality", worst <= 1e-8, f"max eigenvalue drift {worst:.1e}"


def check_random_bounds() -> Check:
    reports = random_bound_audit(cases=20, seed=7)
    worst = min(r.margin for r in reports)
    return "exact bounds on random cases", all(r.passed for r in reports), f"min margin {worst:.3g}"


CHECKS: list[Callable[[], Check]] = [
    check_permutations,
    check_projectors,
    check_oracle,
    check_slater_defect,
    check_identities,
    check_representations,
    check_tdhf_isospectral,
    check_random_bounds,
]


def run_all() -> list[Check]:
    return [check() for check in CHECKS]
