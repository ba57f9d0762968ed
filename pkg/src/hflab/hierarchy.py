"""Objects of the convergence proof and numerical audits of its bounds.

Everything here lives on dense tensor powers ``(C^d)^{(x) n}`` and is subject
to the dense dimension cap.  Particle indices are 0-based.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import Trajectory
from .nbody import MeanFieldSystem, state_marginal
from .tensor_algebra import (
    all_permutations,
    apply_permutation_left,
    apply_permutation_right,
    check_dim,
    commutator,
    embed_pair_operator,
    kron_power,
    operator_norm,
    partial_trace,
    perm_sign,
    permutation_operator,
    signed_permutation_sum,
    trace_norm,
    transposition,
)

__all__ = [
    "BoundReport",
    "MARGIN_TOL",
    "f_minus_n",
    "difference_E",
    "error_term",
    "remainder_R",
    "claim_identity_check",
    "sigma_factorization_defect",
    "apriori_bound",
    "scaled_time",
    "write_reports",
]

MARGIN_TOL = 1e-8
CSV_COLUMNS = ("quantity", "N", "n", "t", "measured", "bound", "margin")


@dataclass
class BoundReport:
    """Measured value against its analytic bound; passes when ``margin >= -MARGIN_TOL``."""

    quantity: str
    measured: float
    bound: float
    N: int | None = None
    n: int | None = None
    t: float | None = None
    context: dict = field(default_factory=dict)
    applicable: bool = True

    @property
    def margin(self) -> float:
        return self.bound - self.measured if self.applicable else math.nan

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.margin >= -MARGIN_TOL

    def row(self) -> dict:
        def fmt(x):
            return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)

        bound = fmt(self.bound) if self.applicable else "inapplicable"
        margin = fmt(self.margin) if self.applicable else "inapplicable"
        return {
            "quantity": self.quantity,
            "N": fmt(self.N),
            "n": fmt(self.n),
            "t": fmt(self.t),
            "measured": fmt(self.measured),
            "bound": bound,
            "margin": margin,
        }


def write_reports(path: str | Path, reports: Iterable[BoundReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def _sigma_right(x: np.ndarray, n: int, d: int) -> np.ndarray:
    """``x @ Sigma_n`` as a signed sum of column permutations."""
    out = np.zeros_like(x)
    for pi in all_permutations(n):
        out += perm_sign(pi) * apply_permutation_right(x, pi, d)
    return out


def f_minus_n(F: np.ndarray, n: int) -> np.ndarray:
    """``F_1^- = F`` and ``F_n^- = F^{(x) n} Sigma_n``."""
    d = F.shape[0]
    check_dim(d, n)
    if n == 1:
        return np.array(F, copy=True)
    return _sigma_right(kron_power(F, n).astype(complex), n, d)


def difference_E(
    sys: MeanFieldSystem, dn_traj: Trajectory, f_traj: Trajectory, n: int, t: float
) -> np.ndarray:
    """``E_{N,n}(t) = D_{N:n}(t) - F_n^-(t)`` on a shared time grid."""
    k = dn_traj.index_of(t)
    if not np.isclose(f_traj.times[f_traj.index_of(t)], dn_traj.times[k]):
        raise ValueError("trajectories do not share the time grid")
    D = dn_traj.states[k]
    F = f_traj.at(t)
    return state_marginal(D, n, sys.d) - f_minus_n(F, n)


def _coupling_commutators(V: np.ndarray, X: np.ndarray, n: int, d: int) -> np.ndarray:
    """``sum_{i<n} [V_{i,n}, X]`` for an operator ``X`` on ``n + 1`` factors."""
    acc = np.zeros_like(X, dtype=complex)
    for i in range(n):
        acc += commutator(embed_pair_operator(V, i, n, n + 1), X)
    return acc


def error_term(sys: MeanFieldSystem, state, n: int) -> np.ndarray:
    """``(1/N) sum_{i<j<=n} [V_ij, D_{:n}] - (n/N) sum_{i<=n} [V_{i,n+1}, D_{:n+1}]_{:n}``.

    ``state`` is an N-body state in either representation.
    """
    N, d = sys.N, sys.d
    if not 1 <= n < N:
        raise ValueError(f"need 1 <= n < N, got n={n}, N={N}")
    dn = state_marginal(state, n, d)
    dn1 = state_marginal(state, n + 1, d)
    out = np.zeros_like(dn, dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            out += commutator(embed_pair_operator(sys.V, i, j, n), dn)
    out /= N
    out -= n / N * partial_trace(_coupling_commutators(sys.V, dn1, n, d), d, n)
    return out


def remainder_R(sys: MeanFieldSystem, F: np.ndarray, n: int) -> np.ndarray:
    """``R_n(F) = sum_j [V_{j,n+1}, F^{(x) n+1} sum_{k != j} U_(k,n+1)]_{:n} Sigma_n``; ``R_1 = 0``."""
    d = sys.d
    check_dim(d, n + 1)
    if n == 1:
        return np.zeros((d, d), dtype=complex)
    fpow = kron_power(F, n + 1).astype(complex)
    swapped = [apply_permutation_right(fpow, transposition(k, n, n + 1), d) for k in range(n)]
    total = sum(swapped)
    acc = np.zeros_like(fpow)
    for j in range(n):
        acc += commutator(embed_pair_operator(sys.V, j, n, n + 1), total - swapped[j])
    return _sigma_right(partial_trace(acc, d, n), n, d)


def claim_identity_check(V: np.ndarray, F: np.ndarray, n: int) -> float:
    """Trace-norm gap between the two sides of the contraction identity

    ``{V_{n-1,n+1} U_(n,n+1) (F_n^- (x) F)}_{:n} = (I^{(x) n-1} (x) F) V_{n-1,n} F_n^-``

    (1-based labels as in the formula).
    """
    if n < 2:
        raise ValueError("identity needs n >= 2")
    d = F.shape[0]
    check_dim(d, n + 1)
    fm = f_minus_n(F, n)
    lhs_full = apply_permutation_left(transposition(n - 1, n, n + 1), np.kron(fm, F), d)
    lhs_full = embed_pair_operator(V, n - 2, n, n + 1) @ lhs_full
    lhs = partial_trace(lhs_full, d, n)
    rhs = np.kron(np.eye(d ** (n - 1)), F) @ embed_pair_operator(V, n - 2, n - 1, n) @ fm
    return trace_norm(lhs - rhs)


def sigma_factorization_defect(d: int, n: int) -> float:
    """Operator-norm gap in ``Sigma_{n+1} = (I - sum_k U_(k,n+1)) (Sigma_n (x) I)``."""
    check_dim(d, n + 1)
    lhs = signed_permutation_sum(d, n + 1)
    left = np.eye(d ** (n + 1))
    for k in range(n):
        left -= permutation_operator(transposition(k, n, n + 1), d)
    rhs = left @ np.kron(signed_permutation_sum(d, n), np.eye(d))
    return operator_norm(lhs - rhs)


def scaled_time(vnorm: float, t: float, hbar: float = 1.0) -> float:
    """``T = 2 ||V|| t / hbar``."""
    return 2.0 * vnorm * t / hbar


def apriori_bound(
    N: int,
    n: int,
    m: int,
    T: float,
    eps_values: Sequence[float],
    F0_norm: float,
    form: str = "binomial",
    sup_bound: float = 2.0,
) -> float:
    """Right-hand side of the iterated trace-norm bound on ``||E_{N,n}(t)||_tr``.

    Parameters
    ----------
    N, n, m : int
        Particle number, marginal order and iteration depth (``m <= N - n - 1``).
    T : float
        Scaled time ``2 ||V|| t / hbar``; must be below 1.
    eps_values : sequence of float
        Initial differences ``||E_{N,n+k}(0)||_tr`` for ``k = 0..m``.
    F0_norm : float
        Operator norm ``||F(0)||``.
    form : {"binomial", "power"}
        ``"binomial"`` uses the coefficients ``C(n+k-1, n-1)``; ``"power"``
        the larger ``(n+k)^n / n!`` that make the series summable.
    sup_bound : float
        Bound used for ``sup_s ||E_{N,n+m+1}(s)||_tr`` in the binomial form.
    """
    if T >= 1:
        raise ValueError(f"T={T} >= 1: bound not applicable, continue on intervals of length hbar/(3||V||)")
    if T < 0:
        raise ValueError("T must be nonnegative")
    if m > N - n - 1 or m < 0:
        raise ValueError(f"need 0 <= m <= N - n - 1 = {N - n - 1}, got m={m}")
    if len(eps_values) != m + 1:
        raise ValueError(f"need m + 1 = {m + 1} initial differences")
    amp = 2.0 / N + F0_norm
    if form == "binomial":
        total = 0.0
        for k, e0 in enumerate(eps_values):
            eps = (n + k) ** 2 * T * amp + e0
            total += math.comb(n + k - 1, n - 1) * T**k * eps
        return total + math.comb(n + m - 1, n - 1) * T**m * sup_bound
    if form == "power":
        nf = math.factorial(n)
        first = sum((n + k) ** n * e0 * T**k for k, e0 in enumerate(eps_values)) / nf
        second = sum((n + k) ** (n + 2) * amp * T ** (k + 1) for k in range(m + 1)) / nf
        return first + second + 2.0 / nf * (n + m) ** n * T**m
    raise ValueError(f"unknown form {form!r}")
