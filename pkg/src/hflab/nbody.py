"""Exact N-body von Neumann dynamics under a mean-field Hamiltonian.

Two representations of the same flow are supported: the dense tensor space
``(C^d)^{(x) N}`` (small oracle cases) and the antisymmetric subspace in Fock
coordinates (dimension ``C(d, N)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import tensor_algebra as ta
from .fock import (
    AntisymDensity,
    build_fock_basis,
    marginal,
    one_body_operator,
    two_body_operator,
)
from .io import Trajectory
from .sampling import random_hermitian, random_potential
from .tensor_algebra import (
    SpectralPropagator,
    commutator,
    embed_pair_operator,
    one_body_sum,
    operator_norm,
    partial_trace,
    permutation_operator,
    trace_norm,
)

__all__ = [
    "MeanFieldSystem",
    "build_hamiltonian",
    "evolve_exact",
    "exact_trajectory",
    "state_marginal",
    "hierarchy_rhs",
    "hierarchy_residual",
]

State = Union[AntisymDensity, np.ndarray]


@dataclass(frozen=True)
class MeanFieldSystem:
    """One-body generator ``L`` and pair potential ``V`` for N particles in ``C^d``."""

    d: int
    N: int
    L: np.ndarray
    V: np.ndarray
    hbar: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        L = np.asarray(self.L, dtype=complex)
        V = np.asarray(self.V, dtype=complex)
        if L.shape != (self.d, self.d):
            raise ValueError(f"L must be {self.d}x{self.d}")
        if V.shape != (self.d**2, self.d**2):
            raise ValueError(f"V must act on C^{self.d} (x) C^{self.d}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if operator_norm(L - L.conj().T) > self.tol:
            raise ValueError("L is not Hermitian")
        if operator_norm(V - V.conj().T) > self.tol:
            raise ValueError("V is not Hermitian")
        swap = permutation_operator((1, 0), self.d)
        if operator_norm(V @ swap - swap @ V) > self.tol:
            raise ValueError("V does not commute with the transposition U_(12)")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "V", V)

    @classmethod
    def random(
        cls, d: int, N: int, seed=None, vnorm: float = 1.0, lnorm: float | None = 1.0, hbar: float = 1.0
    ) -> "MeanFieldSystem":
        rng = np.random.default_rng(seed)
        L = random_hermitian(d, rng, norm=lnorm)
        V = random_potential(d, rng, norm=vnorm)
        return cls(d, N, L, V, hbar)

    def with_particles(self, N: int) -> "MeanFieldSystem":
        return MeanFieldSystem(self.d, N, self.L, self.V, self.hbar)

    def scaled_potential(self, alpha: float) -> "MeanFieldSystem":
        return MeanFieldSystem(self.d, self.N, self.L, alpha * self.V, self.hbar)

    @property
    def vnorm(self) -> float:
        return operator_norm(self.V)


def build_hamiltonian(sys: MeanFieldSystem, dense: bool = False) -> np.ndarray:
    """``H_N = sum_j L_j + (1/N) sum_{i<j} V_ij``.

    Returns the dense ``d^N``-dimensional matrix when ``dense`` is set,
    otherwise its restriction to the antisymmetric subspace in Fock
    coordinates.
    """
    d, N = sys.d, sys.N
    if dense:
        ta.check_dim(d, N)
        h = one_body_sum(sys.L, N).astype(complex)
        for i in range(N):
            for j in range(i + 1, N):
                h += embed_pair_operator(sys.V, i, j, N) / N
        return h
    basis = build_fock_basis(d, N)
    return one_body_operator(sys.L, basis) + two_body_operator(sys.V, basis) / N


def _check_density(m: np.ndarray, tol: float = 1e-8) -> None:
    if abs(np.trace(m) - 1) > tol:
        raise ValueError(f"initial state has trace {np.trace(m).real:.3e}, not 1")
    if operator_norm(m - m.conj().T) > tol:
        raise ValueError("initial state is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -tol:
        raise ValueError("initial state has a negative eigenvalue")


def _propagator(sys: MeanFieldSystem, d0: State) -> SpectralPropagator:
    dense = not isinstance(d0, AntisymDensity)
    return SpectralPropagator(build_hamiltonian(sys, dense=dense), sys.hbar)


def _matrix(state: State) -> np.ndarray:
    return state.matrix if isinstance(state, AntisymDensity) else np.asarray(state)


def _wrap(like: State, m: np.ndarray) -> State:
    return like.with_matrix(m) if isinstance(like, AntisymDensity) else m


def evolve_exact(sys: MeanFieldSystem, d0: State, t: float) -> State:
    """``exp(-i H_N t/hbar) D0 exp(i H_N t/hbar)`` in the representation of ``d0``."""
    m = _matrix(d0)
    _check_density(m)
    if t == 0:
        return d0
    return _wrap(d0, _propagator(sys, d0).conjugate(m, t))


def exact_trajectory(
    sys: MeanFieldSystem, d0: State, times: Sequence[float], meta: dict | None = None
) -> Trajectory:
    """Exact states at the requested times from one diagonalization of ``H_N``."""
    m = _matrix(d0)
    _check_density(m)
    prop = _propagator(sys, d0)
    states = [d0 if t == 0 else _wrap(d0, prop.conjugate(m, t)) for t in times]
    info = {"N": sys.N, "d": sys.d, "hbar": sys.hbar, "kind": "exact"}
    info.update(meta or {})
    return Trajectory(np.asarray(times, dtype=float), states, info)


def state_marginal(state: State, n: int, d: int) -> np.ndarray:
    """``D_{:n}`` of either representation."""
    if isinstance(state, AntisymDensity):
        return marginal(state, n)
    N = int(round(np.log(state.shape[0]) / np.log(d)))
    return state if n == N else partial_trace(state, d, n)


def hierarchy_rhs(sys: MeanFieldSystem, dn: np.ndarray, dn1: np.ndarray | None, n: int) -> np.ndarray:
    """Right-hand side of the n-th equation of the N-particle hierarchy.

    ``sum_{j<=n} [L_j, D_n] + (1/N) sum_{i<j<=n} [V_ij, D_n]
    + ((N-n)/N) sum_{i<=n} [V_{i,n+1}, D_{n+1}]_{:n}``
    """
    N, d = sys.N, sys.d
    out = commutator(one_body_sum(sys.L, n), dn)
    for i in range(n):
        for j in range(i + 1, n):
            out = out + commutator(embed_pair_operator(sys.V, i, j, n), dn) / N
    if n < N:
        acc = np.zeros((d ** (n + 1),) * 2, dtype=complex)
        for i in range(n):
            acc += commutator(embed_pair_operator(sys.V, i, n, n + 1), dn1)
        out = out + (N - n) / N * partial_trace(acc, d, n)
    return out


def hierarchy_residual(sys: MeanFieldSystem, traj: Trajectory, n: int) -> float:
    """Max over interior grid points of the trace-norm defect of the hierarchy.

    The time derivative is a centered difference, so the residual of an exact
    trajectory is ``O(dt^2)``.
    """
    if len(traj) < 3:
        raise ValueError("need at least three samples")
    if not 1 <= n < sys.N:
        raise ValueError(f"need 1 <= n < N, got n={n}")
    dt = traj.dt
    d = sys.d
    dn = [state_marginal(s, n, d) for s in traj.states]
    worst = 0.0
    for k in range(1, len(traj) - 1):
        dn1 = state_marginal(traj.states[k], n + 1, d)
        lhs = 1j * sys.hbar * (dn[k + 1] - dn[k - 1]) / (2 * dt)
        worst = max(worst, trace_norm(lhs - hierarchy_rhs(sys, dn[k], dn1, n)))
    return worst
