"""Occupation-number representation of the N-fermion antisymmetric subspace.

Basis states are N-element subsets of the d single-particle modes, stored as
bit masks (bit ``i`` set when mode ``i`` is occupied) and ordered
lexicographically as subsets.  The state of a subset ``s_0 < ... < s_{N-1}``
is ``a+_{s_0} ... a+_{s_{N-1}} |vac>``, which in the tensor picture is the
Slater determinant ``sqrt(N!) P_A (e_{s_0} (x) ... (x) e_{s_{N-1}})``.

Creation operators follow the Jordan-Wigner convention: ``a+_i`` acting on a
subset ``S`` without ``i`` gives ``(-1)^{#{j in S: j < i}} |S + {i}>``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import tensor_algebra as ta
from .tensor_algebra import (
    DimensionCapError,
    kron_power,
    operator_norm,
    perm_sign,
    signed_permutation_sum,
    trace_norm,
)
from .sampling import random_orbitals

__all__ = [
    "FockBasis",
    "SlaterOrbitals",
    "AntisymDensity",
    "build_fock_basis",
    "creation_matrix",
    "annihilation_stack",
    "pair_annihilation_stack",
    "one_body_operator",
    "two_body_operator",
    "slater_amplitudes",
    "slater_density",
    "embedding_matrix",
    "embed_density",
    "reduced_density",
    "reduced_density_dense",
    "closure_defect",
    "random_fermionic_density",
    "VECTOR_CAP",
]

# longest tensor-space vector materialized by the dense reduced-density path
VECTOR_CAP = 2**20


@dataclass(frozen=True)
class FockBasis:
    d: int
    N: int
    states: tuple[int, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: k for k, s in enumerate(self.states)})

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, state: int) -> int:
        return self._index[state]

    def occupied(self, k: int) -> tuple[int, ...]:
        s = self.states[k]
        return tuple(i for i in range(self.d) if s >> i & 1)

    def __len__(self) -> int:
        return len(self.states)


@lru_cache(maxsize=None)
def build_fock_basis(d: int, N: int) -> FockBasis:
    """Lexicographic enumeration of N-subsets of ``range(d)``.

    ``N = 0`` gives the one-state vacuum sector.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if N > d:
        raise ValueError(f"no antisymmetric states: N={N} > d={d}")
    if N < 0:
        raise ValueError("N must be >= 0")
    states = tuple(sum(1 << i for i in c) for c in itertools.combinations(range(d), N))
    return FockBasis(d, N, states)


@lru_cache(maxsize=None)
def _creation(d: int, N_lo: int, i: int) -> np.ndarray:
    lo, hi = build_fock_basis(d, N_lo), build_fock_basis(d, N_lo + 1)
    out = np.zeros((hi.dim, lo.dim))
    below = (1 << i) - 1
    for k, s in enumerate(lo.states):
        if s >> i & 1:
            continue
        sign = -1.0 if bin(s & below).count("1") % 2 else 1.0
        out[hi.index(s | 1 << i), k] = sign
    out.setflags(write=False)
    return out


def creation_matrix(basis_lo: FockBasis, basis_hi: FockBasis, i: int) -> np.ndarray:
    """Matrix of ``a+_i`` from the ``N-1`` sector to the ``N`` sector."""
    if basis_lo.d != basis_hi.d or basis_hi.N != basis_lo.N + 1:
        raise ValueError("bases must share d and differ by exactly one particle")
    return _creation(basis_lo.d, basis_lo.N, i)


@lru_cache(maxsize=None)
def annihilation_stack(d: int, N: int) -> np.ndarray:
    """Array ``A`` of shape ``(d, C(d,N-1), C(d,N))`` with ``A[i] = a_i``."""
    a = np.stack([_creation(d, N - 1, i).T for i in range(d)])
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def pair_annihilation_stack(d: int, N: int) -> np.ndarray:
    """Array ``K`` of shape ``(d, d, C(d,N-2), C(d,N))`` with ``K[i, j] = a_j a_i``."""
    a1 = annihilation_stack(d, N)
    a2 = annihilation_stack(d, N - 1)
    k = np.einsum("jpq,iqr->ijpr", a2, a1)
    k.setflags(write=False)
    return k


def one_body_operator(op: np.ndarray, basis: FockBasis) -> np.ndarray:
    """``sum_ab op[a, b] a+_a a_b`` on the N sector."""
    a = annihilation_stack(basis.d, basis.N)
    return np.einsum("ab,apq,bpr->qr", op, a, a, optimize=True)


def two_body_operator(v: np.ndarray, basis: FockBasis) -> np.ndarray:
    """``sum_{i<j} V_ij`` restricted to the N sector.

    Equals ``1/2 sum V[(a,b),(c,e)] a+_a a+_b a_e a_c``.
    """
    d, N = basis.d, basis.N
    if N < 2:
        return np.zeros((basis.dim, basis.dim), dtype=complex)
    k = pair_annihilation_stack(d, N)  # k[c, e] = a_e a_c
    v4 = v.reshape(d, d, d, d)
    return 0.5 * np.einsum("abce,abpq,cepr->qr", v4, k, k, optimize=True)


# --- Slater states ----------------------------------------------------------


@dataclass(frozen=True)
class SlaterOrbitals:
    """N orthonormal orbitals stored as the columns of a ``d x N`` matrix."""

    orbitals: np.ndarray
    tol: float = 1e-8

    def __post_init__(self):
        phi = np.asarray(self.orbitals, dtype=complex)
        if phi.ndim != 2 or phi.shape[1] > phi.shape[0]:
            raise ValueError("orbitals must be a d x N matrix with N <= d")
        gram = phi.conj().T @ phi
        dev = np.abs(gram - np.eye(phi.shape[1])).max()
        if dev > self.tol:
            raise ValueError(f"orbitals are not orthonormal (Gram deviation {dev:.2e})")
        object.__setattr__(self, "orbitals", phi)

    @property
    def d(self) -> int:
        return self.orbitals.shape[0]

    @property
    def N(self) -> int:
        return self.orbitals.shape[1]

    @classmethod
    def coordinate(cls, d: int, N: int) -> "SlaterOrbitals":
        return cls(np.eye(d, N, dtype=complex))

    @classmethod
    def random(cls, d: int, N: int, seed=None) -> "SlaterOrbitals":
        return cls(random_orbitals(d, N, seed))

    def gram_deviation(self) -> float:
        phi = self.orbitals
        return float(np.abs(phi.conj().T @ phi - np.eye(self.N)).max())

    def one_body_density(self) -> np.ndarray:
        """``(1/N) sum_k |psi_k><psi_k|``."""
        return self.orbitals @ self.orbitals.conj().T / self.N


@dataclass(frozen=True)
class AntisymDensity:
    """Density operator on the antisymmetric subspace in Fock coordinates."""

    basis: FockBasis
    matrix: np.ndarray

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def N(self) -> int:
        return self.basis.N

    def validate(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if operator_norm(m - m.conj().T) > tol:
            raise ValueError("density is not Hermitian")
        if abs(np.trace(m) - 1) > tol:
            raise ValueError(f"density trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -tol:
            raise ValueError("density is not positive")

    def with_matrix(self, matrix: np.ndarray) -> "AntisymDensity":
        return AntisymDensity(self.basis, matrix)


def slater_amplitudes(orbitals: SlaterOrbitals) -> np.ndarray:
    """Fock-basis coefficients ``det(Phi[S, :])`` of the Slater determinant."""
    basis = build_fock_basis(orbitals.d, orbitals.N)
    phi = orbitals.orbitals
    return np.array([np.linalg.det(phi[list(basis.occupied(k)), :]) for k in range(basis.dim)])


def slater_density(orbitals: SlaterOrbitals) -> AntisymDensity:
    """Rank-one projector onto the Slater determinant of ``orbitals``."""
    psi = slater_amplitudes(orbitals)
    return AntisymDensity(build_fock_basis(orbitals.d, orbitals.N), np.outer(psi, psi.conj()))


def random_fermionic_density(d: int, N: int, seed=None, k: int | None = None) -> AntisymDensity:
    """Dirichlet mixture of up to five random Slater projectors."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = int(rng.integers(1, 6)) if k is None else k
    weights = rng.dirichlet(np.ones(k))
    basis = build_fock_basis(d, N)
    m = np.zeros((basis.dim, basis.dim), dtype=complex)
    for w in weights:
        psi = slater_amplitudes(SlaterOrbitals.random(d, N, rng))
        m += w * np.outer(psi, psi.conj())
    return AntisymDensity(basis, m)


# --- embedding into the full tensor space -----------------------------------


def _check_vector_dim(d: int, N: int) -> None:
    if d**N > VECTOR_CAP:
        raise DimensionCapError(f"tensor-space vectors of length {d**N} exceed {VECTOR_CAP}")


def embedding_matrix(basis: FockBasis) -> np.ndarray:
    """Isometry ``W`` (``d^N x C(d,N)``) mapping Fock states to antisymmetric tensors."""
    d, N = basis.d, basis.N
    _check_vector_dim(d, N)
    w = np.zeros((d**N, basis.dim))
    norm = 1.0 / math.sqrt(math.factorial(N))
    radix = d ** np.arange(N - 1, -1, -1)
    perms = list(itertools.permutations(range(N)))
    signs = np.array([perm_sign(p) for p in perms], dtype=float) * norm
    perms = np.array(perms, dtype=np.intp).reshape(len(perms), N)
    for k in range(basis.dim):
        occ = np.array(basis.occupied(k), dtype=np.intp)
        w[occ[perms] @ radix, k] = signs
    return w


def embed_density(D: AntisymDensity) -> np.ndarray:
    """Dense operator on ``(C^d)^{(x) N}`` (capped at the dense cap)."""
    if D.d**D.N > ta.DENSE_CAP:
        raise DimensionCapError(f"dense embedding dimension {D.d ** D.N} > cap {ta.DENSE_CAP}")
    w = embedding_matrix(D.basis)
    return w @ D.matrix @ w.T


# --- reduced densities ------------------------------------------------------


def reduced_density(D: AntisymDensity, n: int) -> np.ndarray:
    """n-body marginal ``D_{:n}`` (``n = 1, 2``) from correlation functions.

    ``(D_{:1})[i, j] = <a+_j a_i> / N`` and
    ``(D_{:2})[(i1,i2), (j1,j2)] = <a+_j1 a+_j2 a_i2 a_i1> / (N (N-1))``.
    """
    d, N = D.d, D.N
    if n == N:
        return embed_density(D)
    if n == 1:
        a = annihilation_stack(d, N)
        return np.einsum("ipq,qr,jpr->ij", a, D.matrix, a, optimize=True) / N
    if n == 2:
        if N < 2:
            raise ValueError("two-body marginal needs N >= 2")
        k = pair_annihilation_stack(d, N)
        out = np.einsum("abpq,qr,cepr->abce", k, D.matrix, k, optimize=True)
        return out.reshape(d * d, d * d) / (N * (N - 1))
    raise ValueError(f"second-quantized marginal supports n <= 2, got n={n}; use reduced_density_dense")


def reduced_density_dense(D: AntisymDensity, n: int, cutoff: float = 1e-14) -> np.ndarray:
    """n-body marginal through the tensor-space embedding, for any ``1 <= n <= N``.

    The density is diagonalized in Fock coordinates and each eigenvector is
    embedded as a tensor-space vector; the marginal of ``|Psi><Psi|`` is then
    ``M M^*`` with ``M`` the ``d^n x d^(N-n)`` reshaping of ``Psi``.  Only
    vectors of length ``d^N`` and the ``d^n``-dimensional result are formed.
    """
    d, N = D.d, D.N
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}")
    if d**n > ta.DENSE_CAP:
        raise DimensionCapError(f"marginal dimension {d ** n} > cap {ta.DENSE_CAP}")
    w = embedding_matrix(D.basis)
    evals, evecs = np.linalg.eigh(0.5 * (D.matrix + D.matrix.conj().T))
    out = np.zeros((d**n, d**n), dtype=complex)
    for lam, vec in zip(evals, evecs.T):
        if abs(lam) <= cutoff:
            continue
        m = (w @ vec).reshape(d**n, d ** (N - n))
        out += lam * (m @ m.conj().T)
    return out


def marginal(D: AntisymDensity, n: int) -> np.ndarray:
    """``D_{:n}`` by the cheapest available route."""
    if n <= 2 or n == D.N:
        return reduced_density(D, n)
    return reduced_density_dense(D, n)


def closure_defect(D: AntisymDensity, n: int = 2) -> float:
    """Trace-norm distance ``|| D_{:n} - D_{:1}^{(x) n} Sigma_n ||_tr``."""
    if n < 2:
        raise ValueError("closure defect needs n >= 2")
    if D.N < n:
        raise ValueError(f"D_{{:{n}}} undefined for N={D.N}")
    d = D.d
    f = reduced_density(D, 1)
    dn = marginal(D, n)
    return trace_norm(dn - kron_power(f, n) @ signed_permutation_sum(d, n))
