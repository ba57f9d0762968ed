"""Dense operator algebra on tensor powers of a finite-dimensional space.

Operators are plain square ``numpy`` arrays.  An operator on the n-fold
tensor power of ``C^d`` has dimension ``d**n`` with the first factor as
the most significant index (row-major ``np.kron`` convention).

Permutations are tuples of 0-based images.  ``U_pi`` moves the factor in
slot ``k`` to slot ``pi[k]``, so that ``U_pi @ U_sigma == U_{pi o sigma}``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "DENSE_CAP",
    "DimensionCapError",
    "NonHermitianError",
    "set_dense_cap",
    "check_dim",
    "kron",
    "kron_power",
    "perm_sign",
    "perm_compose",
    "perm_inverse",
    "transposition",
    "all_permutations",
    "permutation_index",
    "permutation_operator",
    "apply_permutation_left",
    "apply_permutation_right",
    "signed_permutation_sum",
    "antisymmetrizer",
    "partial_trace",
    "trace_norm",
    "operator_norm",
    "embed_one_body",
    "one_body_sum",
    "embed_pair_operator",
    "commutator",
    "is_hermitian",
    "unitary_propagator",
    "SpectralPropagator",
]

DENSE_CAP = 4096


class DimensionCapError(ValueError):
    """Raised when a dense tensor-space operator would exceed the dimension cap."""


class NonHermitianError(ValueError):
    pass


def set_dense_cap(cap: int) -> int:
    """Set the dense dimension cap, returning the previous value."""
    global DENSE_CAP
    old = DENSE_CAP
    DENSE_CAP = int(cap)
    return old


def check_dim(d: int, n: int) -> int:
    dim = d**n
    if dim > DENSE_CAP:
        raise DimensionCapError(
            f"dense operator on ({d})^{n} has dimension {dim} > cap {DENSE_CAP}; "
            "use the antisymmetric (Fock) representation"
        )
    return dim


def _dim_power(dim: int, d: int) -> int:
    """Return n with d**n == dim."""
    n = int(round(math.log(dim, d))) if d > 1 else 1
    if d**n != dim:
        raise ValueError(f"dimension {dim} is not a power of {d}")
    return n


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dim = a.shape[0] * b.shape[0]
    if dim > DENSE_CAP:
        raise DimensionCapError(f"kron result dimension {dim} > cap {DENSE_CAP}")
    return np.kron(a, b)


def kron_power(a: np.ndarray, n: int) -> np.ndarray:
    """``a^{(x) n}``; the 0-th power is the 1x1 identity."""
    check_dim(a.shape[0], n)
    out = np.ones((1, 1), dtype=np.result_type(a, float))
    for _ in range(n):
        out = np.kron(out, a)
    return out


# --- permutations -----------------------------------------------------------


def _validate_perm(pi: Sequence[int]) -> tuple[int, ...]:
    pi = tuple(int(p) for p in pi)
    if sorted(pi) != list(range(len(pi))):
        raise ValueError(f"{pi} is not a permutation of 0..{len(pi) - 1}")
    return pi


def perm_sign(pi: Sequence[int]) -> int:
    """Sign of a permutation from its cycle decomposition."""
    pi = _validate_perm(pi)
    seen = [False] * len(pi)
    sign = 1
    for start in range(len(pi)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = pi[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def perm_compose(pi: Sequence[int], sigma: Sequence[int]) -> tuple[int, ...]:
    """``pi o sigma``: apply ``sigma`` first."""
    return tuple(pi[s] for s in sigma)


def perm_inverse(pi: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(pi)
    for k, p in enumerate(pi):
        inv[p] = k
    return tuple(inv)


def transposition(i: int, j: int, n: int) -> tuple[int, ...]:
    pi = list(range(n))
    pi[i], pi[j] = pi[j], pi[i]
    return tuple(pi)


def all_permutations(n: int) -> list[tuple[int, ...]]:
    return list(itertools.permutations(range(n)))


@lru_cache(maxsize=256)
def permutation_index(pi: tuple[int, ...], d: int) -> np.ndarray:
    """Index map ``p`` with ``U_pi e_k = e_{p[k]}`` on the flattened basis."""
    n = len(pi)
    grid = np.arange(d**n).reshape((d,) * n)
    # slot m of the image holds the old slot inv(pi)[m]
    moved = np.transpose(grid, perm_inverse(pi))
    p = np.empty(d**n, dtype=np.intp)
    p[moved.ravel()] = np.arange(d**n)
    p.setflags(write=False)
    return p


def permutation_operator(pi: Sequence[int], d: int) -> np.ndarray:
    """Matrix of ``U_pi`` on ``(C^d)^{(x) n}``."""
    pi = _validate_perm(pi)
    dim = check_dim(d, len(pi))
    p = permutation_index(pi, d)
    u = np.zeros((dim, dim))
    u[p, np.arange(dim)] = 1.0
    return u


def apply_permutation_left(pi: Sequence[int], x: np.ndarray, d: int) -> np.ndarray:
    """``U_pi @ x`` without forming ``U_pi``."""
    p = permutation_index(_validate_perm(pi), d)
    out = np.empty_like(x)
    out[p] = x
    return out


def apply_permutation_right(x: np.ndarray, pi: Sequence[int], d: int) -> np.ndarray:
    """``x @ U_pi`` without forming ``U_pi``."""
    p = permutation_index(_validate_perm(pi), d)
    return x[:, p]


def signed_permutation_sum(d: int, n: int) -> np.ndarray:
    """``Sigma_n = sum_pi sgn(pi) U_pi`` (equal to ``n! P_{A_n}``)."""
    dim = check_dim(d, n)
    out = np.zeros((dim, dim))
    cols = np.arange(dim)
    for pi in all_permutations(n):
        out[permutation_index(pi, d), cols] += perm_sign(pi)
    return out


def antisymmetrizer(d: int, n: int) -> np.ndarray:
    """Orthogonal projector onto the antisymmetric subspace of ``(C^d)^{(x) n}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return signed_permutation_sum(d, n) / math.factorial(n)


# --- traces and norms -------------------------------------------------------


def partial_trace(
    t: np.ndarray, d: int, keep: int, basis: np.ndarray | None = None
) -> np.ndarray:
    """Trace out all but the first ``keep`` factors of an operator on ``(C^d)^{(x) N}``.

    Parameters
    ----------
    t : ndarray
        Operator of dimension ``d**N``.
    d : int
        Single-particle dimension.
    keep : int
        Number of leading factors kept, ``1 <= keep < N``.
    basis : ndarray, optional
        Unitary whose columns are the orthonormal basis summed over in the
        traced factors.  The result does not depend on it; it is exposed so
        that independence can be checked.
    """
    n_total = _dim_power(t.shape[0], d)
    if not 1 <= keep < n_total:
        raise ValueError(f"keep={keep} must satisfy 1 <= keep < N={n_total}")
    a, b = d**keep, d ** (n_total - keep)
    if basis is not None:
        w = kron_power(basis, n_total - keep)
        t = t.reshape(a, b, a, b)
        t = np.einsum("xi,aibj,jy->axby", w.conj().T, t, w, optimize=True)
    return np.einsum("aibi->ab", t.reshape(a, b, a, b))


def trace_norm(t: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(t, compute_uv=False).sum())


def operator_norm(t: np.ndarray) -> float:
    """Largest singular value."""
    return float(np.linalg.svd(t, compute_uv=False)[0])


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(h: np.ndarray, tol: float = 1e-10) -> bool:
    return operator_norm(h - h.conj().T) <= tol


# --- embedded operators -----------------------------------------------------


def embed_one_body(op: np.ndarray, j: int, n: int) -> np.ndarray:
    """``I^{(x) j} (x) op (x) I^{(x) n-j-1}`` (0-based slot ``j``)."""
    d = op.shape[0]
    check_dim(d, n)
    return np.kron(np.kron(np.eye(d**j), op), np.eye(d ** (n - j - 1)))


def one_body_sum(op: np.ndarray, n: int) -> np.ndarray:
    """``sum_j op_j`` on ``(C^d)^{(x) n}``."""
    d = op.shape[0]
    out = np.zeros((d**n, d**n), dtype=np.result_type(op, float))
    for j in range(n):
        out += embed_one_body(op, j, n)
    return out


def _pair_permutation(i: int, j: int, n: int) -> tuple[int, ...]:
    rest = iter(range(2, n))
    return tuple(0 if k == i else 1 if k == j else next(rest) for k in range(n))


def embed_pair_operator(
    v: np.ndarray,
    i: int,
    j: int,
    n: int,
    perm: Sequence[int] | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Two-body operator ``V_ij`` acting on factors ``i < j`` (0-based) of ``n``.

    Built as ``U_pi^* (V (x) I) U_pi`` for a permutation with ``pi(i) = 0``
    and ``pi(j) = 1``; pass ``perm`` to choose a specific one.
    """
    d = int(round(math.sqrt(v.shape[0])))
    if d * d != v.shape[0]:
        raise ValueError("pair operator must act on C^d (x) C^d")
    if not 0 <= i < j < n:
        raise ValueError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")
    swap = permutation_operator((1, 0), d)
    if operator_norm(v @ swap - swap @ v) > tol:
        raise ValueError("pair operator does not commute with the transposition U_(12)")
    dim = check_dim(d, n)
    pi = _pair_permutation(i, j, n) if perm is None else _validate_perm(perm)
    if pi[i] != 0 or pi[j] != 1:
        raise ValueError(f"permutation {pi} does not send ({i}, {j}) to (0, 1)")
    v12 = np.kron(v, np.eye(dim // (d * d)))
    p = permutation_index(pi, d)
    # U^* X U == X[p][:, p] for a permutation matrix U with U e_k = e_{p[k]}
    return v12[np.ix_(p, p)]


# --- propagators ------------------------------------------------------------


class SpectralPropagator:
    """``exp(-i H t / hbar)`` from a single eigendecomposition of ``H``."""

    def __init__(self, h: np.ndarray, hbar: float = 1.0, tol: float = 1e-10):
        if hbar <= 0:
            raise ValueError("hbar must be positive")
        if not is_hermitian(h, tol):
            raise NonHermitianError("generator is not Hermitian within tolerance")
        h = 0.5 * (h + h.conj().T)
        self.energies, self.vectors = np.linalg.eigh(h)
        self.hbar = hbar

    def __call__(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * self.energies * t / self.hbar)
        return (self.vectors * phase) @ self.vectors.conj().T

    def conjugate(self, rho: np.ndarray, t: float) -> np.ndarray:
        """``U(t) rho U(t)^*``, computed in the eigenbasis."""
        q = self.vectors
        phase = np.exp(-1j * self.energies * t / self.hbar)
        r = q.conj().T @ rho @ q
        r = phase[:, None] * r * phase.conj()[None, :]
        return q @ r @ q.conj().T


def unitary_propagator(h: np.ndarray, t: float, hbar: float = 1.0) -> np.ndarray:
    """``exp(-i H t / hbar)`` for Hermitian ``H``."""
    return SpectralPropagator(h, hbar)(t)
