"""Seeded random operators, potentials and states used by experiments and tests."""

from __future__ import annotations

import numpy as np

from .tensor_algebra import operator_norm, permutation_operator

__all__ = [
    "random_hermitian",
    "random_unitary",
    "random_potential",
    "random_density",
    "random_orbitals",
]


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_hermitian(dim: int, seed=None, norm: float | None = None) -> np.ndarray:
    rng = _rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (a + a.conj().T)
    if norm is not None:
        h *= norm / operator_norm(h)
    return h


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_potential(d: int, seed=None, norm: float = 1.0) -> np.ndarray:
    """Bounded Hermitian two-body potential commuting with ``U_(12)``.

    Gaussian Hermitian matrix on ``C^d (x) C^d``, symmetrized under the
    transposition and scaled to operator norm ``norm`` (``norm = 0`` gives
    the zero potential).
    """
    rng = _rng(seed)
    v = random_hermitian(d * d, rng)
    swap = permutation_operator((1, 0), d)
    v = 0.5 * (v + swap @ v @ swap)
    if norm == 0:
        return np.zeros_like(v)
    return v * (norm / operator_norm(v))


def random_density(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Random one-body density operator (positive, unit trace)."""
    rng = _rng(seed)
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_orbitals(d: int, n: int, seed=None) -> np.ndarray:
    """``d x n`` matrix with orthonormal columns."""
    return random_unitary(d, seed)[:, :n]
