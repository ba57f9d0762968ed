import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hflab.fock import (
    AntisymDensity,
    SlaterOrbitals,
    build_fock_basis,
    closure_defect,
    creation_matrix,
    embed_density,
    embedding_matrix,
    random_fermionic_density,
    reduced_density,
    reduced_density_dense,
    slater_density,
)
from hflab.hierarchy import f_minus_n
from hflab.sampling import random_unitary
from hflab.tensor_algebra import (
    antisymmetrizer,
    kron_power,
    operator_norm,
    partial_trace,
    permutation_operator,
    signed_permutation_sum,
    trace_norm,
)


# --- basis ------------------------------------------------------------------


def test_basis_sizes():
    assert build_fock_basis(2, 2).states == (0b11,)
    assert build_fock_basis(4, 2).dim == 6


def test_basis_roundtrip_exhaustive():
    b = build_fock_basis(8, 4)
    assert b.dim == 70
    assert len(set(b.states)) == 70
    for k, s in enumerate(b.states):
        assert b.index(s) == k
        assert bin(s).count("1") == 4
    # lexicographic order of the occupied-mode tuples
    occ = [b.occupied(k) for k in range(b.dim)]
    assert occ == sorted(occ) == list(itertools.combinations(range(8), 4))


def test_basis_rejects_too_many_particles():
    with pytest.raises(ValueError):
        build_fock_basis(3, 4)


# --- creation operators -----------------------------------------------------


def test_creation_from_vacuum():
    a1 = creation_matrix(build_fock_basis(2, 0), build_fock_basis(2, 1), 0)
    # |{}> -> |{0}> with sign +1
    assert a1[build_fock_basis(2, 1).index(0b01), 0] == 1.0


def test_jordan_wigner_sign():
    lo, hi = build_fock_basis(3, 1), build_fock_basis(3, 2)
    a2 = creation_matrix(lo, hi, 2)
    # a+_2 |{0}> = -|{0,2}>
    assert a2[hi.index(0b101), lo.index(0b001)] == -1.0


def _full_fock_ops(d):
    """Creation operators on the full 2^d Fock space assembled sector by sector."""
    dims = [math.comb(d, n) for n in range(d + 1)]
    offs = np.concatenate([[0], np.cumsum(dims)])
    ops = []
    for i in range(d):
        c = np.zeros((offs[-1], offs[-1]))
        for n in range(d):
            blk = creation_matrix(build_fock_basis(d, n), build_fock_basis(d, n + 1), i)
            c[offs[n + 1] : offs[n + 2], offs[n] : offs[n + 1]] = blk
        ops.append(c)
    return ops


def test_canonical_anticommutation_d4():
    ops = _full_fock_ops(4)
    ident = np.eye(ops[0].shape[0])
    for i, j in itertools.product(range(4), repeat=2):
        ai, cj = ops[i].T, ops[j]
        assert np.array_equal(ai @ cj + cj @ ai, ident * (i == j))
        assert np.array_equal(ops[i] @ ops[j] + ops[j] @ ops[i], 0 * ident)
    a1 = ops[0].T
    assert np.array_equal(a1 @ a1, 0 * ident)


def test_creation_needs_adjacent_sectors():
    with pytest.raises(ValueError):
        creation_matrix(build_fock_basis(3, 0), build_fock_basis(3, 2), 0)


# --- Slater states ----------------------------------------------------------


def test_coordinate_slater_is_basis_projector():
    D = slater_density(SlaterOrbitals.coordinate(5, 3))
    k = D.basis.index(0b00111)
    expected = np.zeros((D.basis.dim,) * 2)
    expected[k, k] = 1
    assert np.allclose(D.matrix, expected)


def test_slater_invariant_under_orbital_rotation(rng):
    orb = SlaterOrbitals.random(6, 3, rng)
    rotated = SlaterOrbitals(orb.orbitals @ random_unitary(3, rng))
    assert np.abs(slater_density(orb).matrix - slater_density(rotated).matrix).max() <= 1e-10


def test_slater_embeds_to_antisymmetrized_product():
    D = slater_density(SlaterOrbitals.coordinate(4, 2))
    e1, e2 = np.eye(4)[0], np.eye(4)[1]
    psi = math.sqrt(2) * antisymmetrizer(4, 2) @ np.kron(e1, e2)
    assert np.abs(embed_density(D) - np.outer(psi, psi)).max() <= 1e-12


def test_slater_embedding_is_determinant(rng):
    # oracle: psi(x1, x2, x3) = det[psi_k(x_j)] / sqrt(3!)
    orb = SlaterOrbitals.random(3, 3, rng)
    w = embedding_matrix(build_fock_basis(3, 3))
    amp = slater_density(orb)
    vec = w @ np.linalg.eigh(amp.matrix)[1][:, -1]
    phi = orb.orbitals
    direct = np.array(
        [np.linalg.det(phi[list(x), :]) for x in itertools.product(range(3), repeat=3)]
    ) / math.sqrt(6)
    overlap = abs(np.vdot(direct, vec))
    assert abs(overlap - 1) <= 1e-12


def test_nonorthonormal_orbitals_rejected():
    with pytest.raises(ValueError):
        SlaterOrbitals(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))


def test_embedding_is_isometry_onto_antisymmetric_space():
    b = build_fock_basis(4, 3)
    w = embedding_matrix(b)
    assert np.allclose(w.T @ w, np.eye(b.dim))
    assert np.allclose(w @ w.T, antisymmetrizer(4, 3))


# --- reduced densities ------------------------------------------------------


def test_slater_first_marginal():
    D = slater_density(SlaterOrbitals.coordinate(4, 2))
    assert np.allclose(reduced_density(D, 1), np.diag([0.5, 0.5, 0, 0]))


def test_single_particle_density_is_itself(rng):
    D = random_fermionic_density(5, 1, rng)
    assert np.allclose(reduced_density(D, 1), D.matrix)


@pytest.mark.parametrize("d,N", [(d, N) for d in (2, 3, 4) for N in (1, 2, 3) if N <= d])
def test_master_oracle(d, N):
    D = random_fermionic_density(d, N, seed=100 * d + N)
    dense = embed_density(D)
    for n in range(1, min(N, 2) + 1):
        expected = dense if n == N else partial_trace(dense, d, n)
        assert np.abs(reduced_density(D, n) - expected).max() <= 1e-10
    for n in range(1, N):
        assert np.abs(reduced_density_dense(D, n) - partial_trace(dense, d, n)).max() <= 1e-10


@pytest.mark.parametrize("N", [2, 3])
def test_slater_formula_two_body(N, rng):
    D = slater_density(SlaterOrbitals.random(6, N, rng))
    f = reduced_density(D, 1)
    expected = N / (N - 1) * np.kron(f, f) @ signed_permutation_sum(6, 2)
    assert np.abs(reduced_density(D, 2) - expected).max() <= 1e-10


@pytest.mark.parametrize("N,n", [(3, 3), (4, 3), (5, 3), (4, 4)])
def test_slater_formula_higher_orders(N, n, rng):
    # coefficient N^n (N-n)! / N! checked rather than assumed
    d = 5
    D = slater_density(SlaterOrbitals.random(d, N, rng))
    coef = N**n * math.factorial(N - n) / math.factorial(N)
    expected = coef * f_minus_n(reduced_density(D, 1), n)
    assert np.abs(reduced_density_dense(D, n) - expected).max() <= 1e-10


def test_two_body_marginal_is_fermionic(rng):
    D = random_fermionic_density(5, 3, rng)
    d2 = reduced_density(D, 2)
    u = permutation_operator((1, 0), 5)
    assert np.abs(u @ d2 + d2).max() <= 1e-10
    assert np.abs(d2 @ u + d2).max() <= 1e-10
    assert abs(np.trace(d2) - 1) <= 1e-10


def test_reduced_density_range():
    D = random_fermionic_density(5, 4, seed=1)
    with pytest.raises(ValueError):
        reduced_density(D, 3)


# --- closure defect ---------------------------------------------------------


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_slater_defect_is_inverse_N(N, rng):
    D = slater_density(SlaterOrbitals.random(6, N, rng))
    assert abs(closure_defect(D, 2) - 1 / N) <= 1e-10


def test_slater_defect_N4():
    D = slater_density(SlaterOrbitals.coordinate(6, 4))
    assert abs(closure_defect(D, 2) - 0.25) <= 1e-10


def test_defect_needs_two_particles():
    with pytest.raises(ValueError):
        closure_defect(random_fermionic_density(4, 1, seed=0), 2)


def test_mixture_has_larger_defect():
    b = build_fock_basis(6, 2)
    p1 = slater_density(SlaterOrbitals.coordinate(6, 2))
    p2 = slater_density(SlaterOrbitals(np.eye(6, dtype=complex)[:, [4, 5]]))
    mix = AntisymDensity(b, 0.5 * (p1.matrix + p2.matrix))
    # dense-oracle values for all three
    dens = [closure_defect(x, 2) for x in (p1, p2, mix)]
    for x, val in zip((p1, p2, mix), dens):
        dd = embed_density(x)
        f = partial_trace(dd, 6, 1)
        oracle = trace_norm(dd - np.kron(f, f) @ signed_permutation_sum(6, 2))
        assert abs(oracle - val) <= 1e-10
    assert dens[2] > max(dens[0], dens[1])


def test_slater_operator_norm(rng):
    for N in (2, 3, 5):
        D = slater_density(SlaterOrbitals.random(7, N, rng))
        assert abs(operator_norm(reduced_density(D, 1)) - 1 / N) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6), N=st.integers(2, 4))
def test_opnorm_squared_below_defect(seed, d, N):
    if N > d:
        N = d
    D = random_fermionic_density(d, N, seed)
    assert operator_norm(reduced_density(D, 1)) ** 2 <= closure_defect(D, 2) + 1e-10


def test_random_density_is_valid():
    D = random_fermionic_density(6, 3, seed=4)
    D.validate()
    assert abs(np.trace(kron_power(reduced_density(D, 1), 1)) - 1) <= 1e-12
