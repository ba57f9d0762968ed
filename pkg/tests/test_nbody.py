import numpy as np
import pytest

from hflab.fock import (
    SlaterOrbitals,
    build_fock_basis,
    embed_density,
    embedding_matrix,
    random_fermionic_density,
    reduced_density,
    slater_density,
)
from hflab.nbody import (
    MeanFieldSystem,
    build_hamiltonian,
    evolve_exact,
    exact_trajectory,
    hierarchy_residual,
)
from hflab.sampling import random_hermitian, random_potential
from hflab.tensor_algebra import (
    all_permutations,
    operator_norm,
    partial_trace,
    permutation_operator,
    trace_norm,
)


def test_two_particle_hamiltonian(rng):
    sys = MeanFieldSystem.random(3, 2, rng)
    expected = np.kron(sys.L, np.eye(3)) + np.kron(np.eye(3), sys.L) + sys.V / 2
    assert np.abs(build_hamiltonian(sys, dense=True) - expected).max() <= 1e-14


def test_free_spectrum():
    L = np.diag([0.0, 1.0, 3.0, 4.0])
    sys = MeanFieldSystem(4, 2, L, np.zeros((16, 16)))
    ev = np.linalg.eigvalsh(build_hamiltonian(sys))
    # sums of distinct pairs of one-body energies
    assert np.allclose(ev, sorted([1.0, 3.0, 4.0, 4.0, 5.0, 7.0]))


def test_hamiltonian_commutes_with_permutations(rng):
    sys = MeanFieldSystem.random(2, 3, rng)
    h = build_hamiltonian(sys, dense=True)
    for pi in all_permutations(3):
        u = permutation_operator(pi, 2)
        assert operator_norm(h @ u - u @ h) <= 1e-12


def test_fock_hamiltonian_is_compression(rng):
    sys = MeanFieldSystem.random(4, 3, rng)
    w = embedding_matrix(build_fock_basis(4, 3))
    assert np.abs(w.T @ build_hamiltonian(sys, dense=True) @ w - build_hamiltonian(sys)).max() <= 1e-12


def test_system_validation(rng):
    with pytest.raises(ValueError):
        MeanFieldSystem(2, 2, np.array([[0, 1], [0, 0]]), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        MeanFieldSystem(2, 2, np.eye(2), random_hermitian(4, rng))
    with pytest.raises(ValueError):
        MeanFieldSystem(2, 0, np.eye(2), np.zeros((4, 4)))


def test_random_system_norms():
    sys = MeanFieldSystem.random(5, 3, seed=1, vnorm=0.7)
    assert abs(sys.vnorm - 0.7) <= 1e-12
    assert abs(operator_norm(sys.L) - 1.0) <= 1e-12


def test_stationary_state(rng):
    sys = MeanFieldSystem.random(4, 2, rng)
    h = build_hamiltonian(sys)
    vec = np.linalg.eigh(h)[1][:, 0]
    D0 = slater_density(SlaterOrbitals.coordinate(4, 2)).with_matrix(np.outer(vec, vec.conj()))
    assert np.abs(evolve_exact(sys, D0, 2.5).matrix - D0.matrix).max() <= 1e-10


@pytest.mark.parametrize("d,N", [(3, 2), (4, 2), (4, 3)])
def test_dense_and_fock_evolutions_agree(d, N):
    sys = MeanFieldSystem.random(d, N, seed=d + N)
    D0 = random_fermionic_density(d, N, seed=7)
    a = evolve_exact(sys, D0, 1.0)
    b = evolve_exact(sys, embed_density(D0), 1.0)
    assert trace_norm(embed_density(a) - b) <= 1e-9


def test_evolution_preserves_trace_and_spectrum(rng):
    sys = MeanFieldSystem.random(5, 3, rng)
    D0 = random_fermionic_density(5, 3, rng)
    Dt = evolve_exact(sys, D0, 1.7)
    assert abs(np.trace(Dt.matrix) - 1) <= 1e-12
    assert np.allclose(np.linalg.eigvalsh(Dt.matrix), np.linalg.eigvalsh(D0.matrix), atol=1e-12)


def test_dense_evolution_stays_fermionic():
    sys = MeanFieldSystem.random(4, 3, seed=2)
    Dt = evolve_exact(sys, embed_density(random_fermionic_density(4, 3, seed=3)), 0.9)
    u = permutation_operator((1, 0, 2), 4)
    assert np.abs(u @ Dt + Dt).max() <= 1e-10


def test_invalid_initial_state():
    sys = MeanFieldSystem.random(3, 2, seed=0)
    D = slater_density(SlaterOrbitals.coordinate(3, 2))
    with pytest.raises(ValueError):
        evolve_exact(sys, D.with_matrix(2 * D.matrix), 1.0)


def test_free_flow_factorizes():
    # V = 0: one-particle marginal follows the free flow exactly
    sys = MeanFieldSystem(4, 2, random_hermitian(4, 0, norm=1.0), np.zeros((16, 16)))
    D0 = slater_density(SlaterOrbitals.random(4, 2, seed=1))
    u = np.linalg.eigh(sys.L)
    prop = u[1] @ np.diag(np.exp(-1j * u[0] * 0.6)) @ u[1].conj().T
    f0 = reduced_density(D0, 1)
    assert np.abs(reduced_density(evolve_exact(sys, D0, 0.6), 1) - prop @ f0 @ prop.conj().T).max() <= 1e-12


def _residual_ratio(sys, D0, n, dt):
    r = []
    for h in (dt, dt / 2):
        traj = exact_trajectory(sys, D0, np.arange(0, 0.2 + h / 2, h))
        r.append(hierarchy_residual(sys, traj, n))
    return r[0] / r[1]


def test_hierarchy_free_case():
    sys = MeanFieldSystem(4, 2, random_hermitian(4, 5, norm=1.0), np.zeros((16, 16)))
    D0 = random_fermionic_density(4, 2, seed=6)
    assert 3.5 <= _residual_ratio(sys, D0, 1, 0.02) <= 4.5


@pytest.mark.parametrize("n", [1, 2])
def test_hierarchy_residual_second_order(n):
    sys = MeanFieldSystem.random(4, 3, seed=9)
    D0 = random_fermionic_density(4, 3, seed=10)
    assert 3.5 <= _residual_ratio(sys, D0, n, 0.02) <= 4.5


def test_hierarchy_residual_dense_matches():
    sys = MeanFieldSystem.random(4, 3, seed=9)
    D0 = random_fermionic_density(4, 3, seed=10)
    times = np.arange(0, 0.1 + 1e-9, 0.01)
    a = hierarchy_residual(sys, exact_trajectory(sys, D0, times), 1)
    b = hierarchy_residual(sys, exact_trajectory(sys, embed_density(D0), times), 1)
    assert abs(a - b) <= 1e-10


def test_potential_scaling(rng):
    sys = MeanFieldSystem.random(3, 2, rng)
    h1 = build_hamiltonian(sys.scaled_potential(2.0))
    h0 = build_hamiltonian(sys.scaled_potential(0.0))
    h = build_hamiltonian(sys)
    assert np.abs(h1 - h0 - 2 * (h - h0)).max() <= 1e-12


def test_with_particles_keeps_couplings():
    sys = MeanFieldSystem.random(4, 2, seed=3)
    other = sys.with_particles(3)
    assert other.N == 3 and np.array_equal(other.V, sys.V)
    assert np.array_equal(random_potential(3, 4), random_potential(3, 4))


def test_two_body_marginal_of_trajectory():
    sys = MeanFieldSystem.random(4, 3, seed=1)
    D0 = random_fermionic_density(4, 3, seed=2)
    Dt = evolve_exact(sys, D0, 0.5)
    dense = evolve_exact(sys, embed_density(D0), 0.5)
    assert np.abs(reduced_density(Dt, 2) - partial_trace(dense, 4, 2)).max() <= 1e-10
