import numpy as np
import pytest
from scipy.stats import kstest

from seqfisher.linalg import (
    SIGMA_X,
    SIGMA_Z,
    ProbeState,
    SubsystemLayout,
    fidelity,
    haar_random_unitary,
    hermitize,
    partial_trace,
    random_pure_state,
    singular_ratio,
    tensor_embed,
    unitary_propagator,
)


class TestTensorEmbed:
    def test_projector_on_first_qubit(self):
        layout = SubsystemLayout((2, 2))
        p1 = np.array([[0, 0], [0, 1]], dtype=complex)
        out = tensor_embed(p1, 0, layout)
        assert np.allclose(out, np.diag([0, 0, 1, 1]))

    def test_identity_embeds_to_identity(self):
        layout = SubsystemLayout((2, 2, 2))
        for site in range(3):
            out = tensor_embed(np.eye(2), site, layout)
            assert np.allclose(out, np.eye(8))

    def test_sigma_z_on_second_qubit(self):
        layout = SubsystemLayout((2, 2))
        out = tensor_embed(SIGMA_Z, 1, layout)
        assert np.allclose(out, np.diag([1, -1, 1, -1]))

    def test_site_out_of_range(self):
        with pytest.raises(ValueError):
            tensor_embed(np.eye(2), 2, SubsystemLayout((2, 2)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            tensor_embed(np.eye(3), 0, SubsystemLayout((2, 2)))

    def test_disjoint_sites_commute(self):
        layout = SubsystemLayout((2, 3, 2))
        rng = np.random.default_rng(0)
        for _ in range(5):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            ea = tensor_embed(a, 0, layout)
            eb = tensor_embed(b, 1, layout)
            assert np.allclose(ea @ eb, eb @ ea, atol=1e-12)


class TestPropagator:
    def test_half_rabi_flip(self):
        u = unitary_propagator(SIGMA_X, np.pi / 2)
        out = u @ np.array([1, 0], dtype=complex)
        # |0> -> -i|1> up to global phase
        assert abs(abs(out[1]) - 1) < 1e-10
        assert abs(out[0]) < 1e-10

    def test_zero_time_is_identity(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        h = hermitize(a)
        assert np.allclose(unitary_propagator(h, 0.0), np.eye(5), atol=1e-12)

    def test_heisenberg_symmetry(self):
        # B = 0 conserves total magnetization, so U commutes with sum sz
        from seqfisher.models import build_heisenberg
        h = build_heisenberg(2, 1.0, 0.0)
        u = unitary_propagator(h, 0.3)
        layout = SubsystemLayout((2, 2))
        total_sz = sum(tensor_embed(SIGMA_Z, s, layout) for s in range(2))
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10
        assert np.max(np.abs(u @ total_sz - total_sz @ u)) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            unitary_propagator(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_unitarity_for_random_generators(self, seed):
        rng = np.random.default_rng(seed)
        dim = rng.integers(2, 9)
        h = hermitize(rng.standard_normal((dim, dim))
                      + 1j * rng.standard_normal((dim, dim)))
        tau = float(rng.uniform(0.1, 20.0))
        u = unitary_propagator(h, tau)
        assert np.max(np.abs(u.conj().T @ u - np.eye(dim))) < 1e-10


class TestFidelity:
    def test_identical_pure(self):
        psi = random_pure_state(6, 3)
        assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        a = ProbeState.pure([1, 0])
        b = ProbeState.pure([0, 1])
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_half_overlap(self):
        a = ProbeState.pure([1, 0])
        b = ProbeState.pure(np.array([1, 1]) / np.sqrt(2))
        assert fidelity(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(ProbeState.pure([1, 0]), ProbeState.pure([1, 0, 0]))

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = random_pure_state(4, rng.integers(1 << 30))
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            rho = m @ m.conj().T
            b = ProbeState.mixed(rho / np.trace(rho).real)
            fab, fba = fidelity(a, b), fidelity(b, a)
            assert fab == pytest.approx(fba, abs=1e-10)
            assert 0.0 <= fab <= 1.0
            assert fidelity(b, b) == pytest.approx(1.0, abs=1e-9)

    def test_pure_mixed_agrees_with_projection(self):
        rng = np.random.default_rng(9)
        psi = random_pure_state(5, 21)
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        rho = m @ m.conj().T
        rho /= np.trace(rho).real
        direct = np.vdot(psi.data, rho @ psi.data).real
        assert fidelity(psi, ProbeState.mixed(rho)) == pytest.approx(direct, abs=1e-10)


class TestSingularRatio:
    def test_rank_one(self):
        m = np.outer([1, 0], np.array([1, 1]) / np.sqrt(2))
        assert singular_ratio(m) == pytest.approx(0.0, abs=1e-12)

    def test_identity(self):
        assert singular_ratio(np.eye(4)) == pytest.approx(1.0, abs=1e-12)

    def test_diag(self):
        assert singular_ratio(np.diag([2.0, 1.0])) == pytest.approx(0.5, abs=1e-12)

    def test_zero_matrix(self):
        with pytest.raises(ValueError):
            singular_ratio(np.zeros((3, 3)))

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        base = singular_ratio(m)
        for c in (2.0, -0.3, 1j, 0.5 - 2.2j):
            assert singular_ratio(c * m) == pytest.approx(base, abs=1e-12)


class TestHaarUnitary:
    def test_unitarity(self):
        u = haar_random_unitary(4, 123)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10

    def test_determinism(self):
        assert np.array_equal(haar_random_unitary(4, 5), haar_random_unitary(4, 5))
        assert not np.array_equal(haar_random_unitary(4, 5), haar_random_unitary(4, 6))

    def test_eigenphases_uniform(self):
        # marginal of a randomly chosen eigenphase of a Haar U(2) is uniform
        n_samples = 10_000
        picker = np.random.default_rng(999)
        phases = np.empty(n_samples)
        for k in range(n_samples):
            u = haar_random_unitary(2, k)
            ev = np.linalg.eigvals(u)
            phases[k] = np.angle(ev[picker.integers(2)])
        stat = kstest(phases, "uniform", args=(-np.pi, 2 * np.pi))
        assert stat.pvalue > 0.01


class TestRandomPureState:
    def test_normalized(self):
        for seed in (0, 1, 17):
            psi = random_pure_state(12, seed)
            assert abs(np.linalg.norm(psi.data) - 1.0) < 1e-12

    def test_distinct_seeds_differ(self):
        a = random_pure_state(16, 100)
        b = random_pure_state(16, 101)
        assert fidelity(a, b) < 0.999

    def test_dim_one(self):
        psi = random_pure_state(1, 4)
        assert abs(abs(psi.data[0]) - 1.0) < 1e-12


class TestPartialTrace:
    def test_product_state(self):
        layout = SubsystemLayout((2, 3))
        a = random_pure_state(2, 1).data
        b = random_pure_state(3, 2).data
        rho = np.outer(np.kron(a, b), np.kron(a, b).conj())
        assert np.allclose(partial_trace(rho, layout, 0), np.outer(a, a.conj()),
                           atol=1e-12)
        assert np.allclose(partial_trace(rho, layout, 1), np.outer(b, b.conj()),
                           atol=1e-12)

    def test_trace_preserved(self):
        layout = SubsystemLayout((2, 2, 2))
        psi = random_pure_state(8, 5).data
        rho = np.outer(psi, psi.conj())
        for keep in range(3):
            reduced = partial_trace(rho, layout, keep)
            assert np.trace(reduced).real == pytest.approx(1.0, abs=1e-12)
