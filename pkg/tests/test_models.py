import numpy as np
import pytest

from seqfisher.linalg import SubsystemLayout, is_hermitian, tensor_embed, unitary_propagator
from seqfisher.models import (
    ModelSpec,
    annihilation,
    build_heisenberg,
    build_ising,
    build_jc,
    build_lindblad_superop,
    coherent_state,
    default_scheme,
    default_tau,
    initial_state,
    jc_excitation_operator,
    lindblad_propagator,
    measurement_scheme,
    model_layout,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def two_site_hand_built(J, B):
    """Independent 4x4 construction of the two-spin exchange Hamiltonian."""
    h = np.zeros((4, 4), dtype=complex)
    for s in (SX, SY, SZ):
        h -= J * np.kron(s, s)
    h += B * np.kron(SX, np.eye(2))
    return h


class TestHeisenberg:
    def test_two_site_spectrum(self):
        h = build_heisenberg(2, 1.0, 0.0)
        oracle = np.sort(np.linalg.eigvalsh(two_site_hand_built(1.0, 0.0)))
        assert np.allclose(np.sort(np.linalg.eigvalsh(h)), oracle, atol=1e-12)
        assert np.allclose(oracle, [-1, -1, -1, 3], atol=1e-12)

    def test_magnetization_conserved_without_field(self):
        h = build_heisenberg(2, 1.0, 0.0)
        layout = SubsystemLayout((2, 2))
        total_sz = sum(tensor_embed(SZ, s, layout) for s in range(2))
        assert np.max(np.abs(h @ total_sz - total_sz @ h)) < 1e-12

    def test_hermitian_traceless(self):
        h = build_heisenberg(4, 1.0, 0.5)
        assert h.shape == (16, 16)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12
        assert abs(np.trace(h)) < 1e-12

    def test_needs_two_sites(self):
        with pytest.raises(ValueError):
            build_heisenberg(1, 1.0, 0.0)


class TestIsing:
    def test_two_site_spectrum(self):
        h = build_ising(2, 1.0, 0.0)
        oracle = np.sort(np.linalg.eigvalsh(-np.kron(SZ, SZ)))
        assert np.allclose(np.sort(np.linalg.eigvalsh(h)), oracle, atol=1e-12)
        assert np.allclose(oracle, [-1, -1, 1, 1], atol=1e-12)

    def test_diagonal_without_field(self):
        h = build_ising(3, 1.0, 0.0)
        assert np.max(np.abs(h - np.diag(np.diagonal(h)))) < 1e-14

    def test_hermitian_traceless(self):
        h = build_ising(3, 1.0, 1.0)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12
        assert abs(np.trace(h)) < 1e-12


class TestJaynesCummings:
    def test_block_spectrum(self):
        # doublets {|e,m-1>, |g,m>} split by 2*Omega*sqrt(m) around omega(m-1/2)
        omega, Omega, n_max = 1.0, 0.23, 7
        h = build_jc(omega, Omega, n_max)
        expected = [-omega / 2, omega * (n_max + 0.5)]
        for m in range(1, n_max + 1):
            center = omega * (m - 0.5)
            gap = Omega * np.sqrt(m)
            expected += [center - gap, center + gap]
        assert np.allclose(np.sort(np.linalg.eigvalsh(h)), np.sort(expected),
                           atol=1e-10)

    def test_uncoupled_is_diagonal(self):
        h = build_jc(1.0, 0.0, 4)
        assert np.max(np.abs(h - np.diag(np.diagonal(h)))) < 1e-14

    def test_excitation_number_conserved(self):
        h = build_jc(1.0, 0.3, 6)
        n_exc = jc_excitation_operator(6)
        assert np.max(np.abs(h @ n_exc - n_exc @ h)) < 1e-12

    def test_annihilation_elements(self):
        a = annihilation(3)
        for m in range(1, 4):
            assert a[m - 1, m] == pytest.approx(np.sqrt(m))


class TestLindblad:
    def _random_density(self, rng, dim):
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = m @ m.conj().T
        return rho / np.trace(rho).real

    def test_trace_preservation_on_random_states(self):
        layout = SubsystemLayout((2, 2))
        h = build_heisenberg(2, 1.0, 0.0)
        liou = build_lindblad_superop(h, 0.4, 0.3, layout)
        rng = np.random.default_rng(2)
        for _ in range(50):
            rho = self._random_density(rng, 4)
            drho = (liou @ rho.reshape(-1)).reshape(4, 4)
            assert abs(np.trace(drho)) < 1e-10

    def test_identity_left_eigenvector(self):
        layout = SubsystemLayout((2, 2))
        h = build_heisenberg(2, 1.0, 0.0)
        liou = build_lindblad_superop(h, 0.4, 0.3, layout)
        vec_id = np.eye(4, dtype=complex).reshape(-1)
        assert np.max(np.abs(vec_id @ liou)) < 1e-10

    def test_zero_kappa_is_commutator(self):
        layout = SubsystemLayout((2, 2))
        h = build_heisenberg(2, 1.0, 0.0)
        liou = build_lindblad_superop(h, 0.0, 0.0, layout)
        rng = np.random.default_rng(3)
        rho = self._random_density(rng, 4)
        lhs = (liou @ rho.reshape(-1)).reshape(4, 4)
        assert np.allclose(lhs, -1j * (h @ rho - rho @ h), atol=1e-12)

    def test_single_qubit_decay_rate(self):
        # from the sz = +1 eigenstate, d<sz>/dt = -2 kappa at t = 0
        kappa = 0.37
        layout = SubsystemLayout((2,))
        liou = build_lindblad_superop(np.zeros((2, 2), dtype=complex), kappa, 0.0, layout)
        rho = np.diag([1.0, 0.0]).astype(complex)
        drho = (liou @ rho.reshape(-1)).reshape(2, 2)
        dsz = np.trace(SZ @ drho).real
        assert dsz == pytest.approx(-2.0 * kappa, abs=1e-12)

    def test_rejects_negative_kappa(self):
        with pytest.raises(ValueError):
            build_lindblad_superop(np.zeros((2, 2), dtype=complex), -0.1, 0.0,
                                   SubsystemLayout((2,)))


class TestLindbladPropagator:
    def test_zero_time_identity(self):
        layout = SubsystemLayout((2,))
        liou = build_lindblad_superop(SZ, 0.2, 0.1, layout)
        assert np.allclose(lindblad_propagator(liou, 0.0), np.eye(4), atol=1e-12)

    def test_unitary_limit(self):
        layout = SubsystemLayout((2, 2))
        h = build_heisenberg(2, 1.0, 0.4)
        liou = build_lindblad_superop(h, 0.0, 0.0, layout)
        chan = lindblad_propagator(liou, 0.8)
        u = unitary_propagator(h, 0.8)
        rng = np.random.default_rng(4)
        for _ in range(5):
            v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            v /= np.linalg.norm(v)
            rho = np.outer(v, v.conj())
            via_chan = (chan @ rho.reshape(-1)).reshape(4, 4)
            via_u = u @ rho @ u.conj().T
            assert np.max(np.abs(via_chan - via_u)) < 1e-8

    def test_amplitude_damping_closed_form(self):
        kappa, n_th = 0.3, 0.0
        layout = SubsystemLayout((2,))
        liou = build_lindblad_superop(np.zeros((2, 2), dtype=complex), kappa, n_th, layout)
        rho = np.diag([1.0, 0.0]).astype(complex)
        for t in (0.1, 0.5, 2.0):
            chan = lindblad_propagator(liou, t)
            rt = (chan @ rho.reshape(-1)).reshape(2, 2)
            assert rt[0, 0].real == pytest.approx(np.exp(-kappa * t), abs=1e-8)

    def test_thermal_damping_closed_form(self):
        kappa, n_th = 0.3, 0.45
        layout = SubsystemLayout((2,))
        liou = build_lindblad_superop(np.zeros((2, 2), dtype=complex), kappa, n_th, layout)
        rho = np.diag([1.0, 0.0]).astype(complex)
        steady = n_th / (1.0 + 2.0 * n_th)
        rate = kappa * (1.0 + 2.0 * n_th)
        for t in (0.2, 1.0, 4.0):
            chan = lindblad_propagator(liou, t)
            rt = (chan @ rho.reshape(-1)).reshape(2, 2)
            expect = steady + (1.0 - steady) * np.exp(-rate * t)
            assert rt[0, 0].real == pytest.approx(expect, abs=1e-8)

    def test_trace_preserving_on_random_states(self):
        layout = SubsystemLayout((2, 2))
        h = build_heisenberg(2, 1.0, 0.0)
        chan = lindblad_propagator(build_lindblad_superop(h, 0.5, 0.2, layout), 1.3)
        rng = np.random.default_rng(8)
        for _ in range(10):
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            rho = m @ m.conj().T
            rho /= np.trace(rho).real
            out = (chan @ rho.reshape(-1)).reshape(4, 4)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)


class TestCoherentState:
    def test_vacuum(self):
        psi = coherent_state(0.0, 5)
        assert np.allclose(psi.data, np.eye(6)[0])

    def test_mean_photon_number(self):
        psi = coherent_state(2.0, 30)
        number = np.arange(31)
        mean = np.sum(number * np.abs(psi.data) ** 2)
        assert mean == pytest.approx(4.0, abs=1e-6)

    def test_normalized(self):
        for alpha in (0.5, 1.7, 3.0):
            psi = coherent_state(alpha, 40)
            assert abs(np.linalg.norm(psi.data) - 1.0) < 1e-12

    def test_truncation_too_small(self):
        with pytest.raises(ValueError):
            coherent_state(4.0, 8)


class TestMeasurementScheme:
    @pytest.mark.parametrize("basis", ["sigma_z", "sigma_x"])
    def test_complete_orthogonal_idempotent(self, basis):
        scheme = measurement_scheme(0, basis, 2)
        projs = scheme.projectors()
        assert np.allclose(sum(projs), np.eye(2), atol=1e-12)
        for i, pi in enumerate(projs):
            for j, pj in enumerate(projs):
                expect = pi if i == j else np.zeros((2, 2))
                assert np.allclose(pi @ pj, expect, atol=1e-12)

    def test_custom_requires_orthonormal(self):
        with pytest.raises(ValueError):
            measurement_scheme(0, "custom", 2, vectors=[[1, 1], [0, 1]])

    def test_sigma_x_needs_qubit(self):
        with pytest.raises(ValueError):
            measurement_scheme(0, "sigma_x", 3)

    def test_defaults_match_conventions(self):
        heis = ModelSpec(family="heisenberg", N=4, J=1.0, B=0.1)
        assert default_scheme(heis).site == 3
        assert default_scheme(heis).basis == "sigma_z"
        ising = ModelSpec(family="ising", N=3, J=1.0, B=1.0)
        assert default_scheme(ising).basis == "sigma_x"
        jc = ModelSpec(family="jaynes_cummings", omega=1.0, Omega=0.1, alpha=1.0)
        assert default_scheme(jc).site == 0


class TestModelSpec:
    def test_default_intervals(self):
        heis = ModelSpec(family="heisenberg", N=5, J=2.0, B=0.1)
        assert default_tau(heis) == pytest.approx(2.5)  # J tau = N
        jc = ModelSpec(family="jaynes_cummings", omega=2.0, Omega=0.1, alpha=1.0)
        assert default_tau(jc) == pytest.approx(np.pi)  # omega tau = 2 pi
        diss = ModelSpec(family="lindblad_chain", N=3, J=4.0, kappa=0.1)
        assert default_tau(diss) == pytest.approx(0.25)  # J tau = 1

    def test_chain_initial_state_all_down(self):
        spec = ModelSpec(family="heisenberg", N=3, J=1.0, B=0.0)
        psi = initial_state(spec)
        vec = np.zeros(8)
        vec[7] = 1.0
        assert np.allclose(psi.data, vec)

    def test_jc_initial_state(self):
        spec = ModelSpec(family="jaynes_cummings", omega=1.0, Omega=0.1, alpha=2.0,
                         n_max=30)
        psi = initial_state(spec)
        layout = model_layout(spec)
        assert psi.dim == layout.dim
        # atom ground: no amplitude on the excited block
        block = psi.data.reshape(2, 31)
        assert np.max(np.abs(block[1])) == 0.0
        assert np.allclose(block[0], coherent_state(2.0, 30).data)

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(family="nope")
        with pytest.raises(ValueError):
            ModelSpec(family="heisenberg", N=1, J=1.0)
        with pytest.raises(ValueError):
            ModelSpec(family="heisenberg", N=2, J=-1.0)
        with pytest.raises(ValueError):
            ModelSpec(family="lindblad_chain", N=2, J=1.0, kappa=-0.5)
        with pytest.raises(ValueError):
            ModelSpec(family="heisenberg", N=2, J=1.0, lambda_name="kappa")
