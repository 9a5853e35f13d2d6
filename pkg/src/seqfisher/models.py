"""Builders for the simulated physical systems and their measurement schemes.

Families:
  heisenberg      open chain, H = -J sum_j s_j . s_{j+1} + B sx_1
  ising           open chain, H = -J sum_j sz_j sz_{j+1} + B sum_j sx_j
  jaynes_cummings two-level atom coupled to a truncated bosonic mode
  lindblad_chain  heisenberg chain (B = 0) with local thermal dissipation
  random_unitary  a fixed Haar unitary step, no physical parameter

Units: hbar = 1. Spin-chain quantities are natural in units of J,
cavity quantities in units of omega.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.special

from .linalg import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ProbeState,
    SubsystemLayout,
    dagger,
    haar_random_unitary,
    is_hermitian,
    tensor_embed,
    unitary_propagator,
)

FAMILIES = ("heisenberg", "ising", "jaynes_cummings", "lindblad_chain", "random_unitary")

# parameters that may play the role of the unknown to estimate, per family
LAMBDA_FIELDS = {
    "heisenberg": ("B", "J"),
    "ising": ("B", "J"),
    "jaynes_cummings": ("Omega", "omega"),
    "lindblad_chain": ("kappa", "n_th", "J"),
    "random_unitary": (),
}


@dataclass(frozen=True)
class ModelSpec:
    """Parameter record for one physical model; unused fields stay None."""

    family: str
    N: int = None
    n_max: int = None
    J: float = None
    B: float = None
    omega: float = None
    Omega: float = None
    kappa: float = None
    n_th: float = None
    alpha: float = None
    tau: float = None
    lambda_name: str = None
    init_fock: int = None  # JC only: prepare the field in |m> instead of |alpha>
    init_atom: str = "g"   # JC only: "g" or "e"
    unitary_seed: int = 0  # random_unitary only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.lambda_name is not None and self.lambda_name not in LAMBDA_FIELDS[self.family]:
            raise ValueError(
                f"lambda_name {self.lambda_name!r} not available for family {self.family!r}"
            )
        if self.family in ("heisenberg", "ising", "lindblad_chain"):
            if self.N is None or self.N < 2:
                raise ValueError("chain models need N >= 2")
            if self.J is not None and self.J <= 0:
                raise ValueError("exchange coupling J must be > 0")
        if self.family == "jaynes_cummings":
            if self.omega is None or self.omega <= 0:
                raise ValueError("jaynes_cummings needs omega > 0")
            if self.n_max is not None and self.n_max < 1:
                raise ValueError("n_max must be >= 1")
            if self.init_atom not in ("g", "e"):
                raise ValueError("init_atom must be 'g' or 'e'")
        if self.family == "lindblad_chain":
            if self.kappa is not None and self.kappa < 0:
                raise ValueError("kappa must be >= 0")
            if self.n_th is not None and self.n_th < 0:
                raise ValueError("n_th must be >= 0")
        if self.family == "random_unitary" and (self.N is None or self.N < 1):
            raise ValueError("random_unitary needs N >= 1")

    def with_lambda(self, value):
        """Copy with the unknown-parameter field set to `value`."""
        if self.lambda_name is None:
            raise ValueError(f"model family {self.family!r} has no unknown parameter set")
        return replace(self, **{self.lambda_name: float(value)})


def default_tau(spec):
    """Paper-matching free-evolution interval: J*tau = N for closed chains,
    omega*tau = 2*pi for the cavity model, J*tau = 1 for the dissipative chain."""
    if spec.tau is not None:
        return spec.tau
    if spec.family in ("heisenberg", "ising"):
        return spec.N / spec.J
    if spec.family == "jaynes_cummings":
        return 2.0 * np.pi / spec.omega
    if spec.family == "lindblad_chain":
        return 1.0 / spec.J
    return 0.0  # random_unitary: the step operator is the unitary itself


def model_layout(spec):
    if spec.family == "jaynes_cummings":
        n_max = spec.n_max if spec.n_max is not None else default_n_max(spec.alpha or 0.0)
        return SubsystemLayout((2, n_max + 1))
    return SubsystemLayout((2,) * spec.N)


def default_n_max(alpha):
    """Fock truncation keeping the coherent-state tail below 1e-8."""
    return int(math.ceil(alpha * alpha + 6.0 * abs(alpha) + 10.0))


def _pauli_at(pauli, site, layout):
    return tensor_embed(pauli, site, layout)


def build_heisenberg(N, J, B):
    """H = -J sum_{j<N} (sx sx + sy sy + sz sz)_{j,j+1} + B sx_1, open chain."""
    if N < 2:
        raise ValueError("N must be >= 2")
    layout = SubsystemLayout((2,) * N)
    dim = layout.dim
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(N - 1):
        for pauli in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            h -= J * _pauli_at(pauli, j, layout) @ _pauli_at(pauli, j + 1, layout)
    h += B * _pauli_at(SIGMA_X, 0, layout)
    return h


def build_ising(N, J, B):
    """H = -J sum_{j<N} sz_j sz_{j+1} + B sum_j sx_j, open chain."""
    if N < 2:
        raise ValueError("N must be >= 2")
    layout = SubsystemLayout((2,) * N)
    dim = layout.dim
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(N - 1):
        h -= J * _pauli_at(SIGMA_Z, j, layout) @ _pauli_at(SIGMA_Z, j + 1, layout)
    for j in range(N):
        h += B * _pauli_at(SIGMA_X, j, layout)
    return h


def annihilation(n_max):
    """Truncated bosonic annihilation operator, <m-1|a|m> = sqrt(m)."""
    a = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for m in range(1, n_max + 1):
        a[m - 1, m] = np.sqrt(m)
    return a


def build_jc(omega, Omega, n_max):
    """Resonant atom-field Hamiltonian on layout [2, n_max+1], atom first.

    Atom basis: index 0 = |g>, index 1 = |e>; sz = |e><e| - |g><g|.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    layout = SubsystemLayout((2, n_max + 1))
    a = annihilation(n_max)
    sz_atom = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
    s_plus = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |e><g|
    h = omega * tensor_embed(a.conj().T @ a, 1, layout)
    h += 0.5 * omega * tensor_embed(sz_atom, 0, layout)
    coupling = np.kron(s_plus, a)
    h += Omega * (coupling + dagger(coupling))
    return h


def jc_excitation_operator(n_max):
    """Conserved total excitation a†a + |e><e| on the atom-field layout."""
    layout = SubsystemLayout((2, n_max + 1))
    a = annihilation(n_max)
    proj_e = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    return tensor_embed(a.conj().T @ a, 1, layout) + tensor_embed(proj_e, 0, layout)


def _dissipator_superop(op):
    """vec-form of D[O]rho = O rho O† - {O†O, rho}/2 with row-major vec."""
    d = op.shape[0]
    eye = np.eye(d, dtype=complex)
    oo = dagger(op) @ op
    return (
        np.kron(op, op.conj())
        - 0.5 * np.kron(oo, eye)
        - 0.5 * np.kron(eye, oo.T)
    )


def build_lindblad_superop(h, kappa, n_th, layout):
    """Liouvillian L with vec(rho') = L vec(rho) (row-major vec).

    Dissipators kappa[(1+n_th) D[s-_i] + n_th D[s+_i]] act on every site;
    s- lowers sz, so at n_th = 0 each spin relaxes toward |down>.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("Liouvillian needs a Hermitian Hamiltonian part")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    dim = layout.dim
    eye = np.eye(dim, dtype=complex)
    liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    s_minus = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |down><up|
    for site in range(layout.n_sites):
        sm = tensor_embed(s_minus, site, layout)
        liou += kappa * (1.0 + n_th) * _dissipator_superop(sm)
        if n_th > 0:
            liou += kappa * n_th * _dissipator_superop(dagger(sm))
    return liou


def lindblad_propagator(liou, tau):
    """exp(tau L) by scaling-and-squaring; acts on row-major vec(rho)."""
    liou = np.asarray(liou, dtype=complex)
    if liou.ndim != 2 or liou.shape[0] != liou.shape[1]:
        raise ValueError("Liouvillian must be square")
    return scipy.linalg.expm(tau * liou)


def coherent_state(alpha, n_max):
    """Truncated coherent state |alpha>, renormalized after the cut."""
    ms = np.arange(n_max + 1)
    # log-domain amplitudes avoid overflow in alpha**m / sqrt(m!)
    if alpha == 0.0:
        vec = np.zeros(n_max + 1, dtype=complex)
        vec[0] = 1.0
        return ProbeState.pure(vec)
    log_c = -0.5 * alpha * alpha + ms * np.log(abs(alpha)) - 0.5 * scipy.special.gammaln(ms + 1)
    amps = np.sign(alpha) ** ms * np.exp(log_c)
    tail = 1.0 - np.sum(amps * amps)
    if tail > 1e-8:
        raise ValueError(
            f"Fock truncation n_max={n_max} too small for alpha={alpha} (tail {tail:.2e})"
        )
    vec = amps.astype(complex)
    return ProbeState.pure(vec / np.linalg.norm(vec))


@dataclass(frozen=True)
class MeasurementScheme:
    """Rank-1 orthonormal local measurement at one subsystem site.

    `vectors` holds the measurement basis as columns; outcome k projects
    onto column k. Completeness and orthogonality are enforced here.
    """

    site: int
    basis: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("measurement basis must be a square matrix of column vectors")
        gram = dagger(v) @ v
        if np.max(np.abs(gram - np.eye(v.shape[0]))) > 1e-12:
            raise ValueError("measurement basis columns must be orthonormal")

    @property
    def local_dim(self):
        return self.vectors.shape[0]

    @property
    def n_outcomes(self):
        return self.vectors.shape[1]

    def projectors(self):
        """Local rank-1 projectors, one per outcome."""
        cols = self.vectors.T
        return np.array([np.outer(c, c.conj()) for c in cols])


def measurement_scheme(site, basis, local_dim, vectors=None):
    """Build a scheme; basis is sigma_z, sigma_x, or custom with `vectors`."""
    if basis == "sigma_z":
        v = np.eye(local_dim, dtype=complex)
    elif basis == "sigma_x":
        if local_dim != 2:
            raise ValueError("sigma_x basis requires a two-level site")
        v = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
    elif basis == "custom":
        if vectors is None:
            raise ValueError("custom basis needs explicit vectors")
        v = np.asarray(vectors, dtype=complex)
    else:
        raise ValueError(f"unknown measurement basis {basis!r}")
    return MeasurementScheme(site=site, basis=basis, vectors=v)


def default_scheme(spec):
    """Paper-matching measurement: last spin (sigma_z for heisenberg and the
    dissipative chain, sigma_x for ising), the atom for the cavity model,
    site 0 computational for the random-unitary case."""
    layout = model_layout(spec)
    if spec.family == "heisenberg":
        return measurement_scheme(spec.N - 1, "sigma_z", 2)
    if spec.family == "ising":
        return measurement_scheme(spec.N - 1, "sigma_x", 2)
    if spec.family == "lindblad_chain":
        return measurement_scheme(spec.N - 1, "sigma_z", 2)
    if spec.family == "jaynes_cummings":
        return measurement_scheme(0, "sigma_z", 2)
    return measurement_scheme(0, "sigma_z", layout.local_dims[0])


def initial_state(spec):
    """Hard-wired starting state: all-down for chains, |g>|alpha> (or a
    Fock preparation) for the cavity model."""
    layout = model_layout(spec)
    if spec.family == "jaynes_cummings":
        n_max = layout.local_dims[1] - 1
        if spec.init_fock is not None:
            if not 0 <= spec.init_fock <= n_max:
                raise ValueError("init_fock outside the truncated Fock space")
            field = np.zeros(n_max + 1, dtype=complex)
            field[spec.init_fock] = 1.0
        else:
            if spec.alpha is None:
                raise ValueError("jaynes_cummings needs alpha or init_fock")
            field = coherent_state(spec.alpha, n_max).data
        atom = np.zeros(2, dtype=complex)
        atom[0 if spec.init_atom == "g" else 1] = 1.0
        return ProbeState.pure(np.kron(atom, field))
    # chains: every spin down = computational index 2^N - 1
    vec = np.zeros(layout.dim, dtype=complex)
    vec[-1] = 1.0
    if spec.family == "lindblad_chain":
        return ProbeState.mixed(np.outer(vec, vec.conj()))
    return ProbeState.pure(vec)


def hamiltonian(spec):
    """Hamiltonian of the model at its current parameter values."""
    if spec.family == "heisenberg":
        return build_heisenberg(spec.N, spec.J, spec.B if spec.B is not None else 0.0)
    if spec.family == "ising":
        return build_ising(spec.N, spec.J, spec.B if spec.B is not None else 0.0)
    if spec.family == "jaynes_cummings":
        layout = model_layout(spec)
        return build_jc(spec.omega, spec.Omega, layout.local_dims[1] - 1)
    if spec.family == "lindblad_chain":
        return build_heisenberg(spec.N, spec.J, 0.0)
    raise ValueError(f"family {spec.family!r} has no Hamiltonian")


def step_operator(spec):
    """One-interval evolution operator: exp(-i tau H), exp(tau L), or the
    fixed Haar unitary for the random_unitary family."""
    tau = default_tau(spec)
    if spec.family == "random_unitary":
        return haar_random_unitary(model_layout(spec).dim, spec.unitary_seed)
    if spec.family == "lindblad_chain":
        layout = model_layout(spec)
        liou = build_lindblad_superop(hamiltonian(spec), spec.kappa, spec.n_th or 0.0, layout)
        return lindblad_propagator(liou, tau)
    return unitary_propagator(hamiltonian(spec), tau)
