"""Dense complex linear algebra for finite-dimensional quantum systems.

States are numpy arrays: pure states as complex vectors, density matrices
as complex square matrices. All tolerances follow the package-wide
convention: hermiticity / unitarity / normalization at 1e-10.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

HERM_TOL = 1e-10
NORM_TOL = 1e-10

# Pauli matrices and qubit identity, computational basis |0> = spin up.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class SubsystemLayout:
    """Tensor factorization of the full Hilbert space, site 0 leftmost."""

    local_dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.local_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("local_dims must be positive integers")
        object.__setattr__(self, "local_dims", dims)

    @property
    def dim(self):
        return int(np.prod(self.local_dims))

    @property
    def n_sites(self):
        return len(self.local_dims)

    def stride(self, site):
        """Row-major stride of `site`: basis index i has digit (i // stride) % d."""
        if not 0 <= site < self.n_sites:
            raise ValueError(f"site {site} out of range for {self.n_sites} sites")
        return int(np.prod(self.local_dims[site + 1:], initial=1))

    def site_digits(self, site):
        """For every full-space basis index, the local basis index at `site`."""
        idx = np.arange(self.dim)
        return (idx // self.stride(site)) % self.local_dims[site]


@dataclass(frozen=True)
class ProbeState:
    """Normalized quantum state, either a pure vector or a density matrix."""

    kind: str  # "pure" | "mixed"
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", data)
        if self.kind == "pure":
            if data.ndim != 1:
                raise ValueError("pure state must be a vector")
            norm = np.linalg.norm(data)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"pure state norm {norm} deviates from 1")
        elif self.kind == "mixed":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError("mixed state must be a square matrix")
            if abs(np.trace(data).real - 1.0) > NORM_TOL or abs(np.trace(data).imag) > NORM_TOL:
                raise ValueError("density matrix trace deviates from 1")
            if np.max(np.abs(data - data.conj().T)) > NORM_TOL:
                raise ValueError("density matrix not Hermitian")
            if np.min(np.linalg.eigvalsh(hermitize(data))) < -NORM_TOL:
                raise ValueError("density matrix has negative eigenvalues")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    @property
    def dim(self):
        return self.data.shape[0]

    @staticmethod
    def pure(vec):
        return ProbeState("pure", np.asarray(vec, dtype=complex))

    @staticmethod
    def mixed(rho):
        return ProbeState("mixed", np.asarray(rho, dtype=complex))

    def density(self):
        """Density-matrix form regardless of kind."""
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data


def dagger(m):
    return np.asarray(m).conj().T


def hermitize(m):
    """Symmetrized (A + A†)/2; removes rounding-level anti-Hermitian parts."""
    return 0.5 * (m + dagger(m))


def is_hermitian(m, tol=HERM_TOL):
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - dagger(m))) < tol


def is_unitary(m, tol=HERM_TOL):
    m = np.asarray(m)
    return np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0]))) < tol


def tensor_embed(op, site, layout):
    """Identity on all factors except `op` acting at `site` of the layout."""
    op = np.asarray(op, dtype=complex)
    d = layout.local_dims[site] if 0 <= site < layout.n_sites else None
    if d is None:
        raise ValueError(f"site {site} out of range for layout {layout.local_dims}")
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match local dim {d}")
    left = int(np.prod(layout.local_dims[:site], initial=1))
    right = layout.stride(site)
    out = np.kron(np.kron(np.eye(left, dtype=complex), op), np.eye(right, dtype=complex))
    return out


_EIG_CACHE = {}
_EIG_CACHE_MAX = 64


def _eigh_cached(h):
    key = hashlib.sha1(np.ascontiguousarray(h).tobytes()).hexdigest()
    hit = _EIG_CACHE.get(key)
    if hit is None:
        if len(_EIG_CACHE) >= _EIG_CACHE_MAX:
            _EIG_CACHE.clear()
        hit = np.linalg.eigh(hermitize(h))
        _EIG_CACHE[key] = hit
    return hit


def unitary_propagator(h, tau):
    """exp(-i tau H) for Hermitian H via eigendecomposition.

    The eigendecomposition is cached on the matrix contents, so repeated
    calls with the same H and different tau reuse it.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("propagator requires a Hermitian generator")
    w, v = _eigh_cached(h)
    phases = np.exp(-1j * tau * w)
    return (v * phases) @ dagger(v)


def fidelity(a, b):
    """Uhlmann fidelity; equals |<phi|theta>|^2 for two pure states."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch {a.dim} vs {b.dim}")
    if a.kind == "pure" and b.kind == "pure":
        return float(min(1.0, abs(np.vdot(a.data, b.data)) ** 2))
    if a.kind == "pure":
        return float(min(1.0, np.vdot(a.data, b.data @ a.data).real))
    if b.kind == "pure":
        return fidelity(b, a)
    # general case: F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
    w, v = np.linalg.eigh(hermitize(a.data))
    w = np.clip(w, 0.0, None)
    sqrt_a = (v * np.sqrt(w)) @ dagger(v)
    inner = hermitize(sqrt_a @ b.data @ sqrt_a)
    ev = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(ev)) ** 2))


def singular_ratio(m):
    """Ratio s2/s1 of the two largest singular values; 0 for rank-1 input."""
    m = np.asarray(m, dtype=complex)
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        raise ValueError("singular_ratio of the zero matrix is undefined")
    if s.shape[0] < 2:
        return 0.0
    return float(s[1] / s[0])


def haar_random_unitary(dim, seed):
    """Haar-distributed unitary: QR of a complex Gaussian with phase fix."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_pure_state(dim, seed):
    """Normalized complex Gaussian vector, deterministic per seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return ProbeState.pure(v / np.linalg.norm(v))


def partial_trace(rho, layout, keep):
    """Trace out every site except `keep` from a density matrix."""
    dims = layout.local_dims
    n = len(dims)
    d_keep = dims[keep]
    rest = layout.dim // d_keep
    r = np.asarray(rho, dtype=complex).reshape(dims + dims)
    row_order = [keep] + [i for i in range(n) if i != keep]
    r = np.transpose(r, row_order + [n + i for i in row_order])
    r = r.reshape(d_keep, rest, d_keep, rest)
    return np.trace(r, axis1=1, axis2=3)
