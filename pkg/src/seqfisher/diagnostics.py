"""Physical diagnostics: memory loss, rank collapse, Fock filtering, Wigner.

Curve averages parallelize over trajectories exactly like the information
sampler; outputs are deterministic per seed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from . import engine
from .errors import ContractError
from .linalg import SubsystemLayout
from .models import ModelSpec, model_layout
from .protocol import compile_protocol


@dataclass(frozen=True)
class CurveSeries:
    """An averaged curve with per-point standard errors and run metadata."""

    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if np.any(np.diff(x) <= 0):
            raise ValueError("x values must be strictly increasing")
        if np.any(np.asarray(self.y_err) < 0):
            raise ValueError("y errors must be non-negative")


def _random_pure_rows(protocol, base_seed, n_traj, tag):
    """(n_traj, dim) rotated-frame Haar-like random pure states; the seed
    stream is independent of the outcome-sampling stream."""
    dim = protocol.dim
    rows = np.empty((n_traj, dim), dtype=complex)
    for t in range(n_traj):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((base_seed & engine.kernels.MASK64, t, tag))))
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        rows[t] = v / np.linalg.norm(v)
    return rows @ protocol.rotation.T


def memory_loss_curve(model, scheme=None, n_seq=1, n_traj=1, seed=0,
                      threads=None, lam=None):
    """Average fidelity between two random initial states driven through the
    same sampled trajectory, per step."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    protocol = engine.as_protocol(model, scheme, lam)
    init_a = _random_pure_rows(protocol, seed, n_traj, 1)
    init_b = _random_pure_rows(protocol, seed, n_traj, 2)
    fid, _, excluded = engine.paired_batch(protocol, init_a, init_b, n_seq,
                                           seed, threads=threads)
    ok = excluded == -1
    n_excluded = int(n_traj - ok.sum())
    if n_excluded > 0.01 * n_traj:
        raise ContractError(
            f"{n_excluded} of {n_traj} paired trajectories excluded (>1%)"
        )
    good = fid[ok]
    y = good.mean(axis=0)
    y_err = good.std(axis=0, ddof=1) / np.sqrt(good.shape[0]) if good.shape[0] > 1 \
        else np.zeros(n_seq)
    meta = _meta(model, n_traj=n_traj, seed=seed, excluded=n_excluded)
    return CurveSeries(x=np.arange(1, n_seq + 1), y=y, y_err=y_err, metadata=meta)


def rank_collapse_curve(model, scheme=None, n_seq=1, n_traj=1, seed=0,
                        threads=None, lam=None):
    """Trajectory-averaged ratio s2/s1 of the accumulated
    projector-times-step-operator product, per step. Outcomes are sampled
    from a random initial state per trajectory, matching the random-state
    setting of the memory-loss comparison."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    protocol = engine.as_protocol(model, scheme, lam)
    init = _random_pure_rows(protocol, seed, n_traj, 3)
    _, outcomes, excluded = engine.paired_batch(protocol, init, init, n_seq,
                                                seed, threads=threads)
    if np.any(excluded != -1):
        raise ContractError("sampling from a single state cannot exclude trajectories")
    ratios = engine.accumulate_batch(protocol, outcomes, threads=threads)
    y = ratios.mean(axis=0)
    y_err = ratios.std(axis=0, ddof=1) / np.sqrt(n_traj) if n_traj > 1 \
        else np.zeros(n_seq)
    meta = _meta(model, n_traj=n_traj, seed=seed, excluded=0)
    return CurveSeries(x=np.arange(1, n_seq + 1), y=y, y_err=y_err, metadata=meta)


def field_occupation(state_vec, layout):
    """Photon-number distribution of the bosonic factor, atom traced out."""
    dims = layout.local_dims
    psi = np.asarray(state_vec).reshape(dims)
    return np.sum(np.abs(psi) ** 2, axis=0)


def default_checkpoints(n_seq):
    """Geometric checkpoint schedule 0, 1, 2, 4, ... plus the endpoint."""
    points = [0]
    k = 1
    while k < n_seq:
        points.append(k)
        k *= 2
    points.append(n_seq)
    return sorted(set(points))


def jc_filter_snapshot(model, n_seq=1, seed=0, checkpoints=None):
    """Field number-basis occupation along one cavity-model trajectory.

    Returns one CurveSeries per checkpoint (x = Fock index m, y = P(m));
    checkpoint 0 is the initial distribution.
    """
    if not isinstance(model, ModelSpec) or model.family != "jaynes_cummings":
        raise ValueError("filter snapshots require the jaynes_cummings family")
    protocol = compile_protocol(model)
    layout = protocol.layout
    if checkpoints is None:
        checkpoints = default_checkpoints(n_seq)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if any(c < 0 or c > n_seq for c in checkpoints):
        raise ValueError("checkpoints must lie in [0, n_seq]")

    uniforms = engine.kernels.trajectory_uniforms(seed, 0, 1, n_seq)[0]
    state = protocol.init.copy()
    series = []

    def snapshot(step):
        dist = field_occupation(protocol.state_from_frame(state), layout)
        meta = _meta(model, seed=seed, checkpoint=step)
        series.append(CurveSeries(
            x=np.arange(dist.shape[0]), y=dist,
            y_err=np.zeros_like(dist), metadata=meta))

    if 0 in checkpoints:
        snapshot(0)
    for n in range(1, n_seq + 1):
        state = protocol.ops[0] @ state
        dens = state.real ** 2 + state.imag ** 2
        probs = np.bincount(protocol.group, weights=dens, minlength=protocol.n_out)
        u = uniforms[n - 1] * probs.sum()
        sel = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        sel = min(sel, protocol.n_out - 1)
        mask = protocol.group == sel
        state = np.where(mask, state, 0.0) / np.sqrt(probs[sel])
        if n in checkpoints:
            snapshot(n)
    return series


@dataclass(frozen=True)
class WignerGrid:
    """Phase-space quasi-probability W(q,p) on a rectangular grid.

    w[i, j] = W(q[i], p[j]); validated to integrate to 1 within 1e-3 and to
    respect the magnitude bound 1/pi.
    """

    q: np.ndarray
    p: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        total = np.trapezoid(np.trapezoid(self.w, self.p, axis=1), self.q)
        if abs(total - 1.0) > 1e-3:
            raise ValueError(
                f"Wigner grid integrates to {total:.6f}; enlarge or refine the grid"
            )
        if np.max(np.abs(self.w)) > 1.0 / np.pi + 1e-6:
            raise ValueError("Wigner values exceed the 1/pi magnitude bound")


def wigner(rho_field, q_grid, p_grid):
    """Wigner function of a Fock-basis density matrix via the Laguerre
    expansion of |m><n| (equal to the phase-space integral definition,
    hbar = 1, a = (q + ip)/sqrt(2))."""
    rho = np.asarray(rho_field, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho_field must be a square Fock-basis matrix")
    q = np.asarray(q_grid, dtype=float)
    p = np.asarray(p_grid, dtype=float)
    qq, pp = np.meshgrid(q, p, indexing="ij")
    r2 = qq * qq + pp * pp
    gauss = np.exp(-r2) / np.pi
    zbar = qq - 1j * pp
    n_fock = rho.shape[0]
    w = np.zeros_like(r2)
    for m in range(n_fock):
        for n in range(m + 1):
            coeff = rho[m, n]
            if coeff == 0.0 and m != n:
                continue
            amp = ((-1.0) ** n
                   * np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1))
                            + 0.5 * (m - n) * np.log(2.0))
                   * eval_genlaguerre(n, m - n, 2.0 * r2))
            term = amp * zbar ** (m - n) * gauss
            if m == n:
                w += coeff.real * term.real
            else:
                w += 2.0 * (coeff * term).real
    return WignerGrid(q=q, p=p, w=w)


def position_distribution(rho_field, q_grid):
    """<q|rho|q> from Fock components; oracle for the Wigner p-marginal."""
    rho = np.asarray(rho_field, dtype=complex)
    q = np.asarray(q_grid, dtype=float)
    n_fock = rho.shape[0]
    # Hermite functions by the stable two-term recurrence
    psi = np.zeros((n_fock, q.shape[0]))
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * q * q)
    if n_fock > 1:
        psi[1] = np.sqrt(2.0) * q * psi[0]
    for n in range(2, n_fock):
        psi[n] = np.sqrt(2.0 / n) * q * psi[n - 1] - np.sqrt((n - 1) / n) * psi[n - 2]
    return np.einsum("mq,mn,nq->q", psi, rho, psi).real


def _meta(model, **extra):
    meta = {"family": model.family if isinstance(model, ModelSpec) else "custom"}
    if isinstance(model, ModelSpec):
        for name in ("N", "n_max", "J", "B", "omega", "Omega", "kappa", "n_th",
                     "alpha", "tau"):
            value = getattr(model, name)
            if value is not None:
                meta[name] = value
    meta.update(extra)
    return meta
