"""The evolve-measure-collapse engine.

Three synchronized replicas (parameter values lambda, lambda+h, lambda-h)
follow the identical outcome history sampled from the center replica, which
realizes the conditional-probability derivative by central differences.

Trajectories are independent given distinct indices: the per-trajectory
uniform stream is a pure function of (base_seed, trajectory_index), chunks
have a fixed size, and chunk partial sums are reduced in index order with
compensated summation, so results are bit-identical at any thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BranchCapExceeded, ContractError, TrajectoryAborted
from .linalg import ProbeState, tensor_embed
from .models import ModelSpec
from .protocol import EPS_COND, Protocol, compile_protocol

CHUNK_SIZE = 1024
DEFAULT_EPS_PRUNE = 1e-12
DEFAULT_BRANCH_CAP = 2_000_000


def resolve_threads(threads=None):
    """Thread count: explicit argument, then SEQFISHER_THREADS, then cpu."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SEQFISHER_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def as_protocol(model, scheme=None, lam=None, h=None, reset=False):
    if isinstance(model, Protocol):
        return model
    return compile_protocol(model, scheme=scheme, lam=lam, h=h, reset=reset)


def _chunk_ranges(total):
    return [(start, min(CHUNK_SIZE, total - start)) for start in range(0, total, CHUNK_SIZE)]


def _map_chunks(fn, total, threads):
    """Apply fn(start, count) per fixed-size chunk, results in chunk order."""
    ranges = _chunk_ranges(total)
    if threads <= 1 or len(ranges) == 1:
        return [fn(start, count) for start, count in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda rc: fn(rc[0], rc[1]), ranges))


def kahan_add(total, compensation, term):
    """One compensated-summation step on matching arrays (in place)."""
    y = term - compensation
    t = total + y
    compensation[...] = (t - total) - y
    total[...] = t


# ---------------------------------------------------------------------------
# single-step reference implementation (original frame, explicit projectors)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepOutcome:
    outcome: int
    prob_center: float
    prob_plus: float
    prob_minus: float


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    steps: list
    aborted_at: int = -1  # -1 when the full sequence completed

    @property
    def n_seq(self):
        return len(self.steps)

    def joint_probability(self):
        p = 1.0
        for s in self.steps:
            p *= s.prob_center
        return p


def embedded_projectors(scheme, layout):
    """Full-space projectors of a local scheme, one per outcome."""
    return [tensor_embed(p, scheme.site, layout) for p in scheme.projectors()]


def protocol_step(states, channels, scheme, layout, rng, eps_cond=EPS_COND,
                  reset_state=None):
    """One evolve-measure-collapse cycle on a (center, plus, minus) triplet.

    `states` are ProbeState objects; `channels` are the matching interval
    propagators (unitaries for pure states, vec-form superoperators for
    density matrices). The outcome is drawn from the center replica and the
    same projector collapses all three, each renormalized by its own
    probability. Mirrors the compiled kernels; kept in the original frame
    with explicit projectors as an independent reference.
    """
    projectors = embedded_projectors(scheme, layout)
    n_out = len(projectors)
    pure = states[0].kind == "pure"
    evolved = []
    probs = np.zeros((3, n_out))
    for r, (state, chan) in enumerate(zip(states, channels)):
        if pure:
            phi = np.asarray(chan) @ state.data
            evolved.append(phi)
            for g, proj in enumerate(projectors):
                amp = proj @ phi
                probs[r, g] = float(np.vdot(amp, amp).real)
        else:
            dim = state.dim
            rho = (np.asarray(chan) @ state.data.reshape(-1)).reshape(dim, dim)
            evolved.append(rho)
            for g, proj in enumerate(projectors):
                probs[r, g] = float(np.trace(proj @ rho @ proj).real)
    if np.min(probs) < -1e-9:
        raise ContractError(f"negative outcome probability {np.min(probs):.3e}")
    probs = np.clip(probs, 0.0, None)

    u = rng.random() * probs[0].sum()
    sel = n_out - 1
    acc = 0.0
    for g in range(n_out):
        acc += probs[0, g]
        if u < acc:
            sel = g
            break
    if probs[0, sel] <= 0.0:
        raise ContractError("sampled outcome has non-positive center probability")
    step = StepOutcome(sel, probs[0, sel], probs[1, sel], probs[2, sel])
    if probs[1, sel] < eps_cond or probs[2, sel] < eps_cond:
        raise TrajectoryAborted(
            f"outcome {sel} has vanishing probability in a shifted replica"
        )
    new_states = []
    for r in range(3):
        if reset_state is not None:
            new_states.append(reset_state)
            continue
        if pure:
            vec = projectors[sel] @ evolved[r]
            new_states.append(ProbeState.pure(vec / np.sqrt(probs[r, sel])))
        else:
            rho = projectors[sel] @ evolved[r] @ projectors[sel]
            new_states.append(ProbeState.mixed(rho / probs[r, sel]))
    return step, tuple(new_states)


# ---------------------------------------------------------------------------
# batched trajectory sampling
# ---------------------------------------------------------------------------

def _traj_kernel(protocol):
    return kernels.traj_chunk_pure if protocol.path == "pure" else kernels.traj_chunk_mixed


def sample_trajectory_batch(model, scheme=None, lam=None, h=None, n_seq=1,
                            n_traj=1, base_seed=0, threads=None, reset=False):
    """Sample n_traj trajectories; returns dict of stacked per-step arrays.

    outcomes (n,n_seq) int, probs (n,n_seq,3) of the sampled outcome at
    lambda and lambda+-h, fisher (n,n_seq) conditional information values,
    status (n,) trajectory status codes.
    """
    protocol = as_protocol(model, scheme, lam, h, reset)
    if n_seq < 1:
        raise ValueError("n_seq must be >= 1")
    kernel = _traj_kernel(protocol)
    two_h = 2.0 * protocol.h
    threads = resolve_threads(threads)

    def chunk(start, count):
        uniforms = kernels.trajectory_uniforms(base_seed, start, count, n_seq)
        outcomes = np.empty((count, n_seq), dtype=np.int64)
        probs = np.zeros((count, n_seq, 3))
        fisher = np.zeros((count, n_seq))
        status = np.empty(count, dtype=np.int64)
        kernel(protocol.ops, protocol.group, protocol.n_out, protocol.init,
               protocol.reset, uniforms, EPS_COND, two_h, outcomes, probs,
               fisher, status)
        return outcomes, probs, fisher, status

    parts = _map_chunks(chunk, n_traj, threads)
    out = {
        "outcomes": np.concatenate([p[0] for p in parts]),
        "probs": np.concatenate([p[1] for p in parts]),
        "fisher": np.concatenate([p[2] for p in parts]),
        "status": np.concatenate([p[3] for p in parts]),
    }
    if np.any(out["status"] == -2):
        raise ContractError("outcome probability fell below -1e-9 during sampling")
    return out


def sample_trajectory(model, scheme=None, lam=None, h=None, n_seq=1, seed=0,
                      reset=False):
    """One trajectory as a TrajectoryRecord (trajectory index 0 of `seed`)."""
    batch = sample_trajectory_batch(model, scheme, lam, h, n_seq=n_seq,
                                    n_traj=1, base_seed=seed, threads=1,
                                    reset=reset)
    status = int(batch["status"][0])
    n_done = n_seq if status == -1 else status + 1
    steps = [
        StepOutcome(int(batch["outcomes"][0, n]), *batch["probs"][0, n])
        for n in range(n_done)
    ]
    return TrajectoryRecord(seed=seed, steps=steps, aborted_at=status)


def mc_accumulate(model, scheme=None, lam=None, h=None, n_seq=1, mu_max=1,
                  base_seed=0, threads=None, reset=False):
    """Per-step sums of the conditional information over sampled trajectories.

    Returns (sum_f, sum_sq, n_completed, n_aborted): compensated sums of
    f and f^2 per step over completed trajectories, reduced in chunk order.
    """
    protocol = as_protocol(model, scheme, lam, h, reset)
    if protocol.lam is None:
        raise ValueError("information sampling needs a protocol with a parameter")
    kernel = _traj_kernel(protocol)
    two_h = 2.0 * protocol.h
    threads = resolve_threads(threads)

    def chunk(start, count):
        uniforms = kernels.trajectory_uniforms(base_seed, start, count, n_seq)
        outcomes = np.empty((count, n_seq), dtype=np.int64)
        probs = np.zeros((count, n_seq, 3))
        fisher = np.zeros((count, n_seq))
        status = np.empty(count, dtype=np.int64)
        kernel(protocol.ops, protocol.group, protocol.n_out, protocol.init,
               protocol.reset, uniforms, EPS_COND, two_h, outcomes, probs,
               fisher, status)
        ok = status == -1
        if np.any(status == -2):
            raise ContractError("outcome probability fell below -1e-9 during sampling")
        good = fisher[ok]
        return good.sum(axis=0), (good * good).sum(axis=0), int(ok.sum())

    parts = _map_chunks(chunk, mu_max, threads)
    sum_f = np.zeros(n_seq)
    sum_sq = np.zeros(n_seq)
    comp_f = np.zeros(n_seq)
    comp_sq = np.zeros(n_seq)
    completed = 0
    for part_f, part_sq, part_ok in parts:
        kahan_add(sum_f, comp_f, part_f)
        kahan_add(sum_sq, comp_sq, part_sq)
        completed += part_ok
    return sum_f, sum_sq, completed, mu_max - completed


# ---------------------------------------------------------------------------
# exact enumeration of the outcome tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryTree:
    """Per-depth aggregates of the full outcome tree (index = depth).

    direct[d]    sum over surviving depth-d histories of P (dlnP)^2
    delta_rec[d] sum over depth-(d-1) histories of P * f(next measurement)
    cross[d]     the chain-rule cross term, analytically zero
    mass[d]      surviving probability mass; mass + deficit = 1
    deficit[d]   cumulative pruned mass up to depth d
    branches     per-depth list of (history, P, P_plus, P_minus), only kept
                 when enumerate_tree(..., store_branches=True)
    """

    lam: float
    h: float
    n_max: int
    eps_prune: float
    branch_count: np.ndarray
    mass: np.ndarray
    deficit: np.ndarray
    direct: np.ndarray
    delta_rec: np.ndarray
    cross: np.ndarray
    degenerate: int
    branches: list = field(default=None, repr=False)


def enumerate_tree(model, scheme=None, lam=None, h=None, n_max=1,
                   eps_prune=DEFAULT_EPS_PRUNE, branch_cap=DEFAULT_BRANCH_CAP,
                   store_branches=False, reset=False):
    """Breadth-complete expansion of all outcome histories to depth n_max.

    Branches whose joint center probability drops below eps_prune are
    dropped with their mass reported in `deficit`.
    """
    protocol = as_protocol(model, scheme, lam, h, reset)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if eps_prune < 0:
        raise ValueError("eps_prune must be >= 0")
    pure = protocol.path == "pure"
    (branch_count, mass, pruned, direct, delta_rec, cross, degen,
     flag) = kernels.tree_walk(protocol.ops, protocol.group, protocol.n_out,
                               protocol.init, protocol.reset, pure, n_max,
                               eps_prune, EPS_COND, 2.0 * protocol.h,
                               branch_cap)
    if flag == 1:
        raise BranchCapExceeded(
            f"more than {branch_cap} surviving branches; reduce n_max, raise "
            f"eps_prune, or use Monte-Carlo sampling"
        )
    branches = _enumerate_branches(protocol, n_max, eps_prune, branch_cap) \
        if store_branches else None
    return TrajectoryTree(
        lam=protocol.lam, h=protocol.h, n_max=n_max, eps_prune=eps_prune,
        branch_count=branch_count, mass=mass, deficit=np.cumsum(pruned),
        direct=direct, delta_rec=delta_rec, cross=cross,
        degenerate=int(degen.sum()), branches=branches,
    )


def _enumerate_branches(protocol, n_max, eps_prune, branch_cap):
    """Plain recursive enumeration retaining per-branch joint probabilities.
    Meant for small trees (tests, sampler cross-checks)."""
    pure = protocol.path == "pure"
    dim = protocol.group.shape[0]
    levels = [[] for _ in range(n_max + 1)]
    levels[0].append(((), 1.0, 1.0, 1.0))

    def collapse(vec, g, p):
        if pure:
            out = np.where(protocol.group == g, vec, 0.0)
            return out / np.sqrt(p)
        rho = vec.reshape(dim, dim)
        keep = protocol.group == g
        out = np.where(np.outer(keep, keep), rho, 0.0)
        return (out / p).reshape(-1)

    def outcome_probs(vec):
        if pure:
            dens = vec.real ** 2 + vec.imag ** 2
        else:
            dens = np.clip(vec.reshape(dim, dim).diagonal().real, 0.0, None)
        return np.bincount(protocol.group, weights=dens, minlength=protocol.n_out)

    def walk(states, joints, history, depth):
        if depth == n_max:
            return
        probs = np.stack([outcome_probs(protocol.ops[r] @ states[r]) for r in range(3)])
        evolved = [protocol.ops[r] @ states[r] for r in range(3)]
        for g in range(protocol.n_out):
            pc, pp, pm = probs[:, g]
            if pc < EPS_COND or pp < EPS_COND or pm < EPS_COND:
                continue
            joint = (joints[0] * pc, joints[1] * pp, joints[2] * pm)
            if joint[0] < eps_prune:
                continue
            if sum(len(level) for level in levels) > branch_cap:
                raise BranchCapExceeded("branch detail storage exceeded the cap")
            levels[depth + 1].append((history + (g,),) + joint)
            if protocol.reset:
                child = [protocol.init.copy() for _ in range(3)]
            else:
                child = [collapse(evolved[r], g, probs[r, g]) for r in range(3)]
            walk(child, joint, history + (g,), depth + 1)

    walk([protocol.init.copy() for _ in range(3)], (1.0, 1.0, 1.0), (), 0)
    return levels


# ---------------------------------------------------------------------------
# paired trajectories and accumulated operators
# ---------------------------------------------------------------------------

def paired_trajectory(model, scheme, state_a, state_b, n_seq, seed, lam=None):
    """Per-step fidelity of two states driven through one shared trajectory.

    Outcomes are sampled from state_a's conditional distribution; the same
    projector collapses both states, each renormalized by its own
    probability. Returns (fidelities, excluded_at).
    """
    protocol = as_protocol(model, scheme, lam)
    if protocol.path != "pure":
        raise ValueError("paired trajectories are defined for pure-state channels")
    a = np.atleast_2d(protocol.state_to_frame(_as_vector(state_a)))
    b = np.atleast_2d(protocol.state_to_frame(_as_vector(state_b)))
    uniforms = kernels.trajectory_uniforms(seed, 0, 1, n_seq)
    fid = np.zeros((1, n_seq))
    outcomes = np.empty((1, n_seq), dtype=np.int64)
    excluded = np.empty(1, dtype=np.int64)
    kernels.paired_chunk(protocol.ops[0], protocol.group, protocol.n_out,
                         np.ascontiguousarray(a), np.ascontiguousarray(b),
                         uniforms, EPS_COND, fid, outcomes, excluded)
    return fid[0], int(excluded[0])


def paired_batch(protocol, init_a, init_b, n_seq, base_seed, threads=None):
    """Batched paired-trajectory run; initial states are rotated-frame rows."""
    threads = resolve_threads(threads)
    n_traj = init_a.shape[0]

    def chunk(start, count):
        uniforms = kernels.trajectory_uniforms(base_seed, start, count, n_seq)
        fid = np.zeros((count, n_seq))
        outcomes = np.empty((count, n_seq), dtype=np.int64)
        excluded = np.empty(count, dtype=np.int64)
        kernels.paired_chunk(protocol.ops[0], protocol.group, protocol.n_out,
                             np.ascontiguousarray(init_a[start:start + count]),
                             np.ascontiguousarray(init_b[start:start + count]),
                             uniforms, EPS_COND, fid, outcomes, excluded)
        return fid, outcomes, excluded

    parts = _map_chunks(chunk, n_traj, threads)
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]))


def forced_pair_fidelities(model, scheme, state_a, state_b, outcomes, lam=None):
    """Fidelity sequence for a forced outcome string (no sampling); raises
    if either state loses all weight on a forced outcome."""
    protocol = as_protocol(model, scheme, lam)
    a = protocol.state_to_frame(_as_vector(state_a))
    b = protocol.state_to_frame(_as_vector(state_b))
    fids = []
    for g in outcomes:
        a = protocol.ops[0] @ a
        b = protocol.ops[0] @ b
        mask = protocol.group == g
        pa = float(np.sum(np.abs(a[mask]) ** 2))
        pb = float(np.sum(np.abs(b[mask]) ** 2))
        if pa < EPS_COND or pb < EPS_COND:
            raise TrajectoryAborted("forced outcome has vanishing probability")
        a = np.where(mask, a, 0.0) / np.sqrt(pa)
        b = np.where(mask, b, 0.0) / np.sqrt(pb)
        fids.append(float(abs(np.vdot(a, b)) ** 2))
    return np.array(fids)


def accumulate_operator(model, scheme, outcome_sequence, lam=None):
    """Left product of (projector @ step-operator) factors for one outcome
    string, Frobenius-renormalized after each factor.

    Returns (normalized product matrix in the original frame, per-step
    singular-value ratios s2/s1).
    """
    from .linalg import singular_ratio

    protocol = as_protocol(model, scheme, lam)
    if protocol.path != "pure":
        raise ValueError("operator accumulation applies to unitary channels")
    if protocol.scheme is None:
        projectors = [np.diag((protocol.group == g).astype(complex))
                      for g in range(protocol.n_out)]
        op = protocol.ops[0]
    else:
        projectors = embedded_projectors(protocol.scheme, protocol.layout)
        rot = protocol.rotation
        op = rot.conj().T @ protocol.ops[0] @ rot
    prod = np.eye(protocol.dim, dtype=complex)
    ratios = []
    for g in outcome_sequence:
        prod = projectors[int(g)] @ op @ prod
        norm = np.linalg.norm(prod)
        if norm == 0.0:
            raise ContractError("accumulated operator vanished (zero-probability outcome)")
        prod = prod / norm
        ratios.append(singular_ratio(prod))
    return prod, np.array(ratios)


def accumulate_batch(protocol, outcomes, threads=None):
    """Batched singular-ratio series for many outcome strings (rotated frame)."""
    threads = resolve_threads(threads)
    n_traj, n_seq = outcomes.shape

    def chunk(start, count):
        ratios = np.zeros((count, n_seq))
        kernels.accum_ratio_chunk(protocol.ops[0], protocol.group,
                                  protocol.n_out,
                                  np.ascontiguousarray(outcomes[start:start + count]),
                                  ratios)
        return ratios

    return np.concatenate(_map_chunks(chunk, n_traj, threads))


def _as_vector(state):
    if isinstance(state, ProbeState):
        if state.kind != "pure":
            raise ValueError("expected a pure state")
        return state.data
    return np.asarray(state, dtype=complex)
