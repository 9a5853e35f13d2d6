"""Hot inner loops: trajectory sampling and exact outcome-tree traversal.

Every kernel is written as a plain Python/numpy function and compiled with
numba when available. Setting SEQFISHER_NO_NUMBA=1 (or a failed numba
import) selects the uncompiled fallback; results are identical, only slower.
The uncompiled originals stay reachable as `py_<name>` for the benchmark.

Kernels run single-threaded and consume pre-drawn uniforms, so outputs are
bit-reproducible regardless of caller-side threading.

State conventions:
  pure  - complex vector of length dim, evolved by a dim x dim operator
  mixed - row-major vec(rho) of length dim^2, evolved by a dim^2 x dim^2
          superoperator; outcome probabilities read Re(rho_ii)

`group` maps each computational-basis index of the measured frame to its
outcome label; operators are pre-rotated so projectors are diagonal.

Trajectory status codes: -1 completed, n >= 0 aborted at step n (a side
replica's probability for the sampled outcome fell below eps_cond),
-2 numerical contract violation (probability below -1e-9).
"""

import math
import os

import numpy as np

NUMBA_ENV_FLAG = "SEQFISHER_NO_NUMBA"

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_NEG_PROB_TOL = -1e-9


def numba_disabled_by_env():
    return os.environ.get(NUMBA_ENV_FLAG, "").strip().lower() in ("1", "true", "yes")


def splitmix64(seeds):
    """Vectorized splitmix64 finalizer on uint64 input, returns uint64."""
    z = (np.asarray(seeds, dtype=np.uint64) + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def trajectory_uniforms(base_seed, start_index, count, n_steps):
    """Uniforms in [0,1) for trajectories [start_index, start_index+count).

    Stream seed per trajectory is splitmix64(base_seed XOR index); each step
    advances the splitmix64 counter once. Pure function of the global
    trajectory index, so chunking and threading cannot change the draws.
    """
    idx = np.arange(start_index, start_index + count, dtype=np.uint64)
    stream = splitmix64(np.uint64(base_seed & MASK64) ^ idx)
    out = np.empty((count, n_steps), dtype=np.float64)
    state = stream.copy()
    for n in range(n_steps):
        state = state + np.uint64(_GOLDEN)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        out[:, n] = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out


def mix64(value):
    """Scalar splitmix64 finalizer for deriving sub-seeds."""
    return int(splitmix64(np.uint64(value & MASK64)))


# ---------------------------------------------------------------------------
# trajectory sampling
# ---------------------------------------------------------------------------

def _traj_chunk_pure(ops, group, n_out, init, reset, uniforms, eps_cond, two_h,
                     outcomes, probs, fisher, status):
    n_traj, n_seq = uniforms.shape
    dim = init.shape[0]
    state = np.empty((3, dim), dtype=np.complex128)
    p = np.empty((3, n_out), dtype=np.float64)
    for t in range(n_traj):
        for r in range(3):
            state[r] = init
        status[t] = -1
        for n in range(n_seq):
            for r in range(3):
                ev = np.dot(ops[r], state[r])
                state[r] = ev
                for g in range(n_out):
                    p[r, g] = 0.0
                for i in range(dim):
                    a = ev[i]
                    p[r, group[i]] += a.real * a.real + a.imag * a.imag
            f = 0.0
            for g in range(n_out):
                pc = p[0, g]
                if pc >= eps_cond:
                    d = (p[1, g] - p[2, g]) / two_h
                    f += d * d / pc
            fisher[t, n] = f
            total = 0.0
            for g in range(n_out):
                total += p[0, g]
            u = uniforms[t, n] * total
            sel = n_out - 1
            acc = 0.0
            for g in range(n_out):
                acc += p[0, g]
                if u < acc:
                    sel = g
                    break
            outcomes[t, n] = sel
            for r in range(3):
                probs[t, n, r] = p[r, sel]
            if p[0, sel] <= 0.0:
                status[t] = -2
                break
            if p[1, sel] < eps_cond or p[2, sel] < eps_cond:
                status[t] = n
                break
            for r in range(3):
                inv = 1.0 / math.sqrt(p[r, sel])
                for i in range(dim):
                    if group[i] == sel:
                        state[r, i] = state[r, i] * inv
                    else:
                        state[r, i] = 0.0
                if reset:
                    state[r] = init


def _traj_chunk_mixed(ops, group, n_out, init, reset, uniforms, eps_cond, two_h,
                      outcomes, probs, fisher, status):
    n_traj, n_seq = uniforms.shape
    dim = group.shape[0]
    length = init.shape[0]  # dim * dim
    state = np.empty((3, length), dtype=np.complex128)
    p = np.empty((3, n_out), dtype=np.float64)
    for t in range(n_traj):
        for r in range(3):
            state[r] = init
        status[t] = -1
        for n in range(n_seq):
            bad = False
            for r in range(3):
                ev = np.dot(ops[r], state[r])
                state[r] = ev
                for g in range(n_out):
                    p[r, g] = 0.0
                for i in range(dim):
                    p[r, group[i]] += ev[i * dim + i].real
                for g in range(n_out):
                    if p[r, g] < 0.0:
                        if p[r, g] < _NEG_PROB_TOL:
                            bad = True
                        p[r, g] = 0.0
            if bad:
                status[t] = -2
                break
            f = 0.0
            for g in range(n_out):
                pc = p[0, g]
                if pc >= eps_cond:
                    d = (p[1, g] - p[2, g]) / two_h
                    f += d * d / pc
            fisher[t, n] = f
            total = 0.0
            for g in range(n_out):
                total += p[0, g]
            u = uniforms[t, n] * total
            sel = n_out - 1
            acc = 0.0
            for g in range(n_out):
                acc += p[0, g]
                if u < acc:
                    sel = g
                    break
            outcomes[t, n] = sel
            for r in range(3):
                probs[t, n, r] = p[r, sel]
            if p[0, sel] <= 0.0:
                status[t] = -2
                break
            if p[1, sel] < eps_cond or p[2, sel] < eps_cond:
                status[t] = n
                break
            for r in range(3):
                inv = 1.0 / p[r, sel]
                for i in range(dim):
                    keep_i = group[i] == sel
                    for j in range(dim):
                        if keep_i and group[j] == sel:
                            state[r, i * dim + j] = state[r, i * dim + j] * inv
                        else:
                            state[r, i * dim + j] = 0.0
                if reset:
                    state[r] = init


# ---------------------------------------------------------------------------
# exact outcome-tree traversal (depth-first, per-depth aggregates)
# ---------------------------------------------------------------------------

def _tree_walk(ops, group, n_out, init, reset, pure, n_max, eps_prune, eps_cond,
               two_h, branch_cap):
    """Shared DFS over the outcome tree for pure and mixed states.

    Returns per-depth arrays (index = depth, entry 0 is the root level):
    branch_count, mass, pruned_increment, direct, delta_rec, cross,
    degenerate_count, and a status flag (0 ok, 1 branch cap exceeded).
    """
    dim = group.shape[0]
    length = init.shape[0]
    branch_count = np.zeros(n_max + 1, dtype=np.int64)
    mass = np.zeros(n_max + 1, dtype=np.float64)
    pruned = np.zeros(n_max + 1, dtype=np.float64)
    direct = np.zeros(n_max + 1, dtype=np.float64)
    delta_rec = np.zeros(n_max + 1, dtype=np.float64)
    cross = np.zeros(n_max + 1, dtype=np.float64)
    degen = np.zeros(n_max + 1, dtype=np.int64)
    branch_count[0] = 1
    mass[0] = 1.0

    node_state = np.zeros((n_max + 1, 3, length), dtype=np.complex128)
    node_logp = np.zeros((n_max + 1, 3), dtype=np.float64)
    evolved = np.zeros((n_max + 1, 3, length), dtype=np.complex128)
    probs = np.zeros((n_max + 1, 3, n_out), dtype=np.float64)
    child_iter = np.zeros(n_max + 1, dtype=np.int64)

    for r in range(3):
        node_state[0, r] = init

    # expand a node: evolve all replicas, bin outcome probabilities, add the
    # conditional-information contribution of the next measurement
    depth = 0
    while True:
        for r in range(3):
            ev = np.dot(ops[r], node_state[depth, r])
            evolved[depth, r] = ev
            for g in range(n_out):
                probs[depth, r, g] = 0.0
            if pure:
                for i in range(dim):
                    a = ev[i]
                    probs[depth, r, group[i]] += a.real * a.real + a.imag * a.imag
            else:
                for i in range(dim):
                    probs[depth, r, group[i]] += ev[i * dim + i].real
                for g in range(n_out):
                    if probs[depth, r, g] < 0.0:
                        probs[depth, r, g] = 0.0
        f = 0.0
        for g in range(n_out):
            pc = probs[depth, 0, g]
            if pc >= eps_cond:
                d = (probs[depth, 1, g] - probs[depth, 2, g]) / two_h
                f += d * d / pc
        delta_rec[depth + 1] += math.exp(node_logp[depth, 0]) * f
        child_iter[depth] = 0

        # descend / iterate siblings / backtrack
        descend = False
        while True:
            if child_iter[depth] >= n_out:
                depth -= 1
                if depth < 0:
                    return (branch_count, mass, pruned, direct, delta_rec,
                            cross, degen, 0)
                continue
            g = child_iter[depth]
            child_iter[depth] += 1
            pc = probs[depth, 0, g]
            pp = probs[depth, 1, g]
            pm = probs[depth, 2, g]
            parent_pc = math.exp(node_logp[depth, 0])
            if pc < eps_cond:
                if pc > 0.0:
                    pruned[depth + 1] += parent_pc * pc
                continue
            if pp < eps_cond or pm < eps_cond:
                degen[depth + 1] += 1
                pruned[depth + 1] += parent_pc * pc
                continue
            lc = node_logp[depth, 0] + math.log(pc)
            lp = node_logp[depth, 1] + math.log(pp)
            lm = node_logp[depth, 2] + math.log(pm)
            joint_c = math.exp(lc)
            if joint_c < eps_prune:
                pruned[depth + 1] += joint_c
                continue
            branch_count[depth + 1] += 1
            if branch_count[depth + 1] > branch_cap:
                return (branch_count, mass, pruned, direct, delta_rec,
                        cross, degen, 1)
            mass[depth + 1] += joint_c
            dlnp_joint = (lp - lm) / two_h
            direct[depth + 1] += joint_c * dlnp_joint * dlnp_joint
            dlnp_cond = (math.log(pp) - math.log(pm)) / two_h
            dlnp_parent = (node_logp[depth, 1] - node_logp[depth, 2]) / two_h
            cross[depth + 1] += joint_c * dlnp_parent * dlnp_cond
            if depth + 1 < n_max:
                nd = depth + 1
                for r in range(3):
                    if reset:
                        node_state[nd, r] = init
                    else:
                        pr = probs[depth, r, g]
                        if pure:
                            inv = 1.0 / math.sqrt(pr)
                            for i in range(dim):
                                if group[i] == g:
                                    node_state[nd, r, i] = evolved[depth, r, i] * inv
                                else:
                                    node_state[nd, r, i] = 0.0
                        else:
                            inv = 1.0 / pr
                            for i in range(dim):
                                keep_i = group[i] == g
                                for j in range(dim):
                                    if keep_i and group[j] == g:
                                        node_state[nd, r, i * dim + j] = (
                                            evolved[depth, r, i * dim + j] * inv)
                                    else:
                                        node_state[nd, r, i * dim + j] = 0.0
                node_logp[nd, 0] = lc
                node_logp[nd, 1] = lp
                node_logp[nd, 2] = lm
                depth = nd
                descend = True
                break
        if not descend:
            # unreachable: the inner loop either descends or returns
            return (branch_count, mass, pruned, direct, delta_rec, cross, degen, 0)


# ---------------------------------------------------------------------------
# paired trajectories and operator accumulation
# ---------------------------------------------------------------------------

def _paired_chunk(op, group, n_out, init_a, init_b, uniforms, eps_cond,
                  fid, outcomes, excluded):
    n_traj, n_seq = uniforms.shape
    dim = init_a.shape[1]
    pa = np.empty(n_out, dtype=np.float64)
    pb = np.empty(n_out, dtype=np.float64)
    for t in range(n_traj):
        a = init_a[t].copy()
        b = init_b[t].copy()
        excluded[t] = -1
        for n in range(n_seq):
            a = np.dot(op, a)
            b = np.dot(op, b)
            for g in range(n_out):
                pa[g] = 0.0
                pb[g] = 0.0
            for i in range(dim):
                va = a[i]
                vb = b[i]
                pa[group[i]] += va.real * va.real + va.imag * va.imag
                pb[group[i]] += vb.real * vb.real + vb.imag * vb.imag
            total = 0.0
            for g in range(n_out):
                total += pa[g]
            u = uniforms[t, n] * total
            sel = n_out - 1
            acc = 0.0
            for g in range(n_out):
                acc += pa[g]
                if u < acc:
                    sel = g
                    break
            outcomes[t, n] = sel
            if pa[sel] <= 0.0 or pb[sel] < eps_cond:
                excluded[t] = n
                break
            inv_a = 1.0 / math.sqrt(pa[sel])
            inv_b = 1.0 / math.sqrt(pb[sel])
            overlap_re = 0.0
            overlap_im = 0.0
            for i in range(dim):
                if group[i] == sel:
                    a[i] = a[i] * inv_a
                    b[i] = b[i] * inv_b
                else:
                    a[i] = 0.0
                    b[i] = 0.0
                ar = a[i].real
                ai = a[i].imag
                br = b[i].real
                bi = b[i].imag
                overlap_re += ar * br + ai * bi
                overlap_im += ar * bi - ai * br
            fid[t, n] = overlap_re * overlap_re + overlap_im * overlap_im


def accum_ratio_chunk(op, group, n_out, outcomes, ratios):
    """Per-step s2/s1 of the running (projector @ op) product, batched.

    After each collapse only the rows in the selected outcome group survive,
    so the product is carried as its nonzero-row block; singular values are
    unchanged and LAPACK batches over trajectories. Stays plain numpy: the
    work is dense matmul and SVD, where BLAS/LAPACK already dominate.
    """
    n_traj, n_seq = outcomes.shape
    dim = op.shape[0]
    idx = [np.where(group == g)[0] for g in range(n_out)]
    width = {len(rows) for rows in idx}
    if len(width) != 1:
        raise ValueError("outcome groups must partition the basis evenly")
    d_red = width.pop()
    # op restricted to (new outcome rows) x (previous outcome rows)
    sub = np.empty((n_out, n_out, d_red, d_red), dtype=np.complex128)
    for g_new in range(n_out):
        for g_old in range(n_out):
            sub[g_new, g_old] = op[np.ix_(idx[g_new], idx[g_old])]
    first = np.stack([op[rows, :] for rows in idx])

    prod = first[outcomes[:, 0]]
    for n in range(n_seq):
        if n > 0:
            prod = sub[outcomes[:, n], outcomes[:, n - 1]] @ prod
        norms = np.sqrt(np.sum(prod.real ** 2 + prod.imag ** 2, axis=(1, 2)))
        if np.any(norms == 0.0):
            raise FloatingPointError("accumulated operator vanished")
        prod /= norms[:, None, None]
        if d_red == 1:
            ratios[:, n] = 0.0
        else:
            s = np.linalg.svd(prod, compute_uv=False)
            ratios[:, n] = s[:, 1] / s[:, 0]


NUMBA_ENABLED = False
if not numba_disabled_by_env():
    try:
        from numba import njit

        _jit = njit(cache=True, nogil=True)
        traj_chunk_pure = _jit(_traj_chunk_pure)
        traj_chunk_mixed = _jit(_traj_chunk_mixed)
        tree_walk = _jit(_tree_walk)
        paired_chunk = _jit(_paired_chunk)
        NUMBA_ENABLED = True
    except ImportError:
        pass

if not NUMBA_ENABLED:
    traj_chunk_pure = _traj_chunk_pure
    traj_chunk_mixed = _traj_chunk_mixed
    tree_walk = _tree_walk
    paired_chunk = _paired_chunk

# uncompiled originals, kept importable for benchmarks and equivalence tests
py_traj_chunk_pure = _traj_chunk_pure
py_traj_chunk_mixed = _traj_chunk_mixed
py_tree_walk = _tree_walk
py_paired_chunk = _paired_chunk
