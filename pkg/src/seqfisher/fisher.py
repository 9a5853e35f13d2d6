"""Fisher information of sequential measurement records.

Three routes to the same quantity:
  * exact summation over the full outcome tree (log-domain joint
    probabilities, derivative (ln P+ - ln P-)/2h),
  * the per-step recursion F(n) = F(n-1) + sum_histories P * f,
  * Monte-Carlo averaging of the per-step conditional information f along
    sampled trajectories.

Plus the resource analyses: information gain per measurement and the
fixed-time-budget comparison of sequence lengths.
"""

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import ContractError

ABORT_BUDGET = 1e-3  # hard ceiling on the excluded-trajectory fraction


@dataclass(frozen=True)
class FisherSeries:
    """Cumulative information F(n) with its per-step increments.

    The stored arrays satisfy cum[n] = cum[n-1] + delta[n] exactly.
    std_err is zero on the exact path; `recursive_delta` carries the
    recursion-route increments when the series came from a tree.
    """

    lam: float
    h: float
    delta: np.ndarray
    cum: np.ndarray
    std_err: np.ndarray
    mu_max: int = 0
    aborted: int = 0
    approximate: bool = False
    recursive_delta: np.ndarray = field(default=None, repr=False)

    @property
    def n_seq(self):
        return len(self.delta)

    def value(self, n):
        """F(n) with 1-based step index n."""
        return float(self.cum[n - 1])


def step_fisher_contribution(probs_center, probs_plus, probs_minus, h):
    """Information of one conditional outcome distribution.

    sum over outcomes of (dp)^2 / p with dp = (p_plus - p_minus)/(2h);
    outcomes with center probability below 1e-12 contribute nothing.
    """
    pc = np.asarray(probs_center, dtype=float)
    pp = np.asarray(probs_plus, dtype=float)
    pm = np.asarray(probs_minus, dtype=float)
    if pc.shape != pp.shape or pc.shape != pm.shape:
        raise ValueError("replica outcome sets must match")
    keep = pc >= 1e-12
    dp = (pp[keep] - pm[keep]) / (2.0 * h)
    return float(np.sum(dp * dp / pc[keep]))


def exact_fisher(tree):
    """FisherSeries from a fully enumerated outcome tree.

    cum[n] is the direct trajectory sum at depth n+1; the recursion-route
    increments ride along in `recursive_delta` for cross-checking. A pruned
    mass above 1e-6 flags the result approximate.
    """
    delta = np.diff(tree.direct)
    cum = np.cumsum(delta)  # re-accumulated so cum[n] - cum[n-1] == delta[n] exactly
    return FisherSeries(
        lam=tree.lam,
        h=tree.h,
        delta=delta,
        cum=cum,
        std_err=np.zeros_like(delta),
        mu_max=0,
        aborted=0,
        approximate=bool(tree.deficit[-1] > 1e-6),
        recursive_delta=tree.delta_rec[1:].copy(),
    )


@dataclass(frozen=True)
class RecursionReport:
    """Direct-vs-recursive comparison on one tree."""

    direct: np.ndarray          # F(n) from the joint-probability sum
    recursive: np.ndarray       # cumulative sum of the recursion increments
    cross: np.ndarray           # chain-rule cross terms, analytically zero
    max_deviation: float        # max relative |direct - recursive| / direct
    max_abs_deviation: float
    max_cross: float


def recursion_identity_check(tree):
    """Verify the information recursion and the cross-term cancellation."""
    direct = tree.direct[1:]
    recursive = np.cumsum(tree.delta_rec[1:])
    cross = tree.cross[1:]
    diff = np.abs(direct - recursive)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(direct > 0, diff / direct, diff)
    return RecursionReport(
        direct=direct,
        recursive=recursive,
        cross=cross,
        max_deviation=float(np.max(rel)),
        max_abs_deviation=float(np.max(diff)),
        max_cross=float(np.max(np.abs(cross))),
    )


def mc_fisher(model, scheme=None, lam=None, h=None, n_seq=1, mu_max=1,
              base_seed=0, threads=None, reset=False):
    """Monte-Carlo FisherSeries over mu_max sampled trajectories.

    Aborted trajectories (vanishing replica probability on the sampled
    outcome) are excluded and counted; more than 0.1% of them fails the run.
    """
    if mu_max < 1:
        raise ValueError("mu_max must be >= 1")
    protocol = engine.as_protocol(model, scheme, lam, h, reset)
    sum_f, sum_sq, completed, aborted = engine.mc_accumulate(
        protocol, n_seq=n_seq, mu_max=mu_max, base_seed=base_seed,
        threads=threads)
    if aborted > ABORT_BUDGET * mu_max:
        raise ContractError(
            f"{aborted} of {mu_max} trajectories aborted "
            f"(budget {ABORT_BUDGET:.1%}); the finite-difference step h may "
            f"be too large for this model"
        )
    if completed == 0:
        raise ContractError("no trajectory completed")
    delta = sum_f / completed
    if completed > 1:
        var = np.clip(sum_sq - sum_f * sum_f / completed, 0.0, None) / (completed - 1)
        std_err = np.sqrt(var / completed)
    else:
        std_err = np.zeros_like(delta)
    return FisherSeries(
        lam=protocol.lam,
        h=protocol.h,
        delta=delta,
        cum=np.cumsum(delta),
        std_err=std_err,
        mu_max=mu_max,
        aborted=aborted,
    )


@dataclass(frozen=True)
class GainReport:
    """Information per measurement and the 90%-saturation stop step."""

    gain: np.ndarray
    n_star: int
    n_ref: int
    threshold: float


def gain_analysis(series, n_ref=600, threshold=0.90):
    """Gain F(n)/n and the smallest n whose gain reaches
    threshold * gain(n_ref)."""
    if series.n_seq < n_ref:
        raise ValueError(f"series length {series.n_seq} shorter than n_ref {n_ref}")
    n = np.arange(1, series.n_seq + 1, dtype=float)
    gain = series.cum / n
    target = threshold * gain[n_ref - 1]
    hits = np.nonzero(gain >= target)[0]
    n_star = int(hits[0]) + 1 if hits.size else n_ref
    return GainReport(gain=gain, n_star=n_star, n_ref=n_ref, threshold=threshold)


@dataclass(frozen=True)
class TimeBudgetReport:
    """Uncertainty proxy 1/(M F) at fixed wall-clock budget.

    M(n) = T / (t_reset + n (t_meas + tau)) trajectories fit in the budget;
    the series is truncated at the largest n that still allows M >= 1.
    """

    total_time: float
    t_reset: float
    t_meas: float
    tau: float
    n: np.ndarray
    repetitions: np.ndarray
    inverse_fi: np.ndarray


def time_budget_analysis(series, total_time, t_reset, t_meas, tau):
    if total_time <= 0 or tau <= 0 or t_meas < 0 or t_reset < 0:
        raise ValueError("times must be positive (t_reset and t_meas may be zero)")
    n = np.arange(1, series.n_seq + 1, dtype=float)
    reps = total_time / (t_reset + n * (t_meas + tau))
    if reps[0] < 1.0:
        raise ValueError("total_time too small: fewer than one trajectory at n=1")
    keep = reps >= 1.0
    cum = series.cum[keep]
    with np.errstate(divide="ignore"):
        inverse = np.where(cum > 0, 1.0 / (reps[keep] * cum), np.inf)
    return TimeBudgetReport(
        total_time=float(total_time),
        t_reset=float(t_reset),
        t_meas=float(t_meas),
        tau=float(tau),
        n=n[keep].astype(int),
        repetitions=reps[keep],
        inverse_fi=inverse,
    )
