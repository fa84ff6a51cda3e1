"""Finite-population contest machinery.

Covers exact top-k winning probabilities, the undifferentiated finite
equilibrium policy, the two-agent closed-form equilibrium, iterated
best-response dynamics on discretized policies, and Monte-Carlo contest
simulation for empirical stability checks.

Random-number use is seedable and reproducible: simulation trial i draws
from a generator seeded with seed + i, so trials can run in any order or
in parallel without changing results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import binom

from . import _kernels
from .densities import DensitySpec, _as_uniform
from .equilibrium import ThresholdPolicy, uniform_closed_threshold
from .errors import (
    DomainBoundsError,
    SpecValidationError,
    UnsupportedConfigurationError,
)

__all__ = [
    "FiniteContest",
    "GridPolicy",
    "DynamicsHyper",
    "DynamicsTrace",
    "SimulationReport",
    "top_k_prob",
    "undiff_finite_policy",
    "two_agent_policies",
    "two_agent_revenue",
    "two_agent_mc_revenue",
    "win_prob_two_group",
    "run_dynamics",
    "simulate_contest",
]


@dataclass(frozen=True)
class FiniteContest:
    """A two-group contest instance with n1 + n2 agents and k spots."""

    n1: int
    n2: int
    k: int
    p1: DensitySpec
    p2: DensitySpec
    seed: int = 0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise SpecValidationError("FiniteContest: group sizes must be >= 1")
        if not (1 <= self.k <= self.n1 + self.n2):
            raise SpecValidationError("FiniteContest: requires 1 <= k <= n1 + n2")
        if self.seed < 0:
            raise SpecValidationError("FiniteContest: seed must be unsigned")


@dataclass(frozen=True)
class GridPolicy:
    """Monotone effort policy sampled on a sorted valuation grid.

    Evaluation interpolates piecewise-linearly and extends the end values
    beyond the grid.
    """

    valuation_grid: np.ndarray
    efforts: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.valuation_grid, dtype=np.float64)
        eff = np.asarray(self.efforts, dtype=np.float64)
        object.__setattr__(self, "valuation_grid", grid)
        object.__setattr__(self, "efforts", eff)
        if grid.ndim != 1 or grid.size != eff.size:
            raise SpecValidationError("GridPolicy: grid and efforts must align")
        if np.any(np.diff(grid) <= 0):
            raise SpecValidationError("GridPolicy: valuation grid must be increasing")
        if np.any(eff < 0) or np.any(np.diff(eff) < 0):
            raise SpecValidationError("GridPolicy: efforts must be nonnegative and monotone")

    def __call__(self, v):
        return np.interp(v, self.valuation_grid, self.efforts)


@dataclass(frozen=True)
class DynamicsHyper:
    """Best-response dynamics hyperparameters.

    The default step 1/10 is the largest blend weight at which the
    updates stabilize within the default iteration budget; a step scaled
    down by the iteration count moves the policies at most ~10% of the
    way from their initialization, which never stabilizes and cannot
    exhibit the small-population effort reversal.
    """

    m_v: int = 101
    m_e: int = 101
    iterations: int = 500
    step: float = 0.1

    def step_size(self) -> float:
        return self.step


@dataclass(frozen=True)
class DynamicsTrace:
    """Per-iteration policies of both groups and their update magnitudes."""

    grid1: np.ndarray
    grid2: np.ndarray
    policies1: np.ndarray  # (iterations + 1, m_v), row 0 = initialization
    policies2: np.ndarray
    deltas1: np.ndarray  # (iterations,), mean |best response - policy|
    deltas2: np.ndarray
    threshold: float

    def final_policies(self) -> tuple[GridPolicy, GridPolicy]:
        return (
            GridPolicy(self.grid1, self.policies1[-1]),
            GridPolicy(self.grid2, self.policies2[-1]),
        )

    def deltas_csv(self) -> str:
        lines = ["iter,group,delta"]
        for i in range(len(self.deltas1)):
            lines.append(f"{i + 1},1,{self.deltas1[i]:.12g}")
            lines.append(f"{i + 1},2,{self.deltas2[i]:.12g}")
        return "\n".join(lines) + "\n"

    def final_policies_csv(self) -> str:
        p1, p2 = self.final_policies()
        grid = np.unique(np.concatenate([self.grid1, self.grid2]))
        lines = ["v,effort_g1,effort_g2"]
        for v in grid:
            e1 = f"{float(p1(v)):.12g}" if self.grid1[0] <= v <= self.grid1[-1] else ""
            e2 = f"{float(p2(v)):.12g}" if self.grid2[0] <= v <= self.grid2[-1] else ""
            lines.append(f"{v:.12g},{e1},{e2}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Exact finite-population quantities
# ---------------------------------------------------------------------------


def top_k_prob(n: int, k: int, p: DensitySpec, v: float) -> float:
    """Probability that a draw at v ranks among the top k of n i.i.d. draws.

    Binomial tail in the CDF value: at least n-k of the n-1 opponents must
    fall below v.
    """
    if not (1 <= k <= n):
        raise DomainBoundsError(f"need 1 <= k <= n, got k={k}, n={n}")
    fv = p.cdf(v)
    return float(binom.sf(n - k - 1, n - 1, fv))


def undiff_finite_policy(n: int, k: int, p: DensitySpec, v: float) -> float:
    """Equilibrium effort in the single-density n-agent contest.

    s(v) = Q(v) * v - integral of Q from the support infimum to v, with Q
    the top-k rank probability; nonnegative, monotone, and below v.
    """
    if not (1 <= k <= n):
        raise DomainBoundsError(f"need 1 <= k <= n, got k={k}, n={n}")
    lo, _ = p.support()
    if v <= lo:
        return 0.0
    q_v = top_k_prob(n, k, p, v)
    tail, _ = integrate.quad(
        lambda x: top_k_prob(n, k, p, x), lo, v, epsabs=1e-11, limit=200
    )
    return max(q_v * v - tail, 0.0)


def two_agent_policies(rho: float, v: float) -> tuple[float, float | None]:
    """Closed-form equilibrium efforts in the two-agent, one-spot contest
    with uniform valuations on [0,1] and [0,rho].

    Returns (effort of agent 1 at v, effort of agent 2 at v); the second
    entry is None when v exceeds agent 2's support.
    """
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    if not (0.0 <= v <= 1.0):
        raise DomainBoundsError(f"valuation {v} outside [0, 1]")
    e1 = rho / (rho + 1.0) * v ** (rho + 1.0)
    if v <= rho:
        e2 = rho ** (-1.0 / rho) / (rho + 1.0) * v ** (1.0 + 1.0 / rho)
    else:
        e2 = None
    return e1, e2


def two_agent_revenue(rho: float) -> float:
    """Expected top merit in the two-agent contest: rho / (2 (rho + 1))."""
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    return rho / (2.0 * (rho + 1.0))


def two_agent_mc_revenue(rho: float, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate (mean, standard error) of the two-agent revenue."""
    if trials < 1:
        raise DomainBoundsError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    v1 = rng.uniform(0.0, 1.0, trials)
    v2 = rng.uniform(0.0, rho, trials)
    e1 = rho / (rho + 1.0) * v1 ** (rho + 1.0)
    e2 = rho ** (-1.0 / rho) / (rho + 1.0) * v2 ** (1.0 + 1.0 / rho)
    rev = np.maximum(e1, e2)
    return float(rev.mean()), float(rev.std(ddof=1) / math.sqrt(trials))


def win_prob_two_group(
    effort_rank_probs: tuple[float, float],
    n1: int,
    n2: int,
    k: int,
    perspective: int,
) -> float:
    """Probability that fewer than k opponents beat a candidate.

    Opponents from group 1 and 2 beat independently with the given tail
    probabilities; the candidate's own group contributes one opponent
    fewer.
    """
    p1_tail, p2_tail = effort_rank_probs
    for tail in (p1_tail, p2_tail):
        if not (0.0 <= tail <= 1.0):
            raise DomainBoundsError(f"tail probability {tail} outside [0, 1]")
    if n1 < 1 or n2 < 1 or k < 1 or k > n1 + n2:
        raise DomainBoundsError("need n1, n2 >= 1 and 1 <= k <= n1 + n2")
    if perspective == 0:
        out = _kernels.win_prob_batch(n1 - 1, [p1_tail], n2, [p2_tail], k)
    elif perspective == 1:
        out = _kernels.win_prob_batch(n2 - 1, [p2_tail], n1, [p1_tail], k)
    else:
        raise DomainBoundsError(f"perspective {perspective} must be 0 or 1")
    return float(out[0, 0])


# ---------------------------------------------------------------------------
# Best-response dynamics (uniform / rho-biased case)
# ---------------------------------------------------------------------------


def _scan_best_responses(
    efforts: np.ndarray, win: np.ndarray, col: np.ndarray, grid: np.ndarray
) -> np.ndarray:
    """Monotone best-response scan.

    For each valuation (in increasing order) pick the effort maximizing
    win * v - e among candidates at or above the previous choice; ties
    keep the earliest (cheapest) candidate.
    """
    out = np.empty(grid.size)
    last_idx = 0
    for i, v in enumerate(grid):
        pay = win[i, col[last_idx:]] * v - efforts[last_idx:]
        j = int(np.argmax(pay))
        last_idx += j
        out[i] = efforts[last_idx]
    return out


def _tail_at(
    efforts: np.ndarray, policy: np.ndarray, tail_values: np.ndarray
) -> np.ndarray:
    """Tail mass of opponents whose prescribed effort matches or beats each
    candidate effort; zero when nobody does."""
    idx = np.searchsorted(policy, efforts, side="left")
    tails = np.zeros(efforts.size)
    inside = idx < policy.size
    tails[inside] = tail_values[idx[inside]]
    return tails


def run_dynamics(
    contest: FiniteContest,
    rho: float,
    c: float,
    hyper: DynamicsHyper | None = None,
) -> DynamicsTrace:
    """Iterated smoothed best responses for the uniform / rho-biased pair.

    Both policies start from a sigmoid smoothing of the infinite-population
    step at the closed-form threshold.  Each iteration rebuilds the shared
    effort set from the current policies, updates group 1 against group
    2's previous policy, then group 2 against group 1's fresh one; updates
    blend toward the best response with the configured step size.
    """
    hyper = hyper or DynamicsHyper()
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    if not (0.0 < c < 1.0):
        raise DomainBoundsError(f"selection fraction {c} outside (0, 1)")
    if _as_uniform(contest.p1) != (0.0, 1.0):
        raise UnsupportedConfigurationError(
            "dynamics require group 1 valuations uniform on [0, 1]"
        )
    u2 = _as_uniform(contest.p2)
    if u2 is None or abs(u2[0]) > 1e-12 or abs(u2[1] - rho) > 1e-12:
        raise UnsupportedConfigurationError(
            "dynamics require group 2 valuations uniform on [0, rho]"
        )
    n1, n2, k = contest.n1, contest.n2, contest.k
    if k != math.floor(c * (n1 + n2)):
        raise UnsupportedConfigurationError(
            f"k={k} inconsistent with c={c} and n={n1 + n2}"
        )
    alpha = n2 / (n1 + n2)
    t_star = uniform_closed_threshold(rho, c, alpha)
    step = hyper.step_size()

    grid1 = np.linspace(0.0, 1.0, hyper.m_v)
    grid2 = np.linspace(0.0, rho, hyper.m_v)
    base_efforts = np.linspace(0.0, 1.0, hyper.m_e)
    s1 = t_star / (1.0 + np.exp(-50.0 * (grid1 - t_star)))
    s2 = t_star / (1.0 + np.exp(-50.0 * (grid2 - t_star)))

    own_tail1 = 1.0 - grid1
    own_tail2 = (rho - grid2) / rho
    hist1 = [s1.copy()]
    hist2 = [s2.copy()]
    deltas1 = np.empty(hyper.iterations)
    deltas2 = np.empty(hyper.iterations)

    for it in range(hyper.iterations):
        efforts = np.unique(np.concatenate([base_efforts, s1, s2]))

        tails2 = _tail_at(efforts, s2, own_tail2)
        vals2, col2 = np.unique(tails2, return_inverse=True)
        win1 = _kernels.win_prob_batch(n1 - 1, own_tail1, n2, vals2, k)
        br1 = _scan_best_responses(efforts, win1, col2, grid1)
        deltas1[it] = np.abs(br1 - s1).sum() / hyper.m_v
        # maximum.accumulate guards the monotone invariant against 1-ulp
        # rounding in the convex blend.
        s1 = np.maximum.accumulate(s1 + step * (br1 - s1))

        tails1 = _tail_at(efforts, s1, own_tail1)
        vals1, col1 = np.unique(tails1, return_inverse=True)
        win2 = _kernels.win_prob_batch(n2 - 1, own_tail2, n1, vals1, k)
        br2 = _scan_best_responses(efforts, win2, col1, grid2)
        deltas2[it] = np.abs(br2 - s2).sum() / hyper.m_v
        s2 = np.maximum.accumulate(s2 + step * (br2 - s2))

        hist1.append(s1.copy())
        hist2.append(s2.copy())

    return DynamicsTrace(
        grid1=grid1,
        grid2=grid2,
        policies1=np.array(hist1),
        policies2=np.array(hist2),
        deltas1=deltas1,
        deltas2=deltas2,
        threshold=t_star,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo contest simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationReport:
    """Empirical contest outcomes with standard errors.

    Ratio metrics follow the ratio-of-means convention (min of the two
    group rates' means) so simulated values share the definition of the
    closed-form metrics.  max_regret_estimate is the largest mean gain of
    any constant-effort deviation over following the policy, measured for
    a probe agent in each group with its type redrawn every trial.
    """

    trials: int
    rep_ratio: float
    rep_ratio_se: float
    welfare_ratio: float
    welfare_ratio_se: float
    avg_revenue: float
    avg_revenue_se: float
    selection_counts: tuple[int, int]
    max_regret_estimate: float
    max_regret_se: float
    deviation_grid: np.ndarray
    deviation_win_prob: np.ndarray  # (2, grid) per probe group
    deviation_win_prob_se: np.ndarray
    below_threshold_win_prob: float | None
    below_threshold_win_prob_se: float | None

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "rep_ratio": self.rep_ratio,
            "rep_ratio_se": self.rep_ratio_se,
            "welfare_ratio": self.welfare_ratio,
            "welfare_ratio_se": self.welfare_ratio_se,
            "avg_revenue": self.avg_revenue,
            "avg_revenue_se": self.avg_revenue_se,
            "selection_counts": list(self.selection_counts),
            "max_regret_estimate": self.max_regret_estimate,
            "max_regret_se": self.max_regret_se,
            "below_threshold_win_prob": self.below_threshold_win_prob,
            "below_threshold_win_prob_se": self.below_threshold_win_prob_se,
        }


def _policy_efforts(policies, group: int, v: np.ndarray) -> np.ndarray:
    if isinstance(policies, ThresholdPolicy):
        theta = policies.per_group_thresholds[group]
        cut = policies.delta_n if policies.delta_n is not None else theta
        return np.where(v >= cut, theta, 0.0)
    return np.asarray(policies[group](v), dtype=np.float64)


def _ratio_of_means(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """min(mean a / mean b, mean b / mean a) with a delta-method SE."""
    ma, mb = a.mean(), b.mean()
    if ma <= 0 or mb <= 0:
        return 0.0, 0.0
    num, den = (ma, mb) if ma <= mb else (mb, ma)
    x, y = (a, b) if ma <= mb else (b, a)
    n = a.size
    cov = np.cov(x, y, ddof=1) / n
    ratio = num / den
    var = (
        cov[0, 0] / den**2
        + num**2 * cov[1, 1] / den**4
        - 2.0 * num * cov[0, 1] / den**3
    )
    return float(ratio), float(math.sqrt(max(var, 0.0)))


def simulate_contest(contest: FiniteContest, policies, trials: int) -> SimulationReport:
    """Simulate repeated contests under fixed policies.

    Per trial: draw every valuation, apply the policies, select the top k
    scores with ties broken uniformly at random, and record group-level
    outcomes.  A probe agent per group is additionally evaluated against a
    100-point constant-effort deviation grid (selection chances for
    deviations use the exact tie-break probability given the realized
    field, which estimates the same mean at lower variance).
    """
    if trials < 1:
        raise DomainBoundsError("trials must be >= 1")
    n1, n2, k = contest.n1, contest.n2, contest.k
    n = n1 + n2

    sup1 = contest.p1.support()[1]
    sup2 = contest.p2.support()[1]
    hull_sup = max(sup1, sup2)
    if math.isinf(hull_sup):
        hull_sup = max(contest.p1.inverse_cdf(0.999), contest.p2.inverse_cdf(0.999))
    t_ref = policies.t if isinstance(policies, ThresholdPolicy) else None
    grid_hi = hull_sup if t_ref is None else max(hull_sup, 1.25 * t_ref)
    dev_grid = np.linspace(0.0, grid_hi, 100)

    rate1 = np.empty(trials)
    rate2 = np.empty(trials)
    welf1 = np.empty(trials)
    welf2 = np.empty(trials)
    revenue = np.empty(trials)
    dev_minus_eq = np.empty((trials, 2, dev_grid.size))
    dev_win = np.empty((trials, 2, dev_grid.size))
    counts = [0, 0]

    for trial in range(trials):
        rng = np.random.default_rng(contest.seed + trial)
        v1 = contest.p1.sample(rng, n1)
        v2 = contest.p2.sample(rng, n2)
        e1 = _policy_efforts(policies, 0, v1)
        e2 = _policy_efforts(policies, 1, v2)
        scores = np.concatenate([e1, e2])

        # Top-k selection, uniform random tie-breaking via a random key.
        order = np.lexsort((rng.random(n), scores))
        selected = np.zeros(n, dtype=bool)
        selected[order[n - k:]] = True
        sel1 = int(selected[:n1].sum())
        sel2 = int(selected[n1:].sum())
        counts[0] += sel1
        counts[1] += sel2
        rate1[trial] = sel1 / n1
        rate2[trial] = sel2 / n2
        welf1[trial] = (np.where(selected[:n1], v1, 0.0) - e1).mean()
        welf2[trial] = (np.where(selected[n1:], v2, 0.0) - e2).mean()
        revenue[trial] = scores[selected].mean()

        # Probe agents: member 0 of each group, counterfactually deviating.
        sorted_scores = np.sort(scores)
        for g, (probe_idx, v_probe, e_probe) in enumerate(
            ((0, v1[0], e1[0]), (n1, v2[0], e2[0]))
        ):
            own = scores[probe_idx]

            def sel_prob(x: np.ndarray) -> np.ndarray:
                right = np.searchsorted(sorted_scores, x, side="right")
                left = np.searchsorted(sorted_scores, x, side="left")
                above = n - right - (own > x)
                ties = right - left - (own == x)
                slots = k - above
                with np.errstate(invalid="ignore", divide="ignore"):
                    p = np.where(
                        slots <= 0, 0.0, np.minimum(1.0, slots / (ties + 1.0))
                    )
                return p

            p_dev = sel_prob(dev_grid)
            p_eq = sel_prob(np.array([own]))[0]
            eq_pay = p_eq * v_probe - e_probe
            dev_minus_eq[trial, g] = p_dev * v_probe - dev_grid - eq_pay
            dev_win[trial, g] = p_dev

    rep_ratio, rep_se = _ratio_of_means(rate1, rate2)
    wel_ratio, wel_se = _ratio_of_means(welf1, welf2)

    regret_mean = dev_minus_eq.mean(axis=0)  # (2, grid)
    flat = int(np.argmax(regret_mean))
    g_star, e_star = np.unravel_index(flat, regret_mean.shape)
    max_regret = float(regret_mean[g_star, e_star])
    max_regret_se = float(
        dev_minus_eq[:, g_star, e_star].std(ddof=1) / math.sqrt(trials)
    )

    win_mean = dev_win.mean(axis=0)
    win_se = dev_win.std(axis=0, ddof=1) / math.sqrt(trials)
    below_p = below_se = None
    if t_ref is not None:
        mask = dev_grid < t_ref
        sub = win_mean[:, mask]
        flat = int(np.argmax(sub))
        gb, eb = np.unravel_index(flat, sub.shape)
        below_p = float(sub[gb, eb])
        below_se = float(win_se[:, mask][gb, eb])

    return SimulationReport(
        trials=trials,
        rep_ratio=rep_ratio,
        rep_ratio_se=rep_se,
        welfare_ratio=wel_ratio,
        welfare_ratio_se=wel_se,
        avg_revenue=float(revenue.mean()),
        avg_revenue_se=float(revenue.std(ddof=1) / math.sqrt(trials)),
        selection_counts=(counts[0], counts[1]),
        max_regret_estimate=max_regret,
        max_regret_se=max_regret_se,
        deviation_grid=dev_grid,
        deviation_win_prob=win_mean,
        deviation_win_prob_se=win_se,
        below_threshold_win_prob=below_p,
        below_threshold_win_prob_se=below_se,
    )
