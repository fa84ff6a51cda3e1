"""Large-population equilibrium thresholds for multi-group selection contests.

The score threshold t is the unique root of

    sum_l  alpha_l * F_l(t)  =  1 - c

where F_l is the CDF of the group's merit-mapped participation variable
x_l * (v / kappa + a) + y_l ... evaluated as Pr[v/kappa + a <= (t - y_l)/x_l].
Closed forms cover the uniform, uniform-with-uniform-ability, and shape-2
Pareto families; everything else goes through bracketed Brent root-finding
on the strictly increasing combined CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.optimize import brentq

from .densities import (
    DensitySpec,
    PointMass,
    convolved_cdf,
    density_from_dict,
    scaled,
)
from .errors import (
    DomainBoundsError,
    FiniteShiftPreconditionError,
    NonUniqueThresholdError,
    SpecValidationError,
)

__all__ = [
    "GroupSpec",
    "ContestSpec",
    "ThresholdPolicy",
    "solve_threshold",
    "uniform_closed_threshold",
    "uniform_ability_closed_threshold",
    "pareto_closed_threshold",
    "effort",
    "quota_thresholds",
    "finite_shift",
    "two_group_uniform_contest",
]

_WEIGHT_SUM_TOL = 1e-12
_ROOT_FUN_TOL = 1e-12
_GAP_LEVEL_TOL = 1e-9
_BISECT_STEPS = 200


@dataclass(frozen=True)
class GroupSpec:
    """One population group: weight, valuation density, and optional
    effort-cost density and affine merit map (score -> x*score + y)."""

    weight: float
    valuation: DensitySpec
    cost: DensitySpec = PointMass(1.0)
    merit_scale: float = 1.0
    merit_offset: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.weight < 1.0 or self.weight == 1.0):
            raise SpecValidationError("GroupSpec: weight must be in (0, 1]")
        if not (self.merit_scale > 0 and math.isfinite(self.merit_scale)):
            raise SpecValidationError("GroupSpec: merit_scale must be positive")
        if not (self.merit_offset >= 0 and math.isfinite(self.merit_offset)):
            raise SpecValidationError("GroupSpec: merit_offset must be nonnegative")
        if self.cost.support()[0] <= 0:
            raise SpecValidationError("GroupSpec: cost density must be positive")

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "valuation": self.valuation.to_dict(),
            "cost": self.cost.to_dict(),
            "merit_scale": self.merit_scale,
            "merit_offset": self.merit_offset,
        }

    @staticmethod
    def from_dict(d: dict) -> "GroupSpec":
        return GroupSpec(
            weight=float(d["weight"]),
            valuation=density_from_dict(d["valuation"]),
            cost=density_from_dict(d.get("cost", {"kind": "point_mass", "x": 1.0})),
            merit_scale=float(d.get("merit_scale", 1.0)),
            merit_offset=float(d.get("merit_offset", 0.0)),
        )


@dataclass(frozen=True)
class ContestSpec:
    """Groups plus a shared ability density and a selection fraction c."""

    groups: tuple[GroupSpec, ...]
    ability: DensitySpec = PointMass(0.0)
    selection_fraction: float = 0.1

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise SpecValidationError("ContestSpec: needs at least one group")
        if abs(sum(g.weight for g in groups) - 1.0) > _WEIGHT_SUM_TOL:
            raise SpecValidationError("ContestSpec: group weights must sum to 1")
        if not (0.0 < self.selection_fraction < 1.0):
            raise SpecValidationError("ContestSpec: selection fraction must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "groups": [g.to_dict() for g in self.groups],
            "ability": self.ability.to_dict(),
            "selection_fraction": self.selection_fraction,
        }

    @staticmethod
    def from_dict(d: dict) -> "ContestSpec":
        return ContestSpec(
            groups=tuple(GroupSpec.from_dict(g) for g in d["groups"]),
            ability=density_from_dict(d.get("ability", {"kind": "point_mass", "x": 0.0})),
            selection_fraction=float(d["selection_fraction"]),
        )


@dataclass(frozen=True)
class ThresholdPolicy:
    """Equilibrium score threshold with per-group participation thresholds.

    delta_n / epsilon_n describe the finite-population shifted policy:
    an agent participates when v/kappa + a clears the shifted threshold
    and then exerts just enough effort to reach the score threshold.
    """

    t: float
    per_group_thresholds: tuple[float, ...]
    delta_n: float | None = None
    epsilon_n: float | None = None
    n: int | None = None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "per_group_thresholds": list(self.per_group_thresholds),
            "delta_n": self.delta_n,
            "epsilon_n": self.epsilon_n,
            "n": self.n,
        }


def two_group_uniform_contest(rho: float, c: float, alpha: float) -> ContestSpec:
    """The benchmark contest: group 1 uniform on [0,1], group 2 its
    rho-compressed copy with population share alpha, degenerate ability."""
    from .densities import Biased, Uniform

    return ContestSpec(
        groups=(
            GroupSpec(weight=1.0 - alpha, valuation=Uniform(0.0, 1.0)),
            GroupSpec(weight=alpha, valuation=Biased(Uniform(0.0, 1.0), rho)),
        ),
        ability=PointMass(0.0),
        selection_fraction=c,
    )


# ---------------------------------------------------------------------------
# Effective per-group CDFs
# ---------------------------------------------------------------------------


def participation_cdf(group: GroupSpec, ability: DensitySpec):
    """CDF of v/kappa + a for one group (merit map not applied)."""
    cost = group.cost
    valuation = group.valuation
    if isinstance(cost, PointMass):
        val = scaled(valuation, 1.0 / cost.x)
        return lambda u: convolved_cdf(val, ability, u)

    k_lo, k_hi = cost.support()

    def over_cost(w: float) -> float:
        # Pr[v / kappa <= w] by quadrature over the cost density.
        if w <= 0:
            return 0.0
        hi = k_hi
        if math.isinf(hi):
            hi = max(k_lo * 2, 1.0)
            while cost.cdf(hi) < 1.0 - 1e-12:
                hi *= 2
        val, _ = integrate.quad(
            lambda k: cost.pdf(k) * valuation.cdf(w * k), k_lo, hi,
            epsabs=1e-10, limit=200,
        )
        return min(max(val, 0.0), 1.0)

    if isinstance(ability, PointMass):
        a0 = ability.x
        return lambda u: over_cost(u - a0)

    a_lo, a_hi = ability.support()

    def nested(u: float) -> float:
        if u <= a_lo:
            return 0.0
        hi = min(a_hi, u) if math.isfinite(a_hi) else u
        total, _ = integrate.quad(
            lambda a: ability.pdf(a) * over_cost(u - a), a_lo, hi,
            epsabs=1e-10, limit=200,
        )
        return min(max(total, 0.0), 1.0)

    return nested


def group_score_cdf(group: GroupSpec, ability: DensitySpec):
    """Merit-mapped CDF used in the key equation: z -> Pr[participation
    variable <= (z - merit_offset) / merit_scale]."""
    part = participation_cdf(group, ability)
    x, y = group.merit_scale, group.merit_offset
    if x == 1.0 and y == 0.0:
        return part
    return lambda z: part((z - y) / x)


def _group_score_intervals(group: GroupSpec, ability: DensitySpec):
    """Support of the merit-mapped participation variable as intervals."""
    vols = group.valuation.support_intervals()
    costs = group.cost.support_intervals()
    over = []
    for va, vb in vols:
        for ka, kb in costs:
            lo = 0.0 if math.isinf(kb) else va / kb
            hi = math.inf if ka == 0 else vb / ka
            over.append((lo, hi))
    summed = []
    for pa, pb in over:
        for aa, ab in ability.support_intervals():
            summed.append((pa + aa, pb + ab))
    x, y = group.merit_scale, group.merit_offset
    return [(x * lo + y, x * hi + y) for lo, hi in summed]


def _merge(pieces):
    pieces = sorted(pieces)
    merged: list[list[float]] = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1] + 1e-12:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def solve_threshold(spec: ContestSpec) -> ThresholdPolicy:
    """Root of the combined selection-mass equation.

    Raises NonUniqueThresholdError when the combined support has a gap on
    which the target level is attained (the root would not be unique).
    """
    cdfs = [group_score_cdf(g, spec.ability) for g in spec.groups]
    weights = [g.weight for g in spec.groups]
    target = 1.0 - spec.selection_fraction

    def g(z: float) -> float:
        return sum(w * f(z) for w, f in zip(weights, cdfs))

    intervals = _merge(
        iv for grp in spec.groups for iv in _group_score_intervals(grp, spec.ability)
    )
    for (_, gap_lo), (gap_hi, _) in zip(intervals, intervals[1:]):
        if abs(g(0.5 * (gap_lo + gap_hi)) - target) <= _GAP_LEVEL_TOL:
            raise NonUniqueThresholdError(gap_lo, gap_hi, target)

    lo = intervals[0][0]
    hi = intervals[-1][1]
    if math.isinf(hi):
        hi = max(2.0 * abs(lo), lo + 1.0, 1.0)
        while g(hi) < target:
            hi *= 2.0
    t = float(brentq(lambda z: g(z) - target, lo, hi, xtol=1e-15, rtol=8.9e-16))
    thresholds = tuple(
        (t - grp.merit_offset) / grp.merit_scale for grp in spec.groups
    )
    return ThresholdPolicy(t=t, per_group_thresholds=thresholds)


# ---------------------------------------------------------------------------
# Closed forms (shape-specific)
# ---------------------------------------------------------------------------


def _check_rca(rho: float, c: float, alpha: float):
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    if not (0.0 < c < 1.0) or not (0.0 < alpha < 1.0):
        raise DomainBoundsError("c and alpha must lie in (0, 1)")


def uniform_closed_threshold(rho: float, c: float, alpha: float) -> float:
    """Threshold for uniform [0,1] vs rho-compressed uniform, no ability.

    Piecewise with breakpoint rho_c = 1 - c/(1-alpha): below it group 2
    is priced out entirely and t no longer depends on rho.
    """
    _check_rca(rho, c, alpha)
    rho_c = 1.0 - c / (1.0 - alpha)
    if rho < rho_c:
        return 1.0 - c / (1.0 - alpha)
    return rho * (1.0 - c) / (rho - alpha * rho + alpha)


def uniform_ability_closed_threshold(rho: float, c: float, alpha: float) -> float:
    """Threshold for the uniform pair with ability uniform on [0, 1].

    The combined CDF is piecewise quadratic with knots at rho, 1, 1+rho;
    the branch is chosen by locating 1-c among the knot values, which
    covers every (c, rho) regime of the piecewise closed form.
    """
    _check_rca(rho, c, alpha)
    target = 1.0 - c
    g_rho = (1.0 - alpha) * rho * rho / 2.0 + alpha * rho / 2.0
    g_one = (1.0 - alpha) / 2.0 + alpha * (1.0 - rho / 2.0)
    g_top = (1.0 - alpha) * (1.0 - (1.0 - rho) ** 2 / 2.0) + alpha
    if target >= g_top:
        return 2.0 - math.sqrt(2.0 * c / (1.0 - alpha))
    if target >= g_one:
        d = 1.0 - alpha + alpha / rho
        rad = 2.0 * c * d - alpha * (1.0 - alpha) * (1.0 - rho) ** 2 / rho
        return (2.0 - alpha + alpha / rho) / d - math.sqrt(rad) / d
    if target >= g_rho:
        rad = alpha * alpha + (1.0 - alpha) * (2.0 + alpha * rho - 2.0 * c)
        return -alpha / (1.0 - alpha) + math.sqrt(rad) / (1.0 - alpha)
    return math.sqrt(2.0 * (1.0 - c) / (1.0 - alpha + alpha / rho))


def pareto_closed_threshold(rho: float, c: float, alpha: float) -> float:
    """Threshold for shape-2, scale-1 Pareto vs its rho-compressed copy."""
    _check_rca(rho, c, alpha)
    excess = alpha + c - 1.0
    if excess > 0 and rho < math.sqrt(excess / alpha):
        return rho * math.sqrt(alpha / excess)
    return math.sqrt((1.0 - alpha + alpha * rho * rho) / c)


# ---------------------------------------------------------------------------
# Policies and the finite-population shift
# ---------------------------------------------------------------------------


def effort(
    policy: ThresholdPolicy, group: int, v: float, a: float, kappa: float = 1.0
) -> float:
    """Equilibrium effort of an agent with valuation v, ability a, and
    effort cost kappa: participate iff v/kappa + a clears the group
    threshold, then top the ability up to exactly that threshold."""
    if not 0 <= group < len(policy.per_group_thresholds):
        raise DomainBoundsError(f"group index {group} out of range")
    theta = policy.per_group_thresholds[group]
    if v / kappa + a < theta:
        return 0.0
    return max(theta - a, 0.0)


def _sup_inverse(cdf, lo: float, hi: float, q: float) -> float:
    """Largest u in [lo, hi] with cdf(u) <= q (plateau supremum)."""
    if cdf(lo) > q:
        return lo
    if cdf(hi) <= q:
        return hi
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cdf(mid) <= q:
            lo = mid
        else:
            hi = mid
    return lo


def quota_thresholds(spec: ContestSpec, per_group_c: list[float]) -> list[float]:
    """Independent within-group thresholds under group-specific selection
    fractions: each group's threshold solves its own mass equation."""
    if len(per_group_c) != len(spec.groups):
        raise DomainBoundsError("need exactly one selection fraction per group")
    out = []
    for grp, c_l in zip(spec.groups, per_group_c):
        if not (0.0 < c_l < 1.0):
            raise DomainBoundsError(f"per-group selection fraction {c_l} outside (0, 1)")
        cdf = participation_cdf(grp, spec.ability)
        ivs = _merge(_group_score_intervals(
            GroupSpec(weight=1.0, valuation=grp.valuation, cost=grp.cost),
            spec.ability,
        ))
        lo, hi = ivs[0][0], ivs[-1][1]
        if math.isinf(hi):
            hi = max(2.0 * abs(lo), 1.0)
            while cdf(hi) < 1.0 - c_l:
                hi *= 2.0
        out.append(_sup_inverse(cdf, lo, hi, 1.0 - c_l))
    return out


def _sqrt_log_over(n: int) -> float:
    return math.sqrt(math.log(n) / n)


def min_population_for_shift(min_cdf_at_t: float) -> int:
    """Smallest n such that sqrt(log m / m) < min_cdf_at_t for every m >= n.

    sqrt(log n / n) peaks at n = 3 and decreases afterwards, so the
    condition is stable once it first holds at some n >= 3.
    """
    if min_cdf_at_t > _sqrt_log_over(3):
        return 1
    n = 3
    while _sqrt_log_over(n) >= min_cdf_at_t:
        n *= 2
        if n > 10**18:
            raise DomainBoundsError("population threshold overflow")
    lo, hi = n // 2, n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _sqrt_log_over(mid) >= min_cdf_at_t:
            lo = mid
        else:
            hi = mid
    return hi


def finite_shift(policy: ThresholdPolicy, spec: ContestSpec, n: int) -> tuple[float, float]:
    """Finite-population participation shift and the stability bound it buys.

    delta_n lowers every group's participation cut so that, in
    expectation, slightly more than a c-fraction competes; epsilon_n
    bounds the gain any single agent can get by deviating (natural log
    throughout).
    """
    if n < 1:
        raise DomainBoundsError("n must be a positive integer")
    cdfs = [group_score_cdf(g, spec.ability) for g in spec.groups]
    t = policy.t
    values = [f(t) for f in cdfs]
    active = [(f, ft) for f, ft in zip(cdfs, values) if ft > 0.0]
    if not active:
        raise DomainBoundsError("no group has positive CDF mass at the threshold")
    n_min = min_population_for_shift(min(ft for _, ft in active))
    if n < n_min:
        raise FiniteShiftPreconditionError(n, n_min)
    shift = _sqrt_log_over(n)
    intervals = _merge(
        iv for grp in spec.groups for iv in _group_score_intervals(grp, spec.ability)
    )
    lo = intervals[0][0]
    delta_n = min(_sup_inverse(f, lo, t, ft - shift) for f, ft in active)
    factor = sum(n ** (-g.weight) for g in spec.groups)
    epsilon_n = factor * delta_n + t - delta_n
    return delta_n, epsilon_n
