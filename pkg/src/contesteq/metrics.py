"""Fairness and efficiency metrics at a threshold equilibrium.

Three quantities are reported: the representation ratio (min of the two
groups' selection-rate ratios), the social-welfare ratio (min ratio of
group-average payoffs), and the average revenue (mean merit of selected
agents, which collapses to m(t) when ability is degenerate).

Closed forms cover the uniform rho-biased benchmark; arbitrary densities
go through partial-expectation quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .densities import Biased, DensitySpec, PointMass
from .equilibrium import ContestSpec, GroupSpec, ThresholdPolicy, group_score_cdf
from .errors import DegenerateMetricError, DomainBoundsError, SpecValidationError

__all__ = [
    "MeritFn",
    "MetricsReport",
    "uniform_metrics",
    "biased_metrics_at",
    "general_metrics",
    "metrics_csv_header",
    "metrics_csv_row",
]


@dataclass(frozen=True)
class MeritFn:
    """Strictly increasing map from scores to merit.

    Kinds: identity, affine (scale > 0), or a piecewise-linear table of
    (score, merit) points extended linearly beyond its ends.
    """

    kind: str = "identity"
    scale: float = 1.0
    offset: float = 0.0
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "identity":
            return
        if self.kind == "affine":
            if not (self.scale > 0 and math.isfinite(self.scale)):
                raise SpecValidationError("MeritFn: affine scale must be positive")
            return
        if self.kind == "table":
            pts = tuple((float(s), float(m)) for s, m in self.points)
            object.__setattr__(self, "points", pts)
            if len(pts) < 2:
                raise SpecValidationError("MeritFn: table needs at least two points")
            for (s0, m0), (s1, m1) in zip(pts, pts[1:]):
                if not (s1 > s0 and m1 > m0):
                    raise SpecValidationError("MeritFn: table must be strictly increasing")
            return
        raise SpecValidationError(f"MeritFn: unknown kind {self.kind!r}")

    @staticmethod
    def identity() -> "MeritFn":
        return MeritFn()

    @staticmethod
    def affine(scale: float, offset: float) -> "MeritFn":
        return MeritFn(kind="affine", scale=scale, offset=offset)

    @staticmethod
    def table(points) -> "MeritFn":
        return MeritFn(kind="table", points=tuple(points))

    def __call__(self, s: float) -> float:
        if self.kind == "identity":
            return s
        if self.kind == "affine":
            return self.scale * s + self.offset
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        if s <= xs[0]:
            slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
            return ys[0] + slope * (s - xs[0])
        if s >= xs[-1]:
            slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            return ys[-1] + slope * (s - xs[-1])
        return float(np.interp(s, xs, ys))

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        if self.kind == "affine":
            return {"kind": "affine", "scale": self.scale, "offset": self.offset}
        return {"kind": "table", "points": [list(p) for p in self.points]}

    @staticmethod
    def from_dict(d: dict) -> "MeritFn":
        kind = d.get("kind", "identity")
        if kind == "identity":
            return MeritFn.identity()
        if kind == "affine":
            return MeritFn.affine(float(d["scale"]), float(d.get("offset", 0.0)))
        if kind == "table":
            return MeritFn.table(tuple((float(s), float(m)) for s, m in d["points"]))
        raise SpecValidationError(f"MeritFn: unknown kind {kind!r}")


@dataclass(frozen=True)
class MetricsReport:
    rep_ratio: float
    welfare_ratio: float
    avg_revenue: float
    per_group_selection_rate: tuple[float, ...]
    per_group_welfare: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "rep_ratio": self.rep_ratio,
            "welfare_ratio": self.welfare_ratio,
            "avg_revenue": self.avg_revenue,
            "per_group_selection_rate": list(self.per_group_selection_rate),
            "per_group_welfare": list(self.per_group_welfare),
        }


def _min_ratio(advantaged: float, disadvantaged: float) -> float:
    """min(a/b, b/a) with the degenerate conventions: one empty group
    yields 0, an empty advantaged/reference group is an error."""
    if advantaged <= 0.0:
        raise DegenerateMetricError("reference group has zero mass at the threshold")
    if disadvantaged <= 0.0:
        return 0.0
    return min(advantaged / disadvantaged, disadvantaged / advantaged)


def uniform_metrics(rho: float, c: float, alpha: float, merit: MeritFn | None = None) -> MetricsReport:
    """Closed-form metrics for uniform [0,1] vs rho-compressed uniform.

    Below the participation breakpoint rho_c = 1 - c/(1-alpha) nobody in
    the compressed group competes and both ratios are exactly zero; above
    it the welfare ratio equals rho times the squared representation
    ratio.
    """
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    if not (0.0 < c < 1.0) or not (0.0 < alpha < 1.0):
        raise DomainBoundsError("c and alpha must lie in (0, 1)")
    merit = merit or MeritFn.identity()
    numer = rho - alpha * rho + alpha + c - 1.0
    if numer <= 0.0:
        t = 1.0 - c / (1.0 - alpha)
        r1 = 1.0 - t
        return MetricsReport(
            rep_ratio=0.0,
            welfare_ratio=0.0,
            avg_revenue=merit(t),
            per_group_selection_rate=(r1, 0.0),
            per_group_welfare=((1.0 - t) ** 2 / 2.0, 0.0),
        )
    t = rho * (1.0 - c) / (rho - alpha * rho + alpha)
    rep = numer / (alpha - alpha * rho + c * rho)
    r1 = 1.0 - t
    r2 = 1.0 - t / rho
    w1 = (1.0 - t) ** 2 / 2.0
    w2 = (rho - t) ** 2 / (2.0 * rho)
    return MetricsReport(
        rep_ratio=rep,
        welfare_ratio=rho * rep * rep,
        avg_revenue=merit(t),
        per_group_selection_rate=(r1, r2),
        per_group_welfare=(w1, w2),
    )


def biased_metrics_at(
    t: float, p1: DensitySpec, rho: float, merit: MeritFn | None = None
) -> MetricsReport:
    """Metrics at a given threshold when group 2's valuations are the
    rho-compressed copy of p1 and ability is degenerate at zero.

    Group-average welfare is the upper partial expectation of (v - t)
    under each group's own density, so the ratio reduction to the uniform
    closed form holds by construction.
    """
    if not (0.0 < rho <= 1.0):
        raise DomainBoundsError(f"rho {rho} outside (0, 1]")
    merit = merit or MeritFn.identity()
    p2 = Biased(p1, rho) if rho < 1.0 else p1
    r1 = 1.0 - p1.cdf(t)
    r2 = 1.0 - p2.cdf(t)
    if r1 <= 0.0:
        raise DegenerateMetricError("nobody selected from the reference group")
    w1 = p1.partial_mean(t) - t * r1
    w2 = p2.partial_mean(t) - t * r2
    return MetricsReport(
        rep_ratio=_min_ratio(r1, r2),
        welfare_ratio=_min_ratio(w1, w2),
        avg_revenue=merit(t),
        per_group_selection_rate=(r1, r2),
        per_group_welfare=(w1, w2),
    )


def _value_ge_prob(valuation: DensitySpec, v0: float) -> float:
    return 1.0 - valuation.cdf(v0) if v0 > 0 else 1.0


def _group_welfare(group: GroupSpec, ability: DensitySpec, theta: float) -> float:
    """E[(v - kappa * effort) * selected] for one group.

    Selected means v/kappa + a >= theta with effort max(theta - a, 0).
    """
    val = group.valuation

    def at_cost(kappa: float) -> float:
        def at_ability(a: float) -> float:
            e = max(theta - a, 0.0)
            v0 = kappa * e
            return val.partial_mean(v0) - kappa * e * _value_ge_prob(val, v0)

        if isinstance(ability, PointMass):
            return at_ability(ability.x)
        a_lo, a_hi = ability.support()
        if math.isinf(a_hi):
            a_hi = ability.inverse_cdf(1.0 - 1e-12)
        pts = [theta] if a_lo < theta < a_hi else None
        out, _ = integrate.quad(
            lambda a: ability.pdf(a) * at_ability(a), a_lo, a_hi,
            points=pts, epsabs=1e-10, limit=200,
        )
        return out

    cost = group.cost
    if isinstance(cost, PointMass):
        return at_cost(cost.x)
    k_lo, k_hi = cost.support()
    if math.isinf(k_hi):
        k_hi = cost.inverse_cdf(1.0 - 1e-12)
    out, _ = integrate.quad(
        lambda k: cost.pdf(k) * at_cost(k), k_lo, k_hi, epsabs=1e-9, limit=100
    )
    return out


def _group_revenue_mass(
    group: GroupSpec, ability: DensitySpec, theta: float, merit: MeritFn
) -> float:
    """E[m(merit-space score of a selected agent) * selected] for one group.

    A selected agent's score is max(theta, a): either topped up exactly to
    the participation threshold or carried above it by ability alone.
    """
    x, y = group.merit_scale, group.merit_offset
    val = group.valuation

    def at_cost(kappa: float) -> float:
        def at_ability(a: float) -> float:
            v0 = kappa * max(theta - a, 0.0)
            return merit(x * max(theta, a) + y) * _value_ge_prob(val, v0)

        if isinstance(ability, PointMass):
            return at_ability(ability.x)
        a_lo, a_hi = ability.support()
        if math.isinf(a_hi):
            a_hi = ability.inverse_cdf(1.0 - 1e-12)
        pts = [theta] if a_lo < theta < a_hi else None
        out, _ = integrate.quad(
            lambda a: ability.pdf(a) * at_ability(a), a_lo, a_hi,
            points=pts, epsabs=1e-10, limit=200,
        )
        return out

    cost = group.cost
    if isinstance(cost, PointMass):
        return at_cost(cost.x)
    k_lo, k_hi = cost.support()
    if math.isinf(k_hi):
        k_hi = cost.inverse_cdf(1.0 - 1e-12)
    out, _ = integrate.quad(
        lambda k: cost.pdf(k) * at_cost(k), k_lo, k_hi, epsabs=1e-9, limit=100
    )
    return out


def general_metrics(
    spec: ContestSpec, policy: ThresholdPolicy, merit: MeritFn | None = None
) -> MetricsReport:
    """Metrics for arbitrary densities at a solved threshold policy.

    Selection rates come from the merit-mapped group CDFs; welfare and
    revenue are partial-expectation integrals convolved with the ability
    (and, when present, cost) densities.  Average revenue normalizes the
    selected mass by c, so with degenerate ability it equals m(t) exactly.
    """
    merit = merit or MeritFn.identity()
    t = policy.t
    rates = []
    welfare = []
    for grp, theta in zip(spec.groups, policy.per_group_thresholds):
        cdf = group_score_cdf(grp, spec.ability)
        rates.append(1.0 - cdf(t))
        welfare.append(_group_welfare(grp, spec.ability, theta))
    if max(rates) <= 0.0:
        raise DegenerateMetricError("nobody is selected at this threshold")
    if isinstance(spec.ability, PointMass) and all(
        spec.ability.x <= theta for theta in policy.per_group_thresholds
    ):
        # Every selected agent sits exactly at merit t, so the average is
        # m(t) with no quadrature or mass normalization.
        avg_revenue = merit(t)
    else:
        mass = sum(
            grp.weight * _group_revenue_mass(grp, spec.ability, theta, merit)
            for grp, theta in zip(spec.groups, policy.per_group_thresholds)
        )
        avg_revenue = mass / spec.selection_fraction
    rep = _min_ratio(max(rates), min(rates))
    wel = _min_ratio(max(welfare), min(welfare))
    return MetricsReport(
        rep_ratio=rep,
        welfare_ratio=wel,
        avg_revenue=avg_revenue,
        per_group_selection_rate=tuple(rates),
        per_group_welfare=tuple(welfare),
    )


def metrics_csv_header() -> str:
    return "rho,c,alpha,t,r_R,r_S,RV"


def metrics_csv_row(rho: float, c: float, alpha: float, t: float, report: MetricsReport) -> str:
    vals = (rho, c, alpha, t, report.rep_ratio, report.welfare_ratio, report.avg_revenue)
    return ",".join(f"{v:.12g}" for v in vals)
