"""Declarative valuation/ability/cost densities.

Every distribution family used by the contest model is described by an
immutable spec with an evaluable CDF, inverse CDF (supremum convention on
plateaus), mean, partial mean, and sampler.  Convolved CDFs of a valuation
plus an independent ability are computed in closed form where one exists
(uniform x uniform, degenerate factors) and by adaptive quadrature
otherwise.

All specs are frozen dataclasses; operations are pure, so concurrent
evaluation from any number of threads is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .errors import (
    DomainBoundsError,
    InfiniteMeanError,
    SpecValidationError,
    UnsupportedConfigurationError,
)

__all__ = [
    "DensitySpec",
    "Uniform",
    "TruncNormal",
    "Pareto",
    "PointMass",
    "Biased",
    "Mixture",
    "StochasticBias",
    "CdfQuery",
    "convolved_cdf",
    "stochastic_bias_density_cdf",
    "scaled",
    "density_from_dict",
]

#: Absolute tolerance for adaptive quadrature; chosen below the tolerance of
#: downstream root-finding so CDF noise never dominates.
QUAD_ABS_TOL = 1e-10

_WEIGHT_SUM_TOL = 1e-12
_INVERSE_BISECT_STEPS = 200


@dataclass(frozen=True)
class CdfQuery:
    """A CDF evaluation point with an explicit quadrature tolerance."""

    point: float
    quadrature_abs_tol: float = QUAD_ABS_TOL

    def __post_init__(self):
        if not math.isfinite(self.point):
            raise SpecValidationError("query point must be finite")
        if not (self.quadrature_abs_tol > 0):
            raise SpecValidationError("quadrature tolerance must be positive")


def _query(z) -> tuple[float, float]:
    if isinstance(z, CdfQuery):
        return z.point, z.quadrature_abs_tol
    return float(z), QUAD_ABS_TOL


def _check_finite(name: str, *values: float):
    for v in values:
        if not math.isfinite(v):
            raise SpecValidationError(f"{name}: parameters must be finite")


class DensitySpec:
    """Base class for density specifications.

    Subclasses implement the numeric surface; this class only carries the
    shared quadrature-backed fallbacks.
    """

    # -- contract -----------------------------------------------------------
    def cdf(self, z: float) -> float:
        raise NotImplementedError

    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def partial_mean(self, x0: float) -> float:
        """Upper partial expectation: integral of v * pdf(v) over v >= x0."""
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Infimum and supremum of the support (supremum may be inf)."""
        raise NotImplementedError

    def support_intervals(self) -> list[tuple[float, float]]:
        """Support as a minimal list of disjoint closed intervals."""
        return [self.support()]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # -- shared defaults -----------------------------------------------------
    def inverse_cdf(self, q: float) -> float:
        """Largest z in the support hull with cdf(z) <= q.

        On flat stretches this returns the plateau supremum; strictly
        increasing regions satisfy cdf(inverse_cdf(q)) == q up to solver
        tolerance.
        """
        if not (0.0 <= q <= 1.0):
            raise DomainBoundsError(f"quantile {q} outside [0, 1]")
        lo, hi = self.support()
        if q >= 1.0:
            return hi
        if math.isinf(hi):
            hi = max(lo + 1.0, 1.0)
            while self.cdf(hi) <= q:
                hi *= 2.0
        if self.cdf(lo) > q:
            return lo
        # Invariant: cdf(lo) <= q < cdf(hi); converge to sup{z: cdf(z) <= q}.
        for _ in range(_INVERSE_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.cdf(mid) <= q:
                lo = mid
            else:
                hi = mid
        return lo


@dataclass(frozen=True)
class Uniform(DensitySpec):
    lo: float
    hi: float

    def __post_init__(self):
        _check_finite("Uniform", self.lo, self.hi)
        if self.lo < 0:
            raise SpecValidationError("Uniform: support must be nonnegative")
        if not self.lo < self.hi:
            raise SpecValidationError("Uniform: requires lo < hi")

    def cdf(self, z):
        if z <= self.lo:
            return 0.0
        if z >= self.hi:
            return 1.0
        return (z - self.lo) / (self.hi - self.lo)

    def pdf(self, x):
        if self.lo <= x <= self.hi:
            return 1.0 / (self.hi - self.lo)
        return 0.0

    def inverse_cdf(self, q):
        if not (0.0 <= q <= 1.0):
            raise DomainBoundsError(f"quantile {q} outside [0, 1]")
        return self.lo + q * (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def partial_mean(self, x0):
        x0 = min(max(x0, self.lo), self.hi)
        return (self.hi * self.hi - x0 * x0) / (2.0 * (self.hi - self.lo))

    def support(self):
        return (self.lo, self.hi)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class TruncNormal(DensitySpec):
    """Normal(mu, sigma^2) truncated to [lo, hi], renormalized."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        _check_finite("TruncNormal", self.mu, self.sigma, self.lo, self.hi)
        if self.sigma <= 0:
            raise SpecValidationError("TruncNormal: requires sigma > 0")
        if self.lo < 0:
            raise SpecValidationError("TruncNormal: support must be nonnegative")
        if not self.lo < self.hi:
            raise SpecValidationError("TruncNormal: requires lo < hi")

    def _std_bounds(self):
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        return a, b, ndtr(a), ndtr(b)

    def cdf(self, z):
        if z <= self.lo:
            return 0.0
        if z >= self.hi:
            return 1.0
        a, b, na, nb = self._std_bounds()
        return float((ndtr((z - self.mu) / self.sigma) - na) / (nb - na))

    def pdf(self, x):
        if not (self.lo <= x <= self.hi):
            return 0.0
        a, b, na, nb = self._std_bounds()
        u = (x - self.mu) / self.sigma
        return float(_std_pdf(u) / (self.sigma * (nb - na)))

    def inverse_cdf(self, q):
        if not (0.0 <= q <= 1.0):
            raise DomainBoundsError(f"quantile {q} outside [0, 1]")
        if q <= 0.0:
            return self.lo
        if q >= 1.0:
            return self.hi
        a, b, na, nb = self._std_bounds()
        z = self.mu + self.sigma * float(ndtri(na + q * (nb - na)))
        return min(max(z, self.lo), self.hi)

    def mean(self):
        a, b, na, nb = self._std_bounds()
        return self.mu + self.sigma * (_std_pdf(a) - _std_pdf(b)) / (nb - na)

    def partial_mean(self, x0):
        x0 = min(max(x0, self.lo), self.hi)
        a, b, na, nb = self._std_bounds()
        u = (x0 - self.mu) / self.sigma
        mass = (nb - ndtr(u)) / (nb - na)
        return float(self.mu * mass + self.sigma * (_std_pdf(u) - _std_pdf(b)) / (nb - na))

    def support(self):
        return (self.lo, self.hi)

    def sample(self, rng, size):
        a, b, na, nb = self._std_bounds()
        u = rng.uniform(size=size)
        return self.mu + self.sigma * ndtri(na + u * (nb - na))

    def to_dict(self):
        return {
            "kind": "trunc_normal",
            "mu": self.mu,
            "sigma": self.sigma,
            "lo": self.lo,
            "hi": self.hi,
        }


@dataclass(frozen=True)
class Pareto(DensitySpec):
    """Pareto with pdf shape*scale^shape / v^(shape+1) on [scale, inf)."""

    scale: float
    shape: float

    def __post_init__(self):
        _check_finite("Pareto", self.scale, self.shape)
        if self.scale <= 0:
            raise SpecValidationError("Pareto: requires scale > 0")
        if self.shape <= 0:
            raise SpecValidationError("Pareto: requires shape > 0")

    def cdf(self, z):
        if z <= self.scale:
            return 0.0
        return 1.0 - (self.scale / z) ** self.shape

    def pdf(self, x):
        if x < self.scale:
            return 0.0
        return self.shape * self.scale**self.shape / x ** (self.shape + 1.0)

    def inverse_cdf(self, q):
        if not (0.0 <= q <= 1.0):
            raise DomainBoundsError(f"quantile {q} outside [0, 1]")
        if q >= 1.0:
            return math.inf
        return self.scale * (1.0 - q) ** (-1.0 / self.shape)

    def mean(self):
        if self.shape <= 1.0:
            raise InfiniteMeanError(f"Pareto shape {self.shape} <= 1 has no mean")
        return self.shape * self.scale / (self.shape - 1.0)

    def partial_mean(self, x0):
        if self.shape <= 1.0:
            raise InfiniteMeanError(f"Pareto shape {self.shape} <= 1 has no mean")
        x0 = max(x0, self.scale)
        return (self.shape / (self.shape - 1.0)) * self.scale**self.shape * x0 ** (
            1.0 - self.shape
        )

    def support(self):
        return (self.scale, math.inf)

    def sample(self, rng, size):
        u = rng.uniform(size=size)
        return self.scale * (1.0 - u) ** (-1.0 / self.shape)

    def to_dict(self):
        return {"kind": "pareto", "scale": self.scale, "shape": self.shape}


@dataclass(frozen=True)
class PointMass(DensitySpec):
    x: float

    def __post_init__(self):
        _check_finite("PointMass", self.x)
        if self.x < 0:
            raise SpecValidationError("PointMass: support must be nonnegative")

    def cdf(self, z):
        return 1.0 if z >= self.x else 0.0

    def pdf(self, x):
        raise UnsupportedConfigurationError("point mass has no Lebesgue density")

    def inverse_cdf(self, q):
        if not (0.0 <= q <= 1.0):
            raise DomainBoundsError(f"quantile {q} outside [0, 1]")
        return self.x

    def mean(self):
        return self.x

    def partial_mean(self, x0):
        return self.x if self.x >= x0 else 0.0

    def support(self):
        return (self.x, self.x)

    def sample(self, rng, size):
        return np.full(size, self.x)

    def to_dict(self):
        return {"kind": "point_mass", "x": self.x}


@dataclass(frozen=True)
class Biased(DensitySpec):
    """Multiplicative compression of a base density by rho in (0, 1].

    If V ~ base then rho * V ~ Biased(base, rho); the pdf is
    (1/rho) * base_pdf(v / rho) and Biased(base, 1) evaluates identically
    to base at every query point.
    """

    base: DensitySpec
    rho: float

    def __post_init__(self):
        _check_finite("Biased", self.rho)
        if not (0.0 < self.rho <= 1.0):
            raise SpecValidationError("Biased: requires rho in (0, 1]")
        if not isinstance(self.base, DensitySpec):
            raise SpecValidationError("Biased: base must be a DensitySpec")

    def cdf(self, z):
        return self.base.cdf(z / self.rho)

    def pdf(self, x):
        return self.base.pdf(x / self.rho) / self.rho

    def inverse_cdf(self, q):
        return self.rho * self.base.inverse_cdf(q)

    def mean(self):
        return self.rho * self.base.mean()

    def partial_mean(self, x0):
        return self.rho * self.base.partial_mean(x0 / self.rho)

    def support(self):
        lo, hi = self.base.support()
        return (self.rho * lo, self.rho * hi)

    def support_intervals(self):
        return [(self.rho * lo, self.rho * hi) for lo, hi in self.base.support_intervals()]

    def sample(self, rng, size):
        return self.rho * self.base.sample(rng, size)

    def to_dict(self):
        return {"kind": "biased", "rho": self.rho, "base": self.base.to_dict()}


@dataclass(frozen=True)
class Mixture(DensitySpec):
    """Finite mixture; components are (weight, spec) pairs."""

    components: tuple[tuple[float, DensitySpec], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise SpecValidationError("Mixture: needs at least one component")
        for w, s in comps:
            _check_finite("Mixture", w)
            if w <= 0:
                raise SpecValidationError("Mixture: weights must be positive")
            if not isinstance(s, DensitySpec):
                raise SpecValidationError("Mixture: components must be DensitySpecs")
        if abs(sum(w for w, _ in comps) - 1.0) > _WEIGHT_SUM_TOL:
            raise SpecValidationError("Mixture: weights must sum to 1")

    def cdf(self, z):
        return sum(w * s.cdf(z) for w, s in self.components)

    def pdf(self, x):
        return sum(w * s.pdf(x) for w, s in self.components)

    def mean(self):
        return sum(w * s.mean() for w, s in self.components)

    def partial_mean(self, x0):
        return sum(w * s.partial_mean(x0) for w, s in self.components)

    def support(self):
        los, his = zip(*(s.support() for _, s in self.components))
        return (min(los), max(his))

    def support_intervals(self):
        pieces = [iv for _, s in self.components for iv in s.support_intervals()]
        return _merge_intervals(pieces)

    def sample(self, rng, size):
        weights = np.array([w for w, _ in self.components])
        counts = rng.multinomial(size, weights / weights.sum())
        draws = [s.sample(rng, int(k)) for (_, s), k in zip(self.components, counts)]
        out = np.concatenate(draws) if draws else np.empty(0)
        rng.shuffle(out)
        return out

    def to_dict(self):
        return {
            "kind": "mixture",
            "components": [
                {"weight": w, "density": s.to_dict()} for w, s in self.components
            ],
        }


@dataclass(frozen=True)
class StochasticBias(DensitySpec):
    """Base valuation compressed by an agent-level random factor.

    Each draw is R * V with V ~ base and R ~ rho_density supported in
    (0, 1]; the CDF is the rho-mixture of scaled base CDFs.
    """

    base: DensitySpec
    rho_density: DensitySpec

    def __post_init__(self):
        if not isinstance(self.base, DensitySpec) or not isinstance(
            self.rho_density, DensitySpec
        ):
            raise SpecValidationError("StochasticBias: expects DensitySpecs")
        r_lo, r_hi = self.rho_density.support()
        if r_lo <= 0:
            raise SpecValidationError(
                "StochasticBias: bias support touches 0 (division by the factor)"
            )
        if r_hi > 1.0 + _WEIGHT_SUM_TOL:
            raise SpecValidationError("StochasticBias: bias support must lie in (0, 1]")

    def cdf(self, z):
        rd = self.rho_density
        if isinstance(rd, PointMass):
            return self.base.cdf(z / rd.x)
        if isinstance(rd, Mixture):
            return sum(
                w * StochasticBias(self.base, s).cdf(z) for w, s in rd.components
            )
        r_lo, r_hi = rd.support()
        val, _ = integrate.quad(
            lambda r: rd.pdf(r) * self.base.cdf(z / r),
            r_lo,
            r_hi,
            epsabs=QUAD_ABS_TOL,
            limit=200,
        )
        return min(max(val, 0.0), 1.0)

    def pdf(self, x):
        rd = self.rho_density
        if isinstance(rd, PointMass):
            return self.base.pdf(x / rd.x) / rd.x
        r_lo, r_hi = rd.support()
        val, _ = integrate.quad(
            lambda r: rd.pdf(r) * self.base.pdf(x / r) / r,
            r_lo,
            r_hi,
            epsabs=QUAD_ABS_TOL,
            limit=200,
        )
        return max(val, 0.0)

    def mean(self):
        # R and V independent.
        return self.rho_density.mean() * self.base.mean()

    def partial_mean(self, x0):
        rd = self.rho_density
        if isinstance(rd, PointMass):
            return rd.x * self.base.partial_mean(x0 / rd.x)
        r_lo, r_hi = rd.support()
        val, _ = integrate.quad(
            lambda r: rd.pdf(r) * r * self.base.partial_mean(x0 / r),
            r_lo,
            r_hi,
            epsabs=QUAD_ABS_TOL,
            limit=200,
        )
        return max(val, 0.0)

    def support(self):
        r_lo, r_hi = self.rho_density.support()
        b_lo, b_hi = self.base.support()
        return (r_lo * b_lo, r_hi * b_hi)

    def sample(self, rng, size):
        return self.rho_density.sample(rng, size) * self.base.sample(rng, size)

    def to_dict(self):
        return {
            "kind": "stochastic_bias",
            "base": self.base.to_dict(),
            "rho_density": self.rho_density.to_dict(),
        }


def _std_pdf(u: float) -> float:
    return math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def _merge_intervals(pieces: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pieces = sorted(pieces)
    merged: list[list[float]] = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def scaled(spec: DensitySpec, factor: float) -> DensitySpec:
    """Distribution of factor * V for V ~ spec, for any factor > 0.

    Unlike Biased this admits factors above 1 (used for effort-cost
    transforms v / kappa); the result is expressed in closed form within
    the same family set.
    """
    if not (factor > 0) or not math.isfinite(factor):
        raise DomainBoundsError(f"scale factor {factor} must be positive and finite")
    if factor == 1.0:
        return spec
    if isinstance(spec, Uniform):
        return Uniform(factor * spec.lo, factor * spec.hi)
    if isinstance(spec, TruncNormal):
        return TruncNormal(
            factor * spec.mu, factor * spec.sigma, factor * spec.lo, factor * spec.hi
        )
    if isinstance(spec, Pareto):
        return Pareto(factor * spec.scale, spec.shape)
    if isinstance(spec, PointMass):
        return PointMass(factor * spec.x)
    if isinstance(spec, Biased):
        return scaled(spec.base, factor * spec.rho)
    if isinstance(spec, Mixture):
        return Mixture(tuple((w, scaled(s, factor)) for w, s in spec.components))
    if isinstance(spec, StochasticBias):
        return StochasticBias(scaled(spec.base, factor), spec.rho_density)
    raise UnsupportedConfigurationError(f"cannot rescale {type(spec).__name__}")


def _as_uniform(spec: DensitySpec) -> tuple[float, float] | None:
    """Return (lo, hi) if the spec is a (possibly rescaled) uniform."""
    if isinstance(spec, Uniform):
        return (spec.lo, spec.hi)
    if isinstance(spec, Biased):
        inner = _as_uniform(spec.base)
        if inner is not None:
            return (spec.rho * inner[0], spec.rho * inner[1])
    return None


def _uniform_sum_cdf(a1: float, b1: float, a2: float, b2: float, z: float) -> float:
    """CDF of U[a1,b1] + U[a2,b2] (closed-form trapezoid)."""
    w1 = b1 - a1
    w2 = b2 - a2
    lo = min(w1, w2)
    hi = max(w1, w2)
    u = z - a1 - a2
    if u <= 0:
        return 0.0
    if u >= w1 + w2:
        return 1.0
    if u <= lo:
        return u * u / (2.0 * w1 * w2)
    if u <= hi:
        return (2.0 * u - lo) / (2.0 * hi)
    r = w1 + w2 - u
    return 1.0 - r * r / (2.0 * w1 * w2)


def _conv_quad(
    pdf_spec: DensitySpec, cdf_spec: DensitySpec, z: float, abs_tol: float
) -> float:
    """Pr[X + Y <= z] integrating pdf of X against the CDF of Y.

    Only the transition window where the CDF of Y is strictly between 0
    and 1 is integrated; the saturated part contributes the CDF of X in
    closed form.
    """
    x_lo, x_hi = pdf_spec.support()
    y_lo, y_hi = cdf_spec.support()
    total = 0.0 if math.isinf(y_hi) else pdf_spec.cdf(z - y_hi)
    a = x_lo if math.isinf(y_hi) else max(x_lo, z - y_hi)
    b = min(x_hi, z - y_lo)
    if b <= a:
        return min(max(total, 0.0), 1.0)
    if math.isinf(b):
        raise UnsupportedConfigurationError(
            "convolution window unbounded; supports are incompatible"
        )
    breakpoints = sorted(
        {a, b}
        | {p for iv in pdf_spec.support_intervals() for p in iv if a < p < b}
        | {z - p for iv in cdf_spec.support_intervals() for p in iv if a < z - p < b}
    )
    val, _ = integrate.quad(
        lambda x: pdf_spec.pdf(x) * cdf_spec.cdf(z - x),
        a,
        b,
        points=breakpoints,
        epsabs=abs_tol,
        limit=400,
    )
    return min(max(total + val, 0.0), 1.0)


def convolved_cdf(valuation: DensitySpec, ability: DensitySpec, z) -> float:
    """Pr[V + A <= z] for independent V ~ valuation, A ~ ability.

    z may be a float or a CdfQuery carrying a quadrature tolerance.
    Degenerate factors reduce exactly; uniform x uniform uses the closed
    piecewise polynomial; everything else is adaptive quadrature.
    """
    z, abs_tol = _query(z)
    if isinstance(ability, PointMass):
        return valuation.cdf(z - ability.x)
    if isinstance(valuation, PointMass):
        return ability.cdf(z - valuation.x)
    vu = _as_uniform(valuation)
    au = _as_uniform(ability)
    if vu is not None and au is not None:
        return _uniform_sum_cdf(vu[0], vu[1], au[0], au[1], z)
    if isinstance(valuation, Mixture):
        return sum(w * convolved_cdf(s, ability, CdfQuery(z, abs_tol))
                   for w, s in valuation.components)
    if isinstance(ability, Mixture):
        return sum(w * convolved_cdf(valuation, s, CdfQuery(z, abs_tol))
                   for w, s in ability.components)
    if isinstance(valuation, StochasticBias):
        # The stochastic-bias pdf is itself an integral; integrate over the
        # ability density instead so the inner evaluation stays one level deep.
        return _conv_quad(ability, valuation, z, abs_tol)
    return _conv_quad(valuation, ability, z, abs_tol)


def stochastic_bias_density_cdf(
    base: DensitySpec, rho_density: DensitySpec, z
) -> float:
    """CDF of R * V with V ~ base and R ~ rho_density in (0, 1]."""
    z, _ = _query(z)
    return StochasticBias(base, rho_density).cdf(z)


_KINDS = {}


def density_from_dict(d: dict) -> DensitySpec:
    """Inverse of DensitySpec.to_dict; round-trips losslessly."""
    try:
        kind = d["kind"]
    except (TypeError, KeyError):
        raise SpecValidationError(f"not a density object: {d!r}") from None
    try:
        builder = _KINDS[kind]
    except KeyError:
        raise SpecValidationError(f"unknown density kind {kind!r}") from None
    return builder(d)


_KINDS.update(
    {
        "uniform": lambda d: Uniform(float(d["lo"]), float(d["hi"])),
        "trunc_normal": lambda d: TruncNormal(
            float(d["mu"]), float(d["sigma"]), float(d["lo"]), float(d["hi"])
        ),
        "pareto": lambda d: Pareto(float(d["scale"]), float(d["shape"])),
        "point_mass": lambda d: PointMass(float(d["x"])),
        "biased": lambda d: Biased(density_from_dict(d["base"]), float(d["rho"])),
        "mixture": lambda d: Mixture(
            tuple(
                (float(c["weight"]), density_from_dict(c["density"]))
                for c in d["components"]
            )
        ),
        "stochastic_bias": lambda d: StochasticBias(
            density_from_dict(d["base"]), density_from_dict(d["rho_density"])
        ),
    }
)
