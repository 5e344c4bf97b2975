"""Coagulation kernels, fragmentation laws, source and efflux terms.

Kernels are small immutable (and picklable) objects evaluated with numpy
broadcasting, so ``K(x, sizes)`` gives a whole kernel row at once.

Fragmentation laws expose a sampler rather than a measure.  Binary laws
additionally carry the closed form of their one-fragment kernel F^(1), from
which the symmetrized 1-marginal is derived exactly; everything else is
estimated by Monte Carlo over fragment draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import CapabilityError, ModelError, UsageError
from .rng import DRIFT, stream

# ---------------------------------------------------------------------------
# scalar rate functions  x -> F̄(x), e(x), λ(k), ...


@dataclass(frozen=True)
class PowerRate:
    """c * x**(-alpha) + offset."""

    alpha: float = 1.0
    c: float = 1.0
    offset: float = 0.0

    def __call__(self, x):
        if self.offset:
            return self.c * np.power(x, -self.alpha) + self.offset
        return self.c * np.power(x, -self.alpha)


@dataclass(frozen=True)
class MonomialRate:
    """c * x**p."""

    p: float = 1.0
    c: float = 1.0

    def __call__(self, x):
        return self.c * np.power(x, self.p)


@dataclass(frozen=True)
class AffineRate:
    """c * (1 + x)."""

    c: float = 1.0

    def __call__(self, x):
        return self.c * (1.0 + np.asarray(x, dtype=float)) if np.ndim(x) else self.c * (1.0 + x)


@dataclass(frozen=True)
class NegLogRate:
    """c * (1 - ln x), natural logarithm."""

    c: float = 1.0

    def __call__(self, x):
        return self.c * (1.0 - np.log(x))


@dataclass(frozen=True)
class ConstantRate:
    c: float = 1.0

    def __call__(self, x):
        if np.ndim(x):
            return np.full(np.shape(x), float(self.c))
        return float(self.c)


@dataclass(frozen=True)
class HalfKappa:
    def __call__(self, x):
        return 0.5 * x


@dataclass(frozen=True)
class ShiftedHalfKappa:
    """x/2 + 1/4 for x > 1/2, x/2 otherwise; the breakpoint itself takes the lower branch."""

    def __call__(self, x):
        return 0.5 * x + 0.25 if x > 0.5 else 0.5 * x


@dataclass(frozen=True)
class FractionKappa:
    r: float = 0.5

    def __call__(self, x):
        return self.r * x


# ---------------------------------------------------------------------------
# coagulation kernels


class CoagKernel:
    """Base class: ``K(x, y)`` with numpy broadcasting and optional declared homogeneity."""

    alpha: Optional[float] = None
    symmetric: bool = False
    name: str = "kernel"

    def __call__(self, x, y):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantKernel(CoagKernel):
    c: float = 1.0
    name = "constant"
    symmetric = True

    @property
    def alpha(self):
        return 0.0

    def __call__(self, x, y):
        if np.ndim(x) or np.ndim(y):
            return np.full(np.broadcast(x, y).shape, float(self.c))
        return float(self.c)


@dataclass(frozen=True)
class AdditiveKernel(CoagKernel):
    c: float = 1.0
    name = "additive"
    symmetric = True

    @property
    def alpha(self):
        return 1.0

    def __call__(self, x, y):
        return self.c * (x + y)


@dataclass(frozen=True)
class MultiplicativeKernel(CoagKernel):
    c: float = 1.0
    name = "multiplicative"
    symmetric = True

    @property
    def alpha(self):
        return 2.0

    def __call__(self, x, y):
        return self.c * (x * y)


@dataclass(frozen=True)
class ProductPowerKernel(CoagKernel):
    """c * (x*y)**beta, homogeneous of degree 2*beta."""

    beta: float = 1.0
    c: float = 1.0
    name = "product_power"
    symmetric = True

    @property
    def alpha(self):
        return 2.0 * self.beta

    def __call__(self, x, y):
        return self.c * np.power(x * y, self.beta)


@dataclass(frozen=True)
class FunctionKernel(CoagKernel):
    fn: Callable = None
    declared_alpha: Optional[float] = None
    name = "function"

    @property
    def alpha(self):
        return self.declared_alpha

    def __call__(self, x, y):
        return self.fn(x, y)


@dataclass(frozen=True)
class SymmetrizedKernel(CoagKernel):
    base: CoagKernel = None
    name = "symmetrized"
    symmetric = True

    @property
    def alpha(self):
        return self.base.alpha

    def __call__(self, x, y):
        return 0.5 * (self.base(x, y) + self.base(y, x))


def constant_kernel(c: float = 1.0) -> CoagKernel:
    return ConstantKernel(float(c))


def additive_kernel(c: float = 1.0) -> CoagKernel:
    return AdditiveKernel(float(c))


def multiplicative_kernel(c: float = 1.0) -> CoagKernel:
    return MultiplicativeKernel(float(c))


def product_power_kernel(beta: float, c: float = 1.0) -> CoagKernel:
    return ProductPowerKernel(float(beta), float(c))


def sym_coag(K: CoagKernel) -> CoagKernel:
    """(x, y) -> (K(x, y) + K(y, x)) / 2.

    Kernels already known to be symmetric are returned as is, which is
    value-identical because (a + a) / 2 == a in floating point.
    """
    if getattr(K, "symmetric", False):
        return K
    if not isinstance(K, CoagKernel):
        K = FunctionKernel(K)
    return SymmetrizedKernel(K)


def homogeneity_check(K, alpha: float, probes) -> bool:
    """True iff |K(cx, cy) - c^alpha K(x, y)| <= 1e-9 c^alpha K(x, y) on every (c, x, y) probe."""
    for c, x, y in probes:
        lhs = float(K(c * x, c * y))
        rhs = c**alpha * float(K(x, y))
        if not math.isfinite(lhs) or abs(lhs - rhs) > 1e-9 * abs(rhs):
            return False
    return True


# ---------------------------------------------------------------------------
# measures on (0, x] used for closed-form marginals


@dataclass(frozen=True)
class AtomicMeasure:
    locations: tuple
    weights: tuple

    def integrate(self, phi) -> float:
        return float(sum(w * phi(l) for l, w in zip(self.locations, self.weights)))

    def total(self) -> float:
        return float(sum(self.weights))


@dataclass(frozen=True)
class DensityMeasure:
    density: Callable[[float], float]
    lower: float
    upper: float

    def integrate(self, phi) -> float:
        val, _ = integrate.quad(lambda y: phi(y) * self.density(y), self.lower, self.upper,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(val)

    def total(self) -> float:
        return self.integrate(lambda y: 1.0)


def _atoms(pairs) -> AtomicMeasure:
    merged: dict = {}
    for loc, w in pairs:
        merged[loc] = merged.get(loc, 0.0) + w
    locs = tuple(sorted(merged))
    return AtomicMeasure(locs, tuple(merged[l] for l in locs))


# ---------------------------------------------------------------------------
# fragmentation laws


class FragLaw:
    """Fragmentation kernel F(x, dz): total rate plus a mass-conserving fragment sampler."""

    binary = False

    def total_rate(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def sample_fragments(self, x: float, rng: np.random.Generator) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def outcomes(self, x: float):
        """Finite list of (probability, fragments) when the fragment law is discrete, else None."""
        return None

    def first_marginal(self, x: float):
        """Closed form of F^(1)(x, .) for binary laws."""
        raise CapabilityError(f"{type(self).__name__} has no closed-form one-fragment kernel")


@dataclass(frozen=True)
class UniformBinary(FragLaw):
    rate_fn: Callable = field(default_factory=PowerRate)
    binary = True

    def total_rate(self, x):
        return 0.5 * self.rate_fn(x)

    def sample_fragments(self, x, rng):
        y = x * rng.random()
        while not (0.0 < y < x):
            y = x * rng.random()
        return np.array([y, x - y])

    def first_marginal(self, x):
        fbar = float(self.rate_fn(x))
        return DensityMeasure(lambda y: fbar / x, 0.0, float(x))


@dataclass(frozen=True)
class DeterministicBinary(FragLaw):
    rate_fn: Callable = field(default_factory=PowerRate)
    kappa_fn: Callable = field(default_factory=HalfKappa)
    binary = True

    def _kappa(self, x):
        k = self.kappa_fn(x)
        if not (0.0 < k < x):
            raise ModelError(f"kappa({x}) = {k} is not inside (0, {x})")
        return k

    def total_rate(self, x):
        return 0.5 * self.rate_fn(x)

    def sample_fragments(self, x, rng):
        k = self._kappa(x)
        return np.array([k, x - k])

    def outcomes(self, x):
        k = self._kappa(x)
        return [(1.0, (k, x - k))]

    def first_marginal(self, x):
        return AtomicMeasure((self._kappa(x),), (float(self.rate_fn(x)),))


@dataclass(frozen=True)
class SampledFragLaw(FragLaw):
    """User-supplied k-ary law; every draw is checked for mass conservation."""

    rate_fn: Callable = None
    sampler: Callable = None

    def total_rate(self, x):
        return self.rate_fn(x)

    def sample_fragments(self, x, rng):
        z = np.asarray(self.sampler(x, rng), dtype=float)
        if z.size < 2 or not np.all((z > 0) & (z < x)) or abs(z.sum() - x) > 1e-12 * x:
            raise ModelError(f"fragment draw {z} violates mass conservation for x={x}")
        return z


def uniform_binary(rate_fn) -> FragLaw:
    return UniformBinary(rate_fn)


def deterministic_binary(rate_fn, kappa_fn) -> FragLaw:
    return DeterministicBinary(rate_fn, kappa_fn)


def binary_sym_marginal(law: FragLaw) -> Callable[[float], object]:
    """x -> F_sym^(1)(x, .) = (F^(1)(x, dy) + F^(1)(x, x - dy)) / 2, in closed form."""
    if not getattr(law, "binary", False):
        raise CapabilityError("symmetrized marginal in closed form needs a binary law")

    def marginal(x: float):
        m = law.first_marginal(x)
        if isinstance(m, AtomicMeasure):
            pairs = [(l, 0.5 * w) for l, w in zip(m.locations, m.weights)]
            pairs += [(x - l, 0.5 * w) for l, w in zip(m.locations, m.weights)]
            return _atoms(pairs)
        if isinstance(m, DensityMeasure):
            f = m.density
            return DensityMeasure(lambda y: 0.5 * (f(y) + f(x - y)), 0.0, float(x))
        raise CapabilityError(f"unsupported marginal {type(m).__name__}")

    return marginal


def _mean_se(values: np.ndarray) -> tuple:
    m = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return m, se


def marginal_intensity_mc(law: FragLaw, x: float, phi, samples: int, seed: int) -> tuple:
    """Monte Carlo estimate of the integral of phi against F_sym^(1)(x, .), with its standard error."""
    rng = stream(seed, 0, DRIFT)
    vals = np.empty(samples)
    for s in range(samples):
        vals[s] = sum(phi(z) for z in law.sample_fragments(x, rng))
    m, se = _mean_se(vals)
    rate = float(law.total_rate(x))
    return rate * m, rate * se


def mass_identity_check(law: FragLaw, x: float, samples: int = 10_000, seed: int = 0) -> bool:
    """Check F(x, Z) = (1/x) * integral of y F_sym^(1)(x, dy)."""
    rate = float(law.total_rate(x))
    if getattr(law, "binary", False):
        try:
            m = binary_sym_marginal(law)(x)
        except CapabilityError:
            m = None
        if m is not None:
            return abs(m.integrate(lambda y: y) / x - rate) <= 1e-10 * max(rate, 1e-300)
    est, se = marginal_intensity_mc(law, x, lambda y: y, samples, seed)
    return abs(est / x - rate) <= 4.0 * se / x + 1e-12 * rate


@dataclass(frozen=True)
class MassFlowFragLaw:
    """Next-size law of the mass flow model: draw fragments, keep one with probability z_i / x."""

    law: FragLaw

    def total_rate(self, x):
        return self.law.total_rate(x)

    def sample_next(self, x: float, rng: np.random.Generator) -> float:
        z = self.law.sample_fragments(x, rng)
        target = rng.random() * z.sum()
        acc = 0.0
        for zi in z:
            acc += zi
            if target < acc:
                return float(zi)
        return float(z[-1])

    def outcomes(self, x: float):
        outs = self.law.outcomes(x)
        if outs is None:
            return None
        merged: dict = {}
        for p, z in outs:
            tot = float(sum(z))
            for zi in z:
                merged[zi] = merged.get(zi, 0.0) + p * zi / tot
        return sorted(((p, y) for y, p in merged.items()), key=lambda t: t[1])


def massflow_from_frag(law: FragLaw) -> MassFlowFragLaw:
    return MassFlowFragLaw(law)


def massflow_moment_ratio(mf: MassFlowFragLaw, x: float, alpha: float, samples: int, seed: int) -> tuple:
    """Monte Carlo mean (and standard error) of (Y/x)**alpha under the normalized next-size law."""
    if alpha <= 0:
        raise UsageError("alpha must be positive")
    rng = stream(seed, 0, DRIFT)
    vals = np.array([(mf.sample_next(x, rng) / x) ** alpha for _ in range(samples)])
    return _mean_se(vals)


def massflow_moment_ratio_exact(law: FragLaw, x: float, alpha: float) -> float:
    """Same ratio from the closed-form marginal: int (y/x)**(alpha+1) F_sym^(1)(x, dy) / F(x, Z)."""
    m = binary_sym_marginal(law)(x)
    return m.integrate(lambda y: (y / x) ** (alpha + 1)) / float(law.total_rate(x))


# ---------------------------------------------------------------------------
# source and efflux


class SourceTerm:
    total: float
    first_moment: float
    upper: float

    def sample(self, rng):  # pragma: no cover - abstract
        raise NotImplementedError

    def sample_mass_biased(self, rng) -> float:
        """Draw from x S(dx) / int x S by rejection against the support bound ``upper``."""
        while True:
            x = self.sample(rng)
            if rng.random() * self.upper < x:
                return x

    def integrate(self, phi) -> float:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class PointSource(SourceTerm):
    x: float = 1.0
    rate: float = 1.0

    @property
    def total(self):
        return float(self.rate)

    @property
    def first_moment(self):
        return float(self.rate * self.x)

    @property
    def upper(self):
        return float(self.x)

    def sample(self, rng):
        return float(self.x)

    def sample_mass_biased(self, rng):
        return float(self.x)

    def integrate(self, phi):
        return float(self.rate * phi(self.x))


@dataclass(frozen=True)
class DiscreteSource(SourceTerm):
    sizes: tuple = (1.0,)
    weights: tuple = (1.0,)

    def __post_init__(self):
        if len(self.sizes) != len(self.weights) or not self.sizes:
            raise UsageError("discrete source needs matching nonempty sizes and weights")
        if min(self.sizes) <= 0 or min(self.weights) < 0:
            raise UsageError("source sizes must be positive and weights nonnegative")

    @property
    def total(self):
        return float(sum(self.weights))

    @property
    def first_moment(self):
        return float(sum(x * w for x, w in zip(self.sizes, self.weights)))

    @property
    def upper(self):
        return float(max(self.sizes))

    def sample(self, rng):
        target = rng.random() * self.total
        acc = 0.0
        for x, w in zip(self.sizes, self.weights):
            acc += w
            if target < acc:
                return float(x)
        return float(self.sizes[-1])

    def integrate(self, phi):
        return float(sum(w * phi(x) for x, w in zip(self.sizes, self.weights)))


def point_source(x: float, rate: float = 1.0) -> SourceTerm:
    return PointSource(float(x), float(rate))


def discrete_source(sizes: Sequence[float], weights: Sequence[float]) -> SourceTerm:
    return DiscreteSource(tuple(map(float, sizes)), tuple(map(float, weights)))


@dataclass(frozen=True)
class PowerEfflux:
    """e(x) = c * x**p."""

    c: float = 1.0
    p: float = 0.0

    def __call__(self, x):
        return self.c * np.power(x, self.p)


def power_efflux(c: float = 1.0, p: float = 0.0) -> PowerEfflux:
    return PowerEfflux(float(c), float(p))


# ---------------------------------------------------------------------------
# registry used by the CLI config

_RATES = {
    "power": lambda p: PowerRate(float(p.get("alpha", 1.0)), float(p.get("c", 1.0)),
                                 float(p.get("offset", 0.0))),
    "monomial": lambda p: MonomialRate(float(p.get("p", 1.0)), float(p.get("c", 1.0))),
    "affine": lambda p: AffineRate(float(p.get("c", 1.0))),
    "neglog": lambda p: NegLogRate(float(p.get("c", 1.0))),
    "constant": lambda p: ConstantRate(float(p.get("c", 1.0))),
}

_KAPPAS = {
    "half": lambda p: HalfKappa(),
    "shifted_half": lambda p: ShiftedHalfKappa(),
    "fraction": lambda p: FractionKappa(float(p.get("r", 0.5))),
}

_COAGS = {
    "constant": lambda p: ConstantKernel(float(p.get("c", 1.0))),
    "additive": lambda p: AdditiveKernel(float(p.get("c", 1.0))),
    "multiplicative": lambda p: MultiplicativeKernel(float(p.get("c", 1.0))),
    "product_power": lambda p: ProductPowerKernel(float(p["beta"]), float(p.get("c", 1.0))),
}


def _lookup(table: dict, spec, what: str):
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise UsageError(f"{what} spec must be an object with a 'name' field")
    try:
        builder = table[spec["name"]]
    except KeyError:
        raise UsageError(f"unknown {what} {spec['name']!r}; known: {sorted(table)}") from None
    try:
        return builder(spec)
    except KeyError as exc:
        raise UsageError(f"{what} {spec['name']!r} is missing parameter {exc.args[0]!r}") from None


def rate_from_spec(spec):
    return _lookup(_RATES, spec, "rate function")


def kappa_from_spec(spec):
    return _lookup(_KAPPAS, spec, "kappa")


def coag_from_spec(spec) -> CoagKernel:
    return _lookup(_COAGS, spec, "coagulation kernel")


def frag_from_spec(spec) -> FragLaw:
    if not isinstance(spec, dict) or "name" not in spec:
        raise UsageError("fragmentation spec must be an object with a 'name' field")
    rate = rate_from_spec(spec.get("rate", {"name": "power"}))
    if spec["name"] == "uniform_binary":
        return UniformBinary(rate)
    if spec["name"] == "deterministic_binary":
        return DeterministicBinary(rate, kappa_from_spec(spec.get("kappa", "half")))
    raise UsageError(f"unknown fragmentation law {spec['name']!r}; known: ['deterministic_binary', 'uniform_binary']")


def source_from_spec(spec) -> SourceTerm:
    if not isinstance(spec, dict) or "name" not in spec:
        raise UsageError("source spec must be an object with a 'name' field")
    if spec["name"] == "point":
        return point_source(float(spec.get("x", 1.0)), float(spec.get("rate", 1.0)))
    if spec["name"] == "discrete":
        return discrete_source(spec["sizes"], spec["weights"])
    raise UsageError(f"unknown source {spec['name']!r}; known: ['discrete', 'point']")


def efflux_from_spec(spec) -> PowerEfflux:
    if not isinstance(spec, dict) or spec.get("name") != "power":
        raise UsageError("efflux spec must be {'name': 'power', 'c': ..., 'p': ...}")
    return power_efflux(float(spec.get("c", 1.0)), float(spec.get("p", 0.0)))
