"""Bounded test functions for drift audits, plus the lower bounds they are audited against.

Every function here returns a :class:`~coagfrag.jump_core.TestFunction`
whose bound is known in closed form on the region where it is nonzero.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import UsageError
from .jump_core import TestFunction
from .particle_state import ParticleSystem


def _positive(name: str, value: float) -> float:
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value!r}")
    return float(value)


def _count(L) -> int:
    if int(L) != L or L < 1:
        raise UsageError(f"particle count L must be a positive integer, got {L!r}")
    return int(L)


def power_tail(beta: float, C: float, L: int, n: int) -> TestFunction:
    """-(1/n) sum x_i^(-beta) on states with N == L and every size >= C, zero elsewhere."""
    beta, C, L = _positive("beta", beta), _positive("C", C), _count(L)

    def fn(xi: ParticleSystem) -> float:
        if xi.N != L or xi.sizes.min() < C:
            return 0.0
        return -float(np.sum(xi.sizes ** -beta)) / xi.n

    return TestFunction(fn, L * C ** -beta / n, f"power_tail(beta={beta})")


def moment(alpha: float, C: float, L: int, n: int) -> TestFunction:
    """-(1/n) sum x_i^alpha on states with N == L and every size <= C, zero elsewhere."""
    alpha, C, L = _positive("alpha", alpha), _positive("C", C), _count(L)

    def fn(xi: ParticleSystem) -> float:
        if xi.N != L or xi.sizes.max() > C:
            return 0.0
        return -float(np.sum(xi.sizes ** alpha)) / xi.n

    return TestFunction(fn, L * C ** alpha / n, f"moment(alpha={alpha})")


def saturating_count(beta: float) -> TestFunction:
    """g(N/n) with g(s) = s^beta / (1 + s^beta); increasing in the particle count and bounded by 1."""
    beta = _positive("beta", beta)

    def fn(xi: ParticleSystem) -> float:
        s = (xi.N / xi.n) ** beta
        return s / (1.0 + s)

    return TestFunction(fn, 1.0, f"saturating_count(beta={beta})")


def constant(c: float = 1.0) -> TestFunction:
    return TestFunction(lambda xi: c, max(abs(c), 1.0), "constant")


def additive(phi: Callable, bound: float, name: str = "additive") -> TestFunction:
    """(1/n) sum phi(x_i); the caller supplies a bound valid on the states it will be used on."""
    return TestFunction(lambda xi: float(np.sum(phi(xi.sizes))) / xi.n if xi.N else 0.0, bound, name)


def from_spec(spec: dict, n: int) -> TestFunction:
    """Build a catalog function from a config object such as {"name": "power_tail", "beta": 0.5, ...}."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise UsageError("eta spec must be an object with a 'name' field")
    name = spec["name"]
    try:
        if name == "power_tail":
            return power_tail(float(spec["beta"]), float(spec["C"]), int(spec["L"]), n)
        if name == "moment":
            return moment(float(spec["alpha"]), float(spec["C"]), int(spec["L"]), n)
        if name == "saturating":
            return saturating_count(float(spec.get("beta", 1.0)))
        if name == "constant":
            return constant(float(spec.get("c", 1.0)))
    except KeyError as exc:
        raise UsageError(f"eta {name!r} is missing parameter {exc.args[0]!r}") from None
    raise UsageError(f"unknown eta {name!r}; known: ['constant', 'moment', 'power_tail', 'saturating']")


# ---------------------------------------------------------------------------
# lower bounds on the drift of the functions above


def power_tail_drift_bound(beta: float, alpha: float, kbar11: float, C: float, L: int, n: int) -> float:
    """(1 - 2^-beta) Kbar(1,1) L C^(alpha-1-beta) / n^2 for mass flow coagulation, Kbar of degree alpha."""
    return (1.0 - 2.0 ** -beta) * kbar11 * L * C ** (alpha - 1.0 - beta) / n**2


def moment_drift_bound(c_frag: float, gamma: float, L: int, n: int) -> float:
    """C_F (1 - gamma) L / n for mass flow fragmentation with F(x, X) >= C_F x^-alpha."""
    return c_frag * (1.0 - gamma) * L / n


def saturating_drift_bound(c_frag: float, alpha: float, beta: float, N: int, C: float, n: int) -> float:
    """(C_F/n) g'((N+1)/n) N^(1+alpha) (C n)^(-alpha) for direct fragmentation on {mass/n <= C}."""
    s = (N + 1) / n
    gprime = beta * s ** (beta - 1.0) / (1.0 + s**beta) ** 2
    return c_frag / n * gprime * N ** (1.0 + alpha) * (C * n) ** -alpha


def saturating_drift_exact(frag_total: float, beta: float, N: int, n: int) -> float:
    """Drift of g(N/n) under binary fragmentation: total fragmentation rate times g((N+1)/n) - g(N/n)."""
    def g(s):
        p = s**beta
        return p / (1.0 + p)

    return frag_total * (g((N + 1) / n) - g(N / n))


__all__ = ["power_tail", "moment", "saturating_count", "constant", "additive", "from_spec",
           "power_tail_drift_bound", "moment_drift_bound", "saturating_drift_bound",
           "saturating_drift_exact"]
