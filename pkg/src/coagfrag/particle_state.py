"""Weighted particle systems and their jump transformations.

A state is the measure (1/n) * sum_i delta_{x_i}.  Sizes live in a flat
array; deletion is swap-remove (the last particle moves into the hole), so
particle order carries no meaning.  All functions here are pure: they return
a new :class:`ParticleSystem` and leave the input untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import UsageError

DUST = "dust"
GEL = "gel"
BLOWUP = "blowup"


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    n: int
    sizes: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise UsageError(f"weight inverse n must be a positive integer, got {self.n!r}")
        arr = np.array(self.sizes, dtype=float).reshape(-1)
        if arr.size and not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
            raise UsageError("particle sizes must be strictly positive and finite")
        arr.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sizes", arr)

    @classmethod
    def _trusted(cls, n: int, sizes: np.ndarray) -> "ParticleSystem":
        # skips validation and copying; callers guarantee the invariants
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "sizes", sizes)
        return obj

    @classmethod
    def monodisperse(cls, n: int, x0: float, count: int) -> "ParticleSystem":
        return cls(n, np.full(int(count), float(x0)))

    @property
    def N(self) -> int:
        return int(self.sizes.shape[0])

    def __len__(self) -> int:
        return self.N

    def moment(self, p: float) -> float:
        return moment(self, p)

    def same_as(self, other: "ParticleSystem") -> bool:
        """Equality as measures (order of particles ignored)."""
        return self.n == other.n and np.array_equal(np.sort(self.sizes), np.sort(other.sizes))

    def to_json(self) -> dict:
        return {"n": self.n, "sizes": [float(s) for s in self.sizes]}

    @classmethod
    def from_json(cls, d: dict) -> "ParticleSystem":
        return cls(int(d["n"]), np.asarray(d["sizes"], dtype=float))

    def __repr__(self) -> str:
        return f"ParticleSystem(n={self.n}, sizes={self.sizes.tolist()})"


def moment(xi: ParticleSystem, p: float) -> float:
    """(1/n) * sum_i x_i**p."""
    if xi.N == 0:
        return 0.0
    return float(np.sum(xi.sizes ** p)) / xi.n


def _check_index(xi: ParticleSystem, i: int) -> int:
    if not (0 <= i < xi.N) or int(i) != i:
        raise UsageError(f"particle index {i!r} out of range for N={xi.N}")
    return int(i)


def _swap_remove(arr: np.ndarray, i: int) -> np.ndarray:
    out = arr.copy()
    out[i] = out[-1]
    return out[:-1]


def apply_source(xi: ParticleSystem, x: float) -> ParticleSystem:
    if not (x > 0 and math.isfinite(x)):
        raise UsageError(f"source size must be positive and finite, got {x!r}")
    return ParticleSystem._trusted(xi.n, np.append(xi.sizes, float(x)))


def apply_efflux(xi: ParticleSystem, i: int) -> ParticleSystem:
    i = _check_index(xi, i)
    return ParticleSystem._trusted(xi.n, _swap_remove(xi.sizes, i))


def apply_frag(xi: ParticleSystem, i: int, fragments: Sequence[float]) -> ParticleSystem:
    i = _check_index(xi, i)
    z = np.asarray(fragments, dtype=float).reshape(-1)
    if z.size == 0 or not np.all(z > 0):
        raise UsageError("fragments must be a nonempty list of positive sizes")
    return ParticleSystem._trusted(xi.n, np.concatenate([_swap_remove(xi.sizes, i), z]))


def apply_coag_direct(xi: ParticleSystem, i: int, j: int) -> ParticleSystem:
    i = _check_index(xi, i)
    j = _check_index(xi, j)
    if i == j:
        raise UsageError("direct coagulation needs two distinct particles")
    merged = xi.sizes[i] + xi.sizes[j]
    rest = _swap_remove(_swap_remove(xi.sizes, max(i, j)), min(i, j))
    return ParticleSystem._trusted(xi.n, np.append(rest, merged))


def apply_frag_massflow(xi: ParticleSystem, i: int, y: float) -> ParticleSystem:
    i = _check_index(xi, i)
    if not y > 0:
        raise UsageError(f"mass-flow fragment must be positive, got {y!r}")
    out = xi.sizes.copy()
    out[i] = float(y)
    return ParticleSystem._trusted(xi.n, out)


def apply_coag_massflow(xi: ParticleSystem, i: int, j: int) -> ParticleSystem:
    """Particle i absorbs the size of particle j; j itself is unchanged (i == j doubles)."""
    i = _check_index(xi, i)
    j = _check_index(xi, j)
    out = xi.sizes.copy()
    out[i] = xi.sizes[i] + xi.sizes[j]
    return ParticleSystem._trusted(xi.n, out)


@dataclass(frozen=True)
class BoundaryGuards:
    x_min: float = 1e-280
    x_max: float = 1e280
    N_max: int = 10**7

    def __post_init__(self):
        if not (0 <= self.x_min < self.x_max):
            raise UsageError("guards need 0 <= x_min < x_max")
        if self.N_max < 1:
            raise UsageError("N_max must be positive")

    def __call__(self, xi: ParticleSystem) -> Optional[str]:
        return boundary_check(xi, self)


def boundary_check(xi: ParticleSystem, guards: BoundaryGuards) -> Optional[str]:
    """Name of the boundary the state has reached, or None."""
    if xi.N > guards.N_max:
        return BLOWUP
    if xi.N == 0:
        return None
    s = xi.sizes
    if s.min() < guards.x_min:
        return DUST
    if s.max() > guards.x_max:
        return GEL
    return None


@dataclass(frozen=True)
class SizeTrap:
    """State guard firing once any particle is at most ``threshold`` (or above, with ``above``)."""

    threshold: float
    above: bool = False
    label: str = "trap"

    def __call__(self, xi: ParticleSystem) -> Optional[str]:
        if xi.N == 0:
            return None
        if self.above:
            return self.label if xi.sizes.max() > self.threshold else None
        return self.label if xi.sizes.min() <= self.threshold else None
