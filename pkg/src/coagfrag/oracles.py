"""Reference values computed without the particle simulators.

Truncated Smoluchowski and mass flow ODEs integrated with classical RK4,
moment-ODE gel times, and closed forms for the deterministic and two-branch
chains used in the validation suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DivergenceError, DomainError, StepSizeError, UsageError

NEGATIVE_TOL = 1e-9
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class TruncatedDensities:
    """Densities on sizes 1..xmax at time t; ``flux`` is the mass carried past xmax so far."""

    xmax: int
    c: np.ndarray
    t: float
    flux: float = 0.0

    def __getitem__(self, k: int) -> float:
        return float(self.c[k - 1])

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.xmax + 1, dtype=float)

    def to_csv(self) -> str:
        rows = ["x,c"] + [f"{k},{v!r}" for k, v in zip(range(1, self.xmax + 1), self.c.tolist())]
        return "\n".join(rows) + "\n"


def _kernel_matrix(K, xmax: int) -> np.ndarray:
    s = np.arange(1, xmax + 1, dtype=float)
    M = np.broadcast_to(np.asarray(K(s[:, None], s[None, :]), dtype=float), (xmax, xmax)).copy()
    if not np.all(np.isfinite(M)):
        raise UsageError("kernel is not finite on 1..xmax")
    return M


def _anti_diagonal_index(xmax: int) -> np.ndarray:
    a = np.arange(xmax)
    return (a[:, None] + a[None, :]).ravel()


def _gain(A: np.ndarray, c: np.ndarray, index: np.ndarray) -> np.ndarray:
    """g_k = sum_{y=1}^{k-1} A[k-y, y] c_{k-y} c_y for k = 1..xmax (0-based arrays).

    Entry (a, b) of the 0-based matrix belongs to size a + b + 2, so the
    gains are anti-diagonal sums, collected with one bincount.
    """
    xmax = c.size
    sums = np.bincount(index, weights=(A * np.outer(c, c)).ravel(), minlength=2 * xmax)
    out = np.zeros(xmax)
    out[1:] = sums[: xmax - 1]
    return out


def _rk4(rhs, y0: np.ndarray, t: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise UsageError("dt must be positive")
    if t < 0:
        raise UsageError("t must be nonnegative")
    steps = int(math.ceil(t / dt - 1e-12)) if t > 0 else 0
    h = t / steps if steps else 0.0
    y = y0.copy()
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if y[:-1].min() < -NEGATIVE_TOL:
            raise StepSizeError(f"density fell to {y[:-1].min()} with step {h}; reduce dt")
    return y


def _initial(c0, xmax: int) -> np.ndarray:
    c = np.zeros(xmax)
    if isinstance(c0, dict):
        for k, v in c0.items():
            if not 1 <= int(k) <= xmax:
                raise UsageError(f"initial size {k} outside 1..{xmax}")
            c[int(k) - 1] = float(v)
    else:
        arr = np.asarray(c0, dtype=float)
        c[: arr.size] = arr[:xmax]
    if c.min() < 0:
        raise UsageError("initial densities must be nonnegative")
    return c


def smoluchowski_ode(K, c0, xmax: int, t: float, dt: float = 1e-3) -> TruncatedDensities:
    """Number densities of the discrete coagulation equation truncated at ``xmax``.

    Products larger than ``xmax`` leave the system; the mass they carry is
    integrated alongside the densities and reported as ``flux``.
    ``c0`` is a dict {size: density} or an array indexed from size 1.
    """
    A = _kernel_matrix(K, xmax)
    s = np.arange(1, xmax + 1, dtype=float)
    over = (s[:, None] + s[None, :]) > xmax
    Aover = A * over * (s[:, None] + s[None, :])
    index = _anti_diagonal_index(xmax)

    def rhs(y):
        c = y[:-1]
        dc = 0.5 * _gain(A, c, index) - c * (A @ c)
        flux = 0.5 * float(c @ Aover @ c)
        return np.append(dc, flux)

    y = _rk4(rhs, np.append(_initial(c0, xmax), 0.0), t, dt)
    return TruncatedDensities(xmax, y[:-1], float(t), float(y[-1]))


def massflow_ode(K, ct0, xmax: int, t: float, dt: float = 1e-3) -> TruncatedDensities:
    """Mass densities c~(t, x) = x c(t, x) of the mass flow equation truncated at ``xmax``."""
    A = _kernel_matrix(K, xmax)
    s = np.arange(1, xmax + 1, dtype=float)
    Ay = A / s[None, :]
    over = (s[:, None] + s[None, :]) > xmax
    Aover = Ay * over
    index = _anti_diagonal_index(xmax)

    def rhs(y):
        c = y[:-1]
        dc = _gain(Ay, c, index) - c * (Ay @ c)
        return np.append(dc, float(c @ Aover @ c))

    y = _rk4(rhs, np.append(_initial(ct0, xmax), 0.0), t, dt)
    return TruncatedDensities(xmax, y[:-1], float(t), float(y[-1]))


def constant_kernel_density(t: float, k: int) -> float:
    """c(t, k) = t^(k-1) / (1+t)^(k+1) for K = 2 from a unit monodisperse start."""
    return t ** (k - 1) / (1.0 + t) ** (k + 1)


def gel_time_multiplicative(m2_0: float) -> float:
    """Blowup time of m2' = m2^2, the second moment under K = xy: 1 / m2(0)."""
    if not m2_0 > 0:
        raise UsageError("m2_0 must be positive")
    return 1.0 / m2_0


def second_moment_blowup(m2_0: float, dt: float = 1e-4, cap: float = 1e12) -> float:
    """First time an RK4 integration of m2' = m2^2 exceeds ``cap``; approaches 1/m2_0 from above."""
    m, t = float(m2_0), 0.0
    while m < cap:
        k1 = m * m
        k2 = (m + 0.5 * dt * k1) ** 2
        k3 = (m + 0.5 * dt * k2) ** 2
        k4 = (m + dt * k3) ** 2
        m += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        if not math.isfinite(m):
            break
        # shrink the step as the solution steepens so the crossing is resolved
        dt = min(dt, 0.01 / m)
    return t


def mf1_expected_explosion_time(alpha: float) -> float:
    """sum_k 2^(-k(alpha-1)) = 1 / (1 - 2^(1-alpha)); infinite for alpha <= 1."""
    if not alpha > 1:
        raise DivergenceError(f"mean explosion time diverges for alpha = {alpha} <= 1")
    return 1.0 / (1.0 - 2.0 ** (1.0 - alpha))


def mf1_rate(k: int, alpha: float) -> float:
    """Total rate after k doublings of a single particle: 2^(k(alpha-1))."""
    return 2.0 ** (k * (alpha - 1.0))


def _check_split_start(x0: float):
    if not x0 > 0.5:
        raise DomainError(f"x0 must exceed 1/2, got {x0!r}")


def shifted_half_nonexplosion_prob(x0: float) -> float:
    """1 / (2 x0): probability of the path that always keeps the larger fragment."""
    _check_split_start(x0)
    return 1.0 / (2.0 * x0)


def shifted_half_slowest_path(x0: float, k: int) -> float:
    """k-th size on the path that always keeps the larger fragment: (2 x0 + 2^k - 1) / 2^(k+1)."""
    _check_split_start(x0)
    if k < 0:
        raise UsageError("k must be nonnegative")
    return (2.0 * x0 + 2.0**k - 1.0) / 2.0 ** (k + 1)


def shifted_half_survival_probability(x0, depth: int = 200) -> float:
    """Probability that the mass flow chain with the shifted-half split stays above 1/2 for ``depth`` jumps.

    From x > 1/2 the chain moves to kappa(x) = x/2 + 1/4 with probability
    kappa(x)/x and to x - kappa(x) = x/2 - 1/4 otherwise.  The tree is summed
    in exact rational arithmetic, because the larger-fragment path approaches
    1/2 at rate 2^-k and leaves double precision after about 52 jumps.  The
    value decreases in ``depth`` towards the probability of never dropping to
    1/2, with error of order 2^-depth.
    """
    _check_split_start(float(x0))
    half, quarter = Fraction(1, 2), Fraction(1, 4)

    @lru_cache(maxsize=None)
    def survive(x: Fraction, d: int) -> Fraction:
        if x <= half:
            return Fraction(0)
        if d == 0:
            return Fraction(1)
        big = x / 2 + quarter
        p_big = big / x
        return p_big * survive(big, d - 1) + (1 - p_big) * survive(x - big, d - 1)

    return float(survive(Fraction(x0), depth))


def exact_split_jumps(x0: float, mantissa_bits: int = 53) -> int:
    """Number of jumps for which every state of the shifted-half chain from x0 is exact in double precision.

    Writing x0 = p / 2^b with b >= 2, both successors of p / 2^b are of the
    form q / 2^(b+1) with q < 2^(b+1) (x0 + 1).  After k jumps the numerators
    stay below (x0 + 1) 2^(b+k), so the chain is computed without rounding
    (and every comparison with 1/2 is exact) while that is below 2^53.
    Returns 0 when even the start needs the full mantissa.
    """
    _check_split_start(x0)
    _, den = float(x0).as_integer_ratio()
    b = max(den.bit_length() - 1, 2)
    top = math.ceil(math.log2(float(x0) + 1.0))
    return max(0, mantissa_bits - b - top)


def halving_chain_rate(k: int) -> float:
    """Rate after k halvings with F(x) = 1 - ln x and binary splits: (k ln 2 + 1) / 2."""
    if k < 0:
        raise UsageError("k must be nonnegative")
    return (k * math.log(2.0) + 1.0) / 2.0


def halving_chain_mean_tau(jumps: int) -> float:
    """Expected time of the given jump: sum_{k<jumps} 2 / (k ln 2 + 1)."""
    return math.fsum(1.0 / halving_chain_rate(k) for k in range(jumps))


def fibonacci_path(k: int) -> tuple:
    """k-th state of the two-particle path where each particle in turn absorbs the other.

    (1,1) -> (1,2) -> (3,2) -> (3,5) -> (8,5) -> ...
    """
    if k < 0:
        raise UsageError("k must be nonnegative")
    x, y = 1, 1
    for step in range(1, k + 1):
        if step % 2:
            y += x
        else:
            x += y
    return (x, y)
