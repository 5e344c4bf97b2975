"""Counter-based random streams keyed by (seed, replicate, purpose).

Every trajectory draws its holding times and its event choices from two
independent Philox streams, so results depend only on the seed and the
replicate index and never on scheduling.  Drift Monte Carlo uses a third
stream and cannot perturb trajectories.
"""
from __future__ import annotations

import numpy as np

HOLDING = 0
EVENTS = 1
DRIFT = 2
INIT = 3

_BLOCK = 256


def stream(seed: int, replicate: int = 0, purpose: int = EVENTS) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


class ExponentialClock:
    """Unit-mean exponentials T_0, T_1, ... by inverse CDF, T = -ln(1 - U)."""

    __slots__ = ("_rng", "_buf", "_pos", "drawn")

    def __init__(self, seed: int, replicate: int = 0):
        self._rng = stream(seed, replicate, HOLDING)
        self._buf = np.empty(0)
        self._pos = 0
        self.drawn = 0

    def next(self) -> float:
        if self._pos == self._buf.shape[0]:
            self._buf = -np.log1p(-self._rng.random(_BLOCK))
            self._pos = 0
        t = self._buf[self._pos]
        self._pos += 1
        self.drawn += 1
        return float(t)


def holding_times(seed: int, replicate: int, count: int) -> np.ndarray:
    """Regenerate the first ``count`` holding-time variables of a replicate."""
    rng = stream(seed, replicate, HOLDING)
    blocks = -(-count // _BLOCK) if count else 0
    out = np.concatenate([-np.log1p(-rng.random(_BLOCK)) for _ in range(blocks)]) if blocks else np.empty(0)
    return out[:count]
