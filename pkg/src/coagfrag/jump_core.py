"""Minimal jump processes over arbitrary state spaces.

A law is any object with ``rate(state)`` and ``sample_next(state, rng)``.
Two optional capabilities are recognised:

``atoms(state)``
    finite decomposition of the jump kernel into :class:`Atom` objects whose
    weights sum to the total rate.  Atoms with a fixed ``successor`` are
    enumerated exactly by :func:`drift`; the rest are sampled.
``stepper(state)``
    an incremental simulator (``rate()``, ``step(rng)``, ``view()``,
    ``snapshot()``) that keeps caches between jumps.  Laws without one are
    driven through :class:`LawStepper`.

The engine never divides by a zero rate: a state with rate 0 is absorbing and
ends the trajectory.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import ModelError, UsageError
from .rng import DRIFT, EVENTS, ExponentialClock, stream

RATE_CEILING = 1e12
MAX_JUMPS = 10**6
TAIL_WINDOW = 64
TAIL_TOL = 1e-6


@dataclass(frozen=True)
class Atom:
    """One piece of a jump kernel: ``weight`` plus either a fixed successor or a sampler."""

    weight: float
    successor: Any = None
    sampler: Optional[Callable[[np.random.Generator], Any]] = None

    @property
    def exact(self) -> bool:
        return self.sampler is None


class LawStepper:
    """Drives a law that has no incremental stepper of its own."""

    __slots__ = ("law", "state", "_rate")

    def __init__(self, law, state):
        self.law = law
        self.state = state
        self._rate = None

    def rate(self) -> float:
        if self._rate is None:
            self._rate = float(self.law.rate(self.state))
        return self._rate

    def step(self, rng):
        self.state = self.law.sample_next(self.state, rng)
        self._rate = None
        return None

    def view(self):
        return self.state

    def snapshot(self):
        return self.state


def make_stepper(law, state):
    factory = getattr(law, "stepper", None)
    return factory(state) if factory is not None else LawStepper(law, state)


class StopReason(str, enum.Enum):
    ABSORBED = "absorbed"
    GUARD = "guard"
    RATE_CEILING = "rate_ceiling"
    MAX_JUMPS = "max_jumps"
    HORIZON = "horizon"


@dataclass(frozen=True)
class StopRule:
    max_jumps: int = MAX_JUMPS
    time_horizon: float = math.inf
    rate_ceiling: float = RATE_CEILING
    state_guard: Optional[Callable[[Any], Optional[str]]] = None

    def __post_init__(self):
        if self.max_jumps < 1:
            raise UsageError("max_jumps must be at least 1")
        if not self.time_horizon > 0:
            raise UsageError("time_horizon must be positive")
        if not self.rate_ceiling > 0:
            raise UsageError("rate_ceiling must be positive")


@dataclass
class Trajectory:
    """Embedded chain of one run together with its rates and jump times.

    ``states`` holds every visited state when recorded, otherwise only the
    initial and final ones.  ``rates``, ``jump_times`` and
    ``inv_rate_partial_sums`` always have one entry per visited state and
    ``waits`` one entry per jump.
    """

    states: list
    rates: list
    waits: list
    jump_times: list
    inv_rate_partial_sums: list
    seed: int
    replicate: int = 0
    stop_reason: StopReason = StopReason.MAX_JUMPS
    boundary: Optional[str] = None
    t_final: float = 0.0
    states_recorded: bool = True
    events: Optional[list] = None
    marks: Optional[list] = None

    @property
    def jumps(self) -> int:
        return len(self.waits)

    @property
    def final_state(self):
        return self.states[-1]

    def tau(self, j: int) -> float:
        """Jump time after ``j`` jumps, frozen at the last recorded jump if the run stopped earlier."""
        return self.jump_times[min(j, len(self.jump_times) - 1)]


def _check_rate(lam: float, where) -> float:
    if not math.isfinite(lam):
        raise ModelError(f"non-finite rate {lam!r} at {where!r}")
    if lam < 0:
        raise ModelError(f"negative rate {lam!r} at {where!r}")
    return lam


def simulate_chain(law, init, seed: int, stop: StopRule, *, replicate: int = 0,
                   record_states: bool = True, record_events: bool = False) -> Trajectory:
    """Simulate the minimal jump process until the first stop condition.

    Holding times are T_k / rate(zeta_k) with T_k = -ln(1 - U_k) taken in order
    from the replicate's holding stream, so the result is a pure function of
    (law, init, seed, replicate, stop).
    """
    stepper = make_stepper(law, init)
    clock = ExponentialClock(seed, replicate)
    rng = stream(seed, replicate, EVENTS)
    guard = stop.state_guard
    has_marks = hasattr(stepper, "mark")

    states = [stepper.snapshot()]
    rates: list = []
    waits: list = []
    times = [0.0]
    psums = [0.0]
    events: Optional[list] = [] if record_events else None
    marks: Optional[list] = [stepper.mark()] if has_marks else None
    t = 0.0
    psum = 0.0
    boundary = None
    jumps = 0

    while True:
        lam = stepper.rate()
        if not (0.0 <= lam < math.inf):
            _check_rate(lam, stepper.view())
        rates.append(lam)
        if lam == 0.0:
            reason = StopReason.ABSORBED
            break
        if guard is not None:
            boundary = guard(stepper.view())
            if boundary is not None:
                reason = StopReason.GUARD
                break
        if lam > stop.rate_ceiling:
            reason = StopReason.RATE_CEILING
            break
        if jumps >= stop.max_jumps:
            reason = StopReason.MAX_JUMPS
            break
        wait = clock.next() / lam
        if t + wait > stop.time_horizon:
            reason = StopReason.HORIZON
            break
        ev = stepper.step(rng)
        jumps += 1
        t += wait
        psum += 1.0 / lam
        waits.append(wait)
        times.append(t)
        psums.append(psum)
        if record_states:
            states.append(stepper.snapshot())
        if events is not None:
            events.append(ev)
        if marks is not None:
            marks.append(stepper.mark())

    if not record_states and jumps:
        states.append(stepper.snapshot())
    t_final = stop.time_horizon if reason is StopReason.HORIZON else t
    return Trajectory(states=states, rates=rates, waits=waits, jump_times=times,
                      inv_rate_partial_sums=psums, seed=seed, replicate=replicate,
                      stop_reason=reason, boundary=boundary, t_final=t_final,
                      states_recorded=record_states, events=events, marks=marks)


# ---------------------------------------------------------------------------
# explosion verdicts


class Verdict(str, enum.Enum):
    EXPLODED = "exploded"
    SURVIVED = "survived"
    ABSORBED = "absorbed"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ExplosionVerdict:
    kind: Verdict
    tau_lower: float
    tau_estimate: Optional[float]
    t_final: float
    terminal_rate: float
    jumps: int
    tail_slope: float
    stop_reason: StopReason
    boundary: Optional[str] = None

    @property
    def exploded(self) -> bool:
        return self.kind is Verdict.EXPLODED

    def to_json(self) -> dict:
        return {
            "verdict": self.kind.value,
            "tau_lower": self.tau_lower,
            "tau_estimate": self.tau_estimate,
            "t_final": self.t_final,
            "terminal_rate": self.terminal_rate,
            "jumps": self.jumps,
            "tail_slope": None if math.isnan(self.tail_slope) else self.tail_slope,
            "stop_reason": self.stop_reason.value,
            "boundary": self.boundary,
        }


def tail_slope(rates: Sequence[float], window: int) -> float:
    """Least-squares slope of log(rate) against jump index over the last ``window`` rates."""
    tail = np.asarray(rates[-window:], dtype=float)
    tail = tail[tail > 0]
    if tail.size < 2:
        return math.nan
    k = np.arange(tail.size, dtype=float)
    return float(np.polyfit(k, np.log(tail), 1)[0])


def geometric_tail(rate: float, slope: float) -> float:
    """Expected remaining time sum_{k>=0} 1/(rate e^{k g}); infinite unless g > 0."""
    if not slope > 0:
        return math.inf
    return 1.0 / (rate * -math.expm1(-slope))


def classify(traj: Trajectory, stop: StopRule, tail_window: int = TAIL_WINDOW,
             tail_tol: float = TAIL_TOL) -> ExplosionVerdict:
    reason = traj.stop_reason
    lam = traj.rates[-1]
    tau = traj.jump_times[-1]
    jumps = traj.jumps
    common = dict(t_final=traj.t_final, terminal_rate=lam, jumps=jumps,
                  stop_reason=reason, boundary=traj.boundary)

    if reason is StopReason.ABSORBED:
        return ExplosionVerdict(Verdict.ABSORBED, tau, None, tail_slope=math.nan, **common)

    if reason in (StopReason.GUARD, StopReason.RATE_CEILING):
        g = tail_slope(traj.rates, tail_window)
        tail = geometric_tail(lam, g)
        est = tau + tail if math.isfinite(tail) else tau
        return ExplosionVerdict(Verdict.EXPLODED, tau, est, tail_slope=g, **common)

    if reason is StopReason.HORIZON and len(traj.rates) >= tail_window:
        g = tail_slope(traj.rates, tail_window)
        if geometric_tail(lam, g) > tail_tol:
            return ExplosionVerdict(Verdict.SURVIVED, tau, None, tail_slope=g, **common)
        return ExplosionVerdict(Verdict.INCONCLUSIVE, tau, None, tail_slope=g, **common)

    g = tail_slope(traj.rates, tail_window)
    return ExplosionVerdict(Verdict.INCONCLUSIVE, tau, None, tail_slope=g, **common)


# ---------------------------------------------------------------------------
# drift criteria


@dataclass(frozen=True)
class TestFunction:
    """Bounded function on the state space; the bound is enforced on every evaluation."""

    fn: Callable[[Any], float]
    bound: float
    name: str = "eta"

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.bound > 0:
            raise UsageError("test function bound must be positive")

    def __call__(self, state) -> float:
        v = float(self.fn(state))
        if not abs(v) <= self.bound * (1 + 1e-12):
            raise ModelError(f"|{self.name}| = {abs(v)} exceeds its bound {self.bound}")
        return v


@dataclass(frozen=True)
class DriftReport:
    estimate: float
    std_error: float
    exact: bool
    epsilon_member: dict = field(default_factory=dict)

    def member(self, epsilon: float) -> bool:
        return self.estimate - 2.0 * self.std_error >= epsilon

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error, "exact": self.exact,
                "epsilon_member": {repr(k): v for k, v in self.epsilon_member.items()}}


def drift(law, state, eta: TestFunction, mc_samples: int = 1000, seed: int = 0,
          epsilons: Sequence[float] = (), rng: Optional[np.random.Generator] = None) -> DriftReport:
    """Integral of (eta(next) - eta(state)) against the jump kernel at ``state``.

    Atoms with fixed successors are summed exactly.  Sampled atoms are pooled
    into one mixture and estimated by Monte Carlo with ``mc_samples`` draws;
    laws without atoms are estimated from ``sample_next`` directly.
    """
    lam = float(law.rate(state))
    _check_rate(lam, state)
    eta0 = eta(state)

    def report(est, se, exact):
        rep = DriftReport(float(est), float(se), exact)
        return DriftReport(rep.estimate, rep.std_error, exact, {e: rep.member(e) for e in epsilons})

    if lam == 0.0:
        return report(0.0, 0.0, True)
    if rng is None:
        rng = stream(seed, 0, DRIFT)

    atoms_fn = getattr(law, "atoms", None)
    if atoms_fn is None:
        if mc_samples < 1:
            raise UsageError("mc_samples must be at least 1 for a law without atoms")
        vals = np.array([eta(law.sample_next(state, rng)) - eta0 for _ in range(mc_samples)])
        m, se = _mean_se(vals)
        return report(lam * m, lam * se, False)

    atoms = atoms_fn(state)
    total = math.fsum(a.weight for a in atoms)
    if abs(total - lam) > 1e-9 * lam:
        raise ModelError(f"atom weights sum to {total}, rate is {lam}")
    exact_part = math.fsum(a.weight * (eta(a.successor) - eta0) for a in atoms if a.exact and a.weight > 0)
    sampled = [a for a in atoms if not a.exact and a.weight > 0]
    if not sampled:
        return report(exact_part, 0.0, True)
    if mc_samples < 1:
        raise UsageError("mc_samples must be at least 1 when some atoms are sampled")
    w = np.array([a.weight for a in sampled])
    wsum = float(w.sum())
    cum = np.cumsum(w)
    picks = np.minimum(np.searchsorted(cum, rng.random(mc_samples) * cum[-1], side="right"), len(sampled) - 1)
    vals = np.array([eta(sampled[p].sampler(rng)) - eta0 for p in picks])
    m, se = _mean_se(vals)
    return report(exact_part + wsum * m, wsum * se, False)


def _mean_se(vals: np.ndarray):
    m = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return m, se


def check_region_criterion(law, states: Sequence, eta: TestFunction, epsilon: float,
                           mc_samples: int = 1000, seed: int = 0) -> list:
    """For each state, whether its drift certifies membership of the set {drift >= epsilon}.

    Only finitely many states can be audited this way; this is evidence about
    the trap region, not a proof that trajectories stay in it.
    """
    if not epsilon > 0:
        raise UsageError("epsilon must be positive")
    rng = stream(seed, 0, DRIFT)
    return [drift(law, s, eta, mc_samples, epsilons=(epsilon,), rng=rng).epsilon_member[epsilon]
            for s in states]


def martingale_statistic(traj: Trajectory, law, eta: TestFunction, mc_samples: int = 1000,
                         seed: int = 0) -> np.ndarray:
    """W_0..W_J with W_n = sum_{k<n} [E(eta(zeta_{k+1}) | zeta_k) - eta(zeta_k)] - eta(zeta_n)."""
    if not traj.states_recorded:
        raise UsageError("martingale statistic needs a trajectory with recorded states")
    states = traj.states
    if not states:
        raise UsageError("empty trajectory")
    rng = stream(seed, traj.replicate, DRIFT)
    out = np.empty(len(states))
    acc = 0.0
    for k, s in enumerate(states):
        out[k] = acc - eta(s)
        if k + 1 < len(states):
            lam = traj.rates[k]
            if lam > 0:
                acc += drift(law, s, eta, mc_samples, rng=rng).estimate / lam
    return out


# ---------------------------------------------------------------------------
# simple laws


@dataclass(frozen=True)
class PureBirthLaw:
    """States 1, 2, ...; from k the chain moves to k + 1 at rate rate_fn(k)."""

    rate_fn: Callable[[int], float]

    def rate(self, state) -> float:
        lam = float(self.rate_fn(state))
        if not (lam > 0 and math.isfinite(lam)):
            raise ModelError(f"pure-birth rate must be positive and finite, got {lam!r} at {state}")
        return lam

    def sample_next(self, state, rng):
        return state + 1

    def atoms(self, state):
        return [Atom(self.rate(state), successor=state + 1)]


def pure_birth_law(rate_fn: Callable[[int], float]) -> PureBirthLaw:
    return PureBirthLaw(rate_fn)


@dataclass(frozen=True)
class OneDimLaw:
    """Process on [1, inf) with rate ``rate_fn`` and next-state sampler ``next_sampler(x, rng)``.

    ``successors(x)``, when given, lists (probability, next state) pairs and
    makes drift computations exact.
    """

    rate_fn: Callable[[float], float]
    next_sampler: Callable
    successors: Optional[Callable] = None

    def _check(self, state):
        if not state >= 1:
            raise ModelError(f"one-dimensional state must be >= 1, got {state!r}")

    def rate(self, state) -> float:
        self._check(state)
        return float(self.rate_fn(state))

    def sample_next(self, state, rng):
        self._check(state)
        return self.next_sampler(state, rng)

    def atoms(self, state):
        lam = self.rate(state)
        if self.successors is None:
            return [Atom(lam, sampler=lambda rng, s=state: self.next_sampler(s, rng))]
        return [Atom(lam * p, successor=y) for p, y in self.successors(state)]


def one_dim_law(rate_fn, next_sampler, successors=None) -> OneDimLaw:
    return OneDimLaw(rate_fn, next_sampler, successors)
