"""Mass flow process: particles carry mass, and their count tracks total mass.

Jump rates with weight 1/n:

* source        n * int x S(dx), adds one particle drawn from x S(dx) / int x S
* efflux        e(x_i), removes particle i
* fragmentation F(x_i, Z), replaces x_i by one fragment picked with probability z / x_i
* coagulation   K_sym(x_i, x_j) / (n x_j) for every ordered pair, i == j included;
                x_i becomes x_i + x_j and particle j is left alone

Coagulation and fragmentation never change the particle count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._sampling import grown, pick_category, pick_index
from .direct_sim import REFRESH_EVERY, Event
from .errors import ModelError, UsageError
from .jump_core import Atom, Trajectory
from .kernels import CoagKernel, FragLaw, MassFlowFragLaw, SourceTerm, sym_coag
from .particle_state import (BoundaryGuards, ParticleSystem, apply_coag_massflow, apply_efflux,
                             apply_frag_massflow, apply_source)
from .rng import DRIFT, stream

SOURCE, EFFLUX, FRAG, COAG = 0, 1, 2, 3
_ROW_CHUNK = 512


@dataclass(frozen=True)
class MassFlowConfig:
    """Mass flow model.

    ``truncate`` switches boundary handling from stopping the run to removing
    any particle that leaves [guards.x_min, guards.x_max] and carrying on.
    """

    n: int
    coag: Optional[CoagKernel] = None
    mf_frag: Optional[MassFlowFragLaw] = None
    source: Optional[SourceTerm] = None
    efflux: Optional[Callable] = None
    guards: BoundaryGuards = field(default_factory=BoundaryGuards)
    truncate: bool = False
    refresh_every: int = REFRESH_EVERY

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise UsageError("n must be a positive integer")
        if self.coag is None and self.mf_frag is None and self.source is None and self.efflux is None:
            raise UsageError("mass flow model needs at least one mechanism")
        if self.coag is not None:
            object.__setattr__(self, "coag", sym_coag(self.coag))
        if isinstance(self.mf_frag, FragLaw):
            object.__setattr__(self, "mf_frag", MassFlowFragLaw(self.mf_frag))
        if self.source is not None and not math.isfinite(self.source.first_moment):
            raise UsageError("mass flow source needs a finite first moment")


def _flow_row_sums(K, x: np.ndarray) -> np.ndarray:
    """R_i = sum_j K(x_i, x_j) / x_j over all j, diagonal included."""
    N = x.shape[0]
    out = np.empty(N)
    inv = 1.0 / x
    for a in range(0, N, _ROW_CHUNK):
        b = min(N, a + _ROW_CHUNK)
        block = np.broadcast_to(np.asarray(K(x[a:b, None], x[None, :]), dtype=float), (b - a, N))
        out[a:b] = block @ inv
    return out


def total_rate(xi: ParticleSystem, cfg: MassFlowConfig) -> float:
    """n int x S + sum e(x_i) + sum F(x_i, Z) + (1/n) sum_{i,j} K_sym(x_i, x_j) / x_j."""
    x = xi.sizes
    lam = cfg.n * cfg.source.first_moment if cfg.source is not None else 0.0
    if x.size:
        if cfg.efflux is not None:
            lam += float(np.sum(cfg.efflux(x)))
        if cfg.mf_frag is not None:
            lam += float(np.sum(cfg.mf_frag.total_rate(x)))
        if cfg.coag is not None:
            lam += float(np.sum(_flow_row_sums(cfg.coag, x))) / cfg.n
    if not math.isfinite(lam):
        raise ModelError(f"non-finite total rate at {xi!r}")
    return lam


class MassFlowStepper:
    """Incremental SSA state; coagulation rows R_i = sum_j K(x_i, x_j)/x_j are kept up to date."""

    def __init__(self, cfg: MassFlowConfig, xi: ParticleSystem):
        if xi.n != cfg.n:
            raise UsageError(f"state has n={xi.n} but the model uses n={cfg.n}")
        self.cfg = cfg
        self.n = cfg.n
        self.K = cfg.coag
        self.F = cfg.mf_frag
        self.e = cfg.efflux
        self.S = cfg.source
        self.lo = cfg.guards.x_min
        self.hi = cfg.guards.x_max
        self.src_rate = cfg.n * cfg.source.first_moment if cfg.source is not None else 0.0
        N = xi.N
        cap = max(8, 2 * N)
        self.N = N
        self.x = np.zeros(cap)
        self.x[:N] = xi.sizes
        self.er = self._col(self.e(xi.sizes)) if self.e is not None else None
        self.fr = self._col(self.F.total_rate(xi.sizes)) if self.F is not None else None
        self.R = None
        if self.K is not None:
            self.R = np.zeros(cap)
            if N:
                self.R[:N] = _flow_row_sums(self.K, xi.sizes)
        self._updates = 0
        self._cat = None
        self.truncated = 0

    def _col(self, values) -> np.ndarray:
        out = np.zeros(self.x.shape[0])
        out[: self.N] = values
        return out

    def _ensure(self, size: int):
        if size <= self.x.shape[0]:
            return
        self.x = grown(self.x, size)
        for name in ("er", "fr", "R"):
            arr = getattr(self, name)
            if arr is not None:
                setattr(self, name, grown(arr, size))

    def _kcol(self, s: float) -> np.ndarray:
        # K(x_j, s) for every live particle j; K is symmetric after construction
        N = self.N
        col = self.K(self.x[:N], s)
        return col if np.ndim(col) else np.full(N, float(col))

    def _resize(self, k: int, new: float):
        old = float(self.x[k])
        if self.er is not None:
            self.er[k] = self.e(new)
        if self.fr is not None:
            self.fr[k] = self.F.total_rate(new)
        if self.R is not None:
            N = self.N
            before = self._kcol(old)
            self.x[k] = new
            after = self._kcol(new)
            self.R[:N] += after / new - before / old
            self.R[k] = (after / self.x[:N]).sum()
            self._updates += 1
        else:
            self.x[k] = new

    def _remove(self, k: int):
        N = self.N
        last = N - 1
        if self.R is not None:
            self.R[:N] -= self._kcol(float(self.x[k])) / self.x[k]
            self.R[k] = self.R[last]
            self._updates += 1
        self.x[k] = self.x[last]
        if self.er is not None:
            self.er[k] = self.er[last]
        if self.fr is not None:
            self.fr[k] = self.fr[last]
        self.N = last

    def _add(self, s: float):
        N = self.N
        self._ensure(N + 1)
        self.x[N] = s
        self.N = N + 1
        if self.er is not None:
            self.er[N] = self.e(s)
        if self.fr is not None:
            self.fr[N] = self.F.total_rate(s)
        if self.R is not None:
            col = self._kcol(s)
            self.R[: N + 1] += col / s
            self.R[N] = (col / self.x[: N + 1]).sum()
            self._updates += 1

    def _truncate(self, k: int) -> bool:
        if self.cfg.truncate and not (self.lo <= self.x[k] <= self.hi):
            self._remove(k)
            self.truncated += 1
            return True
        return False

    def _maybe_refresh(self):
        if self.R is not None and self._updates >= self.cfg.refresh_every:
            if self.N:
                self.R[: self.N] = _flow_row_sums(self.K, self.x[: self.N])
            self._updates = 0

    def _totals(self):
        N = self.N
        eff = float(self.er[:N].sum()) if self.er is not None and N else 0.0
        frag = float(self.fr[:N].sum()) if self.fr is not None and N else 0.0
        coag = float(self.R[:N].sum()) / self.n if self.R is not None and N else 0.0
        self._cat = (self.src_rate, eff, frag, coag)
        return self._cat

    def rate(self) -> float:
        cat = self._totals()
        return cat[0] + cat[1] + cat[2] + cat[3]

    def step(self, rng: np.random.Generator) -> Event:
        cat = self._cat if self._cat is not None else self._totals()
        self._cat = None
        u = rng.random(3)
        c = pick_category(cat, u[0])
        N = self.N
        x = self.x
        if c == COAG:
            i = pick_index(self.R[:N], u[1])
            j = pick_index(self._kcol(float(x[i])) / x[:N], u[2])
            old, add = float(x[i]), float(x[j])
            self._resize(i, old + add)
            ev = Event("coag", i, j, (old, add, old + add))
            k = i
        elif c == FRAG:
            i = pick_index(self.fr[:N], u[1])
            old = float(x[i])
            y = float(self.F.sample_next(old, rng))
            if not 0.0 < y < old:
                raise ModelError(f"mass flow fragment {y} is not inside (0, {old})")
            self._resize(i, y)
            ev = Event("frag", i, None, (old, y))
            k = i
        elif c == EFFLUX:
            i = pick_index(self.er[:N], u[1])
            old = float(x[i])
            self._remove(i)
            ev = Event("efflux", i, None, (old,))
            k = None
        elif c == SOURCE:
            s = float(self.S.sample_mass_biased(rng))
            self._add(s)
            ev = Event("source", None, None, (s,))
            k = self.N - 1
        else:
            raise ModelError("no event possible at zero total rate")
        if k is not None and self._truncate(k):
            ev = Event(ev.tag + "+truncate", ev.i, ev.j, ev.sizes)
        self._maybe_refresh()
        return ev

    def view(self) -> ParticleSystem:
        return ParticleSystem._trusted(self.n, self.x[: self.N])

    def snapshot(self) -> ParticleSystem:
        return ParticleSystem._trusted(self.n, self.x[: self.N].copy())

    def mark(self) -> int:
        return self.N


def sample_event(xi: ParticleSystem, cfg: MassFlowConfig, rng: np.random.Generator) -> Event:
    st = MassFlowStepper(cfg, xi)
    if st.rate() <= 0:
        raise ModelError("total rate is zero; the state is absorbing")
    return st.step(rng)


class MassFlowLaw:
    def __init__(self, cfg: MassFlowConfig):
        self.cfg = cfg

    def rate(self, xi: ParticleSystem) -> float:
        return total_rate(xi, self.cfg)

    def stepper(self, xi: ParticleSystem) -> MassFlowStepper:
        return MassFlowStepper(self.cfg, xi)

    def sample_next(self, xi: ParticleSystem, rng) -> ParticleSystem:
        st = MassFlowStepper(self.cfg, xi)
        st.rate()
        st.step(rng)
        return st.snapshot()

    @property
    def guard(self):
        """State guard matching the config: full boundary checks, or only the count limit when truncating."""
        g = self.cfg.guards
        if self.cfg.truncate:
            return BoundaryGuards(0.0, math.inf, g.N_max)
        return g

    def atoms(self, xi: ParticleSystem) -> list:
        cfg = self.cfg
        n = cfg.n
        x = xi.sizes
        out = []
        if cfg.source is not None:
            S = cfg.source
            out.append(Atom(n * S.first_moment, sampler=lambda rng: apply_source(xi, S.sample_mass_biased(rng))))
        if cfg.efflux is not None:
            out.extend(Atom(float(cfg.efflux(x[i])), successor=apply_efflux(xi, i)) for i in range(xi.N))
        if cfg.mf_frag is not None:
            F = cfg.mf_frag
            for i in range(xi.N):
                w = float(F.total_rate(x[i]))
                outs = F.outcomes(float(x[i]))
                if outs is not None:
                    out.extend(Atom(w * p, successor=apply_frag_massflow(xi, i, y)) for p, y in outs)
                else:
                    out.append(Atom(w, sampler=lambda rng, i=i: apply_frag_massflow(
                        xi, i, F.sample_next(float(x[i]), rng))))
        if cfg.coag is not None:
            K = cfg.coag
            for i in range(xi.N):
                for j in range(xi.N):
                    out.append(Atom(float(K(x[i], x[j])) / (n * x[j]), successor=apply_coag_massflow(xi, i, j)))
        return out


def build_law(cfg: MassFlowConfig) -> MassFlowLaw:
    return MassFlowLaw(cfg)


def generator_apply(xi: ParticleSystem, cfg: MassFlowConfig, psi, samples: int = 1000,
                    seed: int = 0) -> tuple:
    """Weak generator of the mass flow process on eta(xi) = integral of psi against xi.

    Returns (estimate, standard error); only fragmentation laws without a
    discrete next-size distribution need sampling.
    """
    n = cfg.n
    x = xi.sizes
    est = 0.0
    se = 0.0
    if cfg.source is not None:
        est += cfg.source.integrate(lambda s: s * psi(s))
    if cfg.efflux is not None and x.size:
        est -= float(np.sum(psi(x) * cfg.efflux(x))) / n
    if cfg.mf_frag is not None and x.size:
        F = cfg.mf_frag
        w = np.asarray(F.total_rate(x), dtype=float)
        outs = [F.outcomes(float(v)) for v in x]
        if all(o is not None for o in outs):
            est += sum(w[i] * sum(p * (psi(y) - psi(x[i])) for p, y in outs[i]) for i in range(x.size)) / n
        elif w.sum() > 0:
            rng = stream(seed, 0, DRIFT)
            cum = np.cumsum(w)
            picks = np.minimum(np.searchsorted(cum, rng.random(samples) * cum[-1], side="right"), x.size - 1)
            vals = np.array([psi(F.sample_next(float(x[p]), rng)) - psi(x[p]) for p in picks])
            wsum = float(w.sum())
            est += wsum * float(vals.mean()) / n
            if samples > 1:
                se = wsum * float(vals.std(ddof=1)) / math.sqrt(samples) / n
    if cfg.coag is not None and x.size:
        X, Y = np.meshgrid(x, x, indexing="ij")
        Kv = np.broadcast_to(np.asarray(cfg.coag(X, Y), dtype=float), X.shape)
        est += float(np.sum((psi(X + Y) - psi(X)) * Kv / Y)) / (n * n)
    return est, se


def mass_trace(traj: Trajectory) -> np.ndarray:
    """Rows (t, N/n) at time 0 and after every jump: the normalized particle count as a step function."""
    if traj.marks is not None:
        counts = np.asarray(traj.marks, dtype=float)
        n = traj.states[0].n
    elif traj.states_recorded:
        counts = np.array([s.N for s in traj.states], dtype=float)
        n = traj.states[0].n
    else:
        raise UsageError("mass trace needs particle counts (marks) or recorded states")
    t = np.asarray(traj.jump_times, dtype=float)
    return np.column_stack([t, counts / n])


def first_drop_time(trace: np.ndarray) -> float:
    """Time of the first decrease of N/n in a mass trace, or inf if it never drops."""
    drops = np.nonzero(np.diff(trace[:, 1]) < 0)[0]
    return float(trace[drops[0] + 1, 0]) if drops.size else math.inf
