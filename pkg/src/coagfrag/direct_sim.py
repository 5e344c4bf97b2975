"""Direct simulation process: source, efflux, multiple fragmentation, pairwise coagulation.

Jump rates with weight 1/n:

* source        n * S(X), adds one particle drawn from S
* efflux        e(x_i), removes particle i
* fragmentation F(x_i, Z), replaces particle i by its fragments
* coagulation   K(x_i, x_j) / (2n) for each ordered pair i != j, merges i and j
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._sampling import grown, pick_category, pick_index
from .errors import ModelError, UsageError
from .jump_core import Atom
from .kernels import CoagKernel, FragLaw, SourceTerm
from .particle_state import (BoundaryGuards, ParticleSystem, apply_coag_direct, apply_efflux,
                             apply_frag, apply_source)
from .rng import DRIFT, stream

REFRESH_EVERY = 1 << 16
_LOG_RESCALE = 300.0
_LOG_BLOCK = 512
_ROW_CHUNK = 512

SOURCE, EFFLUX, FRAG, COAG = 0, 1, 2, 3


class Event(NamedTuple):
    tag: str
    i: Optional[int]
    j: Optional[int]
    sizes: tuple

    def to_json(self) -> dict:
        return {"tag": self.tag, "i": self.i, "j": self.j, "sizes": [float(s) for s in self.sizes]}


@dataclass(frozen=True)
class DirectSimConfig:
    n: int
    coag: Optional[CoagKernel] = None
    frag: Optional[FragLaw] = None
    source: Optional[SourceTerm] = None
    efflux: Optional[Callable] = None
    guards: BoundaryGuards = field(default_factory=BoundaryGuards)
    refresh_every: int = REFRESH_EVERY

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise UsageError("n must be a positive integer")
        if self.coag is None and self.frag is None and self.source is None and self.efflux is None:
            raise UsageError("direct simulation needs at least one mechanism")


def coag_row_sums(K, x: np.ndarray, exclude_diagonal: bool) -> np.ndarray:
    """R_i = sum_j K(x_i, x_j), optionally without j = i; evaluated in row blocks."""
    N = x.shape[0]
    out = np.empty(N)
    for a in range(0, N, _ROW_CHUNK):
        b = min(N, a + _ROW_CHUNK)
        block = np.array(K(x[a:b, None], x[None, :]), dtype=float, copy=True)
        block = np.broadcast_to(block, (b - a, N)).copy() if block.shape != (b - a, N) else block
        if exclude_diagonal:
            block[np.arange(b - a), np.arange(a, b)] = 0.0
        out[a:b] = block.sum(axis=1)
    return out


def _finite(lam: float, xi) -> float:
    if not math.isfinite(lam):
        raise ModelError(f"non-finite total rate at {xi!r}")
    return lam


def total_rate(xi: ParticleSystem, cfg: DirectSimConfig) -> float:
    """n S(X) + sum_i e(x_i) + sum_i F(x_i, Z) + (1/2n) sum_{i != j} K(x_i, x_j)."""
    x = xi.sizes
    lam = cfg.n * cfg.source.total if cfg.source is not None else 0.0
    if x.size:
        if cfg.efflux is not None:
            lam += float(np.sum(cfg.efflux(x)))
        if cfg.frag is not None:
            lam += float(np.sum(cfg.frag.total_rate(x)))
        if cfg.coag is not None and x.size > 1:
            lam += float(np.sum(coag_row_sums(cfg.coag, x, True))) / (2 * cfg.n)
    return _finite(lam, xi)


class DirectStepper:
    """Incremental state for the SSA loop.

    Per-particle efflux and fragmentation rates are kept in arrays; the
    coagulation row sums R_i = sum_{j != i} K(x_i, x_j) are updated in O(N)
    per insertion or removal and recomputed from scratch every
    ``refresh_every`` updates to bound rounding drift.
    """

    def __init__(self, cfg: DirectSimConfig, xi: ParticleSystem):
        if xi.n != cfg.n:
            raise UsageError(f"state has n={xi.n} but the model uses n={cfg.n}")
        self.cfg = cfg
        self.n = cfg.n
        N = xi.N
        cap = max(8, 2 * N)
        self.x = np.zeros(cap)
        self.x[:N] = xi.sizes
        self.N = N
        self.K = cfg.coag
        self.F = cfg.frag
        self.e = cfg.efflux
        self.S = cfg.source
        self.src_rate = cfg.n * cfg.source.total if cfg.source is not None else 0.0
        self.er = self._col(self.e(xi.sizes)) if self.e is not None else None
        self.fr = self._col(self.F.total_rate(xi.sizes)) if self.F is not None else None
        self.R = None
        if self.K is not None:
            self.R = np.zeros(cap)
            self.R[:N] = coag_row_sums(self.K, xi.sizes, True) if N else 0.0
        self._updates = 0
        self._cat = None

    def _col(self, values) -> np.ndarray:
        out = np.zeros(self.x.shape[0])
        out[: self.N] = values
        return out

    # -- caches ------------------------------------------------------------
    def _ensure(self, size: int):
        if size <= self.x.shape[0]:
            return
        self.x = grown(self.x, size)
        if self.er is not None:
            self.er = grown(self.er, size)
        if self.fr is not None:
            self.fr = grown(self.fr, size)
        if self.R is not None:
            self.R = grown(self.R, size)

    def _remove(self, k: int):
        N = self.N
        last = N - 1
        if self.R is not None:
            self.R[:N] -= self.K(self.x[:N], self.x[k])
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
        if self.R is not None:
            if N:
                col = self.K(self.x[:N], s)
                self.R[:N] += col
                self.R[N] = float(np.sum(self.K(s, self.x[:N]))) if not self.K.symmetric else float(np.sum(col))
            else:
                self.R[N] = 0.0
            self._updates += 1
        self.x[N] = s
        if self.er is not None:
            self.er[N] = self.e(s)
        if self.fr is not None:
            self.fr[N] = self.F.total_rate(s)
        self.N = N + 1

    def _maybe_refresh(self):
        if self.R is not None and self._updates >= self.cfg.refresh_every:
            self.R[: self.N] = coag_row_sums(self.K, self.x[: self.N], True) if self.N else 0.0
            self._updates = 0

    # -- stepper protocol ----------------------------------------------------
    def _totals(self):
        N = self.N
        eff = float(self.er[:N].sum()) if self.er is not None and N else 0.0
        frag = float(self.fr[:N].sum()) if self.fr is not None and N else 0.0
        coag = float(self.R[:N].sum()) / (2 * self.n) if self.R is not None and N > 1 else 0.0
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
            row = np.array(self.K(x[i], x[:N]), dtype=float)
            if row.ndim == 0:
                row = np.full(N, float(row))
            row[i] = 0.0
            j = pick_index(row, u[2])
            xi_, xj_ = float(x[i]), float(x[j])
            self._remove(max(i, j))
            self._remove(min(i, j))
            self._add(xi_ + xj_)
            ev = Event("coag", i, j, (xi_, xj_, xi_ + xj_))
        elif c == FRAG:
            i = pick_index(self.fr[:N], u[1])
            z = self.F.sample_fragments(float(x[i]), rng)
            self._remove(i)
            for zi in z:
                self._add(float(zi))
            ev = Event("frag", i, None, tuple(float(v) for v in z))
        elif c == EFFLUX:
            i = pick_index(self.er[:N], u[1])
            xi_ = float(x[i])
            self._remove(i)
            ev = Event("efflux", i, None, (xi_,))
        elif c == SOURCE:
            s = float(self.S.sample(rng))
            self._add(s)
            ev = Event("source", None, None, (s,))
        else:
            raise ModelError("no event possible at zero total rate")
        self._maybe_refresh()
        return ev

    def view(self) -> ParticleSystem:
        return ParticleSystem._trusted(self.n, self.x[: self.N])

    def snapshot(self) -> ParticleSystem:
        return ParticleSystem._trusted(self.n, self.x[: self.N].copy())

    def mark(self) -> int:
        return self.N


def sample_event(xi: ParticleSystem, cfg: DirectSimConfig, rng: np.random.Generator) -> Event:
    """Draw one event at state ``xi`` (consumes the same draws as one step of the stepper)."""
    st = DirectStepper(cfg, xi)
    if st.rate() <= 0:
        raise ModelError("total rate is zero; the state is absorbing")
    return st.step(rng)


class DirectSimLaw:
    def __init__(self, cfg: DirectSimConfig):
        self.cfg = cfg

    def rate(self, xi: ParticleSystem) -> float:
        return total_rate(xi, self.cfg)

    def stepper(self, xi: ParticleSystem) -> DirectStepper:
        return DirectStepper(self.cfg, xi)

    def sample_next(self, xi: ParticleSystem, rng) -> ParticleSystem:
        st = DirectStepper(self.cfg, xi)
        st.rate()
        st.step(rng)
        return st.snapshot()

    @property
    def guard(self) -> BoundaryGuards:
        return self.cfg.guards

    def atoms(self, xi: ParticleSystem) -> list:
        cfg = self.cfg
        n = cfg.n
        x = xi.sizes
        out = []
        if cfg.source is not None:
            S = cfg.source
            out.append(Atom(n * S.total, sampler=lambda rng: apply_source(xi, S.sample(rng))))
        if cfg.efflux is not None:
            for i in range(xi.N):
                out.append(Atom(float(cfg.efflux(x[i])), successor=apply_efflux(xi, i)))
        if cfg.frag is not None:
            F = cfg.frag
            for i in range(xi.N):
                w = float(F.total_rate(x[i]))
                outs = F.outcomes(float(x[i]))
                if outs is not None:
                    out.extend(Atom(w * p, successor=apply_frag(xi, i, z)) for p, z in outs)
                else:
                    out.append(Atom(w, sampler=lambda rng, i=i: apply_frag(xi, i, F.sample_fragments(float(x[i]), rng))))
        if cfg.coag is not None:
            K = cfg.coag
            for i in range(xi.N):
                for j in range(xi.N):
                    if i != j:
                        out.append(Atom(float(K(x[i], x[j])) / (2 * n), successor=apply_coag_direct(xi, i, j)))
        return out


def build_law(cfg: DirectSimConfig) -> DirectSimLaw:
    return DirectSimLaw(cfg)


def generator_apply(xi: ParticleSystem, cfg: DirectSimConfig, phi, samples: int = 1000,
                    seed: int = 0) -> tuple:
    """Right side of the weak generator identity for eta(xi) = integral of phi against xi.

    Source, efflux and coagulation terms are exact; the fragmentation term is
    exact for discrete fragment laws and Monte Carlo otherwise.  Returns
    (estimate, standard error).
    """
    n = cfg.n
    x = xi.sizes
    est = 0.0
    se = 0.0
    if cfg.source is not None:
        est += cfg.source.integrate(phi)
    if cfg.efflux is not None and x.size:
        est -= float(np.sum(phi(x) * cfg.efflux(x))) / n
    if cfg.frag is not None and x.size:
        F = cfg.frag
        w = np.asarray(F.total_rate(x), dtype=float)
        outs = [F.outcomes(float(v)) for v in x]
        if all(o is not None for o in outs):
            est += sum(w[i] * sum(p * (sum(phi(zz) for zz in z) - phi(x[i])) for p, z in outs[i])
                       for i in range(x.size)) / n
        elif w.sum() > 0:
            rng = stream(seed, 0, DRIFT)
            cum = np.cumsum(w)
            picks = np.minimum(np.searchsorted(cum, rng.random(samples) * cum[-1], side="right"), x.size - 1)
            vals = np.array([np.sum(phi(F.sample_fragments(float(x[p]), rng))) - phi(x[p]) for p in picks])
            wsum = float(w.sum())
            est += wsum * float(vals.mean()) / n
            if samples > 1:
                se = wsum * float(vals.std(ddof=1)) / math.sqrt(samples) / n
    if cfg.coag is not None and x.size > 1:
        X, Y = np.meshgrid(x, x, indexing="ij")
        Kv = np.broadcast_to(np.asarray(cfg.coag(X, Y), dtype=float), X.shape)
        term = (phi(X + Y) - phi(X) - phi(Y)) * Kv
        np.fill_diagonal(term, 0.0)
        est += float(term.sum()) / (2 * n * n)
    return est, se


# ---------------------------------------------------------------------------
# log-size simulation of pure power-law fragmentation


@dataclass(frozen=True)
class LogSizeRun:
    """Pure uniform-binary fragmentation run with sizes, rates and waits kept as logarithms.

    ``log_waits[k]`` is ln of the k-th holding time.  The real-valued
    simulator reaches the smallest double after a few hundred jumps of an
    exploding run; in log form the run can continue for as many jumps as
    memory allows.
    """

    log_sizes: np.ndarray
    log_rates: np.ndarray
    log_waits: np.ndarray
    seed: int
    replicate: int

    @property
    def jumps(self) -> int:
        return int(self.log_waits.shape[0])

    def log_window_time(self, start: int, stop: int) -> float:
        """ln(tau_stop - tau_start), summed directly from the waits so no cancellation occurs."""
        if not 0 <= start < stop <= self.jumps:
            raise UsageError(f"window [{start}, {stop}) outside 0..{self.jumps}")
        w = self.log_waits[start:stop]
        m = float(w.max())
        return m + math.log(float(np.sum(np.exp(w - m))))


def log_size_fragmentation(alpha: float, c: float, n: int, sizes, jumps: int, seed: int,
                           replicate: int = 0) -> LogSizeRun:
    """Direct simulation of F(x, Z) = c x^-alpha / 2 with uniform binary splits, in log coordinates.

    Consumes the holding and event streams exactly like :func:`simulate_chain`
    driving :class:`DirectStepper`, so both routes follow the same path for
    as long as the real-valued one stays representable.
    """
    from .rng import EVENTS, ExponentialClock

    if not (alpha > 0 and c > 0):
        raise UsageError("alpha and c must be positive")
    x0 = np.asarray(sizes, dtype=float)
    if x0.size == 0 or np.any(x0 <= 0):
        raise UsageError("need at least one particle with positive size")
    ParticleSystem(n, x0)
    clock = ExponentialClock(seed, replicate)
    rng = stream(seed, replicate, EVENTS)
    N = x0.size
    logx = np.empty(N + jumps)
    logx[:N] = np.log(x0)
    # weights are exp(-alpha ln x - ref); ref moves up whenever a new weight would overflow
    ref = float((-alpha * logx[:N]).max())
    w = np.empty(N + jumps)
    w[:N] = np.exp(-alpha * logx[:N] - ref)
    log_rates = np.empty(jumps)
    log_waits = np.empty(jumps)
    log_half_c = math.log(c / 2.0)
    # two-level sums: per-block totals are recomputed from scratch whenever a block changes
    B = _LOG_BLOCK
    w[N:] = 0.0
    blocks = np.add.reduceat(w, np.arange(0, w.shape[0], B))

    def refresh(idx):
        b = idx // B
        blocks[b] = w[b * B:(b + 1) * B].sum()

    for k in range(jumps):
        nb = (N - 1) // B + 1
        bcs = np.cumsum(blocks[:nb])
        total = float(bcs[-1])
        lam = log_half_c + ref + math.log(total)
        log_rates[k] = lam
        log_waits[k] = math.log(clock.next()) - lam
        # same draw pattern as DirectStepper.step: three uniforms, then the split point
        u = rng.random(3)
        target = u[1] * total
        b = min(int(np.searchsorted(bcs, target, side="right")), nb - 1)
        while not blocks[b] > 0:
            b -= 1
        lo = b * B
        hi = min(lo + B, N)
        inner = np.cumsum(w[lo:hi])
        i = lo + min(int(np.searchsorted(inner, target - (bcs[b - 1] if b else 0.0), side="right")), hi - lo - 1)
        while not w[i] > 0:
            i -= 1
        v = rng.random()
        while not 0.0 < v < 1.0:
            v = rng.random()
        li = logx[i]
        a_, b_ = li + math.log(v), li + math.log1p(-v)
        # swap-remove particle i, then append both fragments, as the real-valued stepper does
        last = N - 1
        logx[i] = logx[last]
        w[i] = w[last]
        logx[last], logx[N] = a_, b_
        top = -alpha * min(a_, b_)
        if top - ref > _LOG_RESCALE:
            scale = math.exp(ref - top)
            w[:N] *= scale
            blocks *= scale
            ref = top
        w[last] = math.exp(-alpha * a_ - ref)
        w[N] = math.exp(-alpha * b_ - ref)
        refresh(i)
        refresh(last)
        refresh(N)
        N += 1
    return LogSizeRun(logx[:N].copy(), log_rates, log_waits, seed, replicate)
