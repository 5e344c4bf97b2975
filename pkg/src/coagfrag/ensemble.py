"""Seeded ensembles of independent replicates and their summaries.

Replicate r of an ensemble with base seed s draws from the streams keyed by
(s, r), so each row of the summary is the same whether replicates run in
one process or spread over a worker pool.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from .errors import UsageError
from .jump_core import ExplosionVerdict, StopRule, Trajectory, Verdict, classify, simulate_chain

SUMMARY_FIELDS = ("replicate", "verdict", "tau_lower", "tau_estimate", "jumps", "t_final")


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    verdict: ExplosionVerdict
    trajectory: Optional[Trajectory] = None

    def row(self) -> dict:
        v = self.verdict
        return {"replicate": self.replicate, "verdict": v.kind.value, "tau_lower": v.tau_lower,
                "tau_estimate": v.tau_estimate, "jumps": v.jumps, "t_final": v.t_final}


def run_replicate(law, init, stop: StopRule, seed: int, replicate: int, keep: bool = False,
                  record_states: bool = False, record_events: bool = False) -> ReplicateResult:
    traj = simulate_chain(law, init, seed, stop, replicate=replicate,
                          record_states=record_states, record_events=record_events)
    return ReplicateResult(replicate, classify(traj, stop), traj if keep else None)


def _run_chunk(args) -> list:
    law, init, stop, seed, reps, keep, record_states, record_events = args
    return [run_replicate(law, init, stop, seed, r, keep, record_states, record_events) for r in reps]


def run_ensemble(law, init, stop: StopRule, seed: int, replicates: int, workers: int = 1,
                 keep: bool = False, record_states: bool = False,
                 record_events: bool = False) -> list:
    """Run replicates 0..replicates-1 and return their results ordered by replicate."""
    if replicates < 1:
        raise UsageError("replicates must be at least 1")
    if workers < 1:
        raise UsageError("workers must be at least 1")
    reps = list(range(replicates))
    if workers == 1 or replicates == 1:
        return _run_chunk((law, init, stop, seed, reps, keep, record_states, record_events))
    chunks = [reps[w::workers] for w in range(workers) if reps[w::workers]]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(law, init, stop, seed, c, keep, record_states, record_events)
                                      for c in chunks])
        results = [r for part in parts for r in part]
    return sorted(results, key=lambda r: r.replicate)


def summary_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in sorted(results, key=lambda r: r.replicate):
        row = r.row()
        writer.writerow({k: ("" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k]))
                         for k in SUMMARY_FIELDS})
    return buf.getvalue()


def wilson_interval(successes: int, total: int, level: float = 0.95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if total < 1:
        raise UsageError("need at least one trial")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == total else min(1.0, centre + half)
    return (lo, hi)


def mean_stderr(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return (math.nan, math.nan)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return (float(v.mean()), se)


def aggregate(results) -> dict:
    """Explosion fraction with a 95% interval, verdict counts, and statistics of the explosion times."""
    results = sorted(results, key=lambda r: r.replicate)
    total = len(results)
    counts = {v.value: 0 for v in Verdict}
    for r in results:
        counts[r.verdict.kind.value] += 1
    exploded = counts[Verdict.EXPLODED.value]
    taus = np.array([r.verdict.tau_estimate for r in results
                     if r.verdict.exploded and r.verdict.tau_estimate is not None], dtype=float)
    out = {
        "schema": 1,
        "replicates": total,
        "verdicts": counts,
        "explosion_fraction": exploded / total if total else math.nan,
        "explosion_fraction_ci95": list(wilson_interval(exploded, total)) if total else None,
    }
    if taus.size:
        m, se = mean_stderr(taus)
        q = np.quantile(taus, [0.05, 0.25, 0.5, 0.75, 0.95])
        out["tau"] = {"mean": m, "stderr": None if math.isnan(se) else se,
                      "quantiles": {k: float(v) for k, v in zip(("q05", "q25", "q50", "q75", "q95"), q)}}
    else:
        out["tau"] = None
    return out
