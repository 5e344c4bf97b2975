import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagfrag import direct_sim as ds
from coagfrag.errors import ModelError, UsageError
from coagfrag.jump_core import StopRule, TestFunction, Verdict, classify, drift, simulate_chain
from coagfrag.kernels import (AffineRate, ConstantKernel, ConstantRate, MultiplicativeKernel, PowerRate,
                              ProductPowerKernel, UniformBinary, discrete_source, point_source, power_efflux)
from coagfrag.particle_state import BoundaryGuards, ParticleSystem
from coagfrag.rng import stream


def mixed_config(n=3):
    return ds.DirectSimConfig(n, coag=ProductPowerKernel(0.5), frag=UniformBinary(AffineRate(0.5)),
                              source=discrete_source([0.5, 2.0], [1.0, 0.5]), efflux=power_efflux(0.3, 1.0))


def test_total_rate_examples():
    assert ds.total_rate(ParticleSystem(1, [2.0, 3.0]), ds.DirectSimConfig(1, coag=MultiplicativeKernel())) == 6.0
    frag = ds.DirectSimConfig(1, frag=UniformBinary(ConstantRate(1.0)))
    assert ds.total_rate(ParticleSystem(1, [1.0, 1.0, 1.0]), frag) == 1.5
    src = ds.DirectSimConfig(5, source=point_source(1.0, 2.0))
    assert ds.total_rate(ParticleSystem(5, []), src) == 10.0


def test_config_validation():
    with pytest.raises(UsageError):
        ds.DirectSimConfig(1)
    with pytest.raises(UsageError):
        ds.DirectSimConfig(0, coag=ConstantKernel())
    with pytest.raises(UsageError):
        ds.build_law(ds.DirectSimConfig(2, coag=ConstantKernel())).stepper(ParticleSystem(3, [1.0]))


def test_single_particle_pure_coagulation_is_absorbed():
    cfg = ds.DirectSimConfig(1, coag=ConstantKernel())
    stop = StopRule()
    traj = simulate_chain(ds.build_law(cfg), ParticleSystem(1, [1.0]), 0, stop)
    assert classify(traj, stop).kind is Verdict.ABSORBED and traj.jumps == 0
    with pytest.raises(ModelError):
        ds.sample_event(ParticleSystem(1, [1.0]), cfg, stream(0))


def test_symmetric_pair_merges_either_way():
    cfg = ds.DirectSimConfig(1, coag=ConstantKernel())
    rng = stream(1)
    order = Counter()
    for _ in range(4000):
        ev = ds.sample_event(ParticleSystem(1, [1.0, 1.0]), cfg, rng)
        assert ev.tag == "coag" and sorted(ev.sizes) == [1.0, 1.0, 2.0]
        order[(ev.i, ev.j)] += 1
    p = order[(0, 1)] / 4000
    assert set(order) == {(0, 1), (1, 0)}
    assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / 4000)


@pytest.mark.parametrize("K, weights", [(MultiplicativeKernel(), {(1.0, 1.0): 1.0, (1.0, 2.0): 4.0}),
                                        (ConstantKernel(), {(1.0, 1.0): 1.0, (1.0, 2.0): 2.0})])
def test_pair_frequencies_follow_kernel(K, weights):
    # sizes (1, 1, 2): one {1,1} pair and two {1,2} pairs
    cfg = ds.DirectSimConfig(1, coag=K)
    rng = stream(2)
    draws = 10_000
    counts = Counter()
    for _ in range(draws):
        ev = ds.sample_event(ParticleSystem(1, [1.0, 1.0, 2.0]), cfg, rng)
        counts[tuple(sorted(ev.sizes[:2]))] += 1
    total = sum(weights.values())
    for pair, w in weights.items():
        p = w / total
        assert abs(counts[pair] / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws)


def test_fragmentation_explosion_setup_adds_one_particle_per_jump():
    cfg = ds.DirectSimConfig(1, frag=UniformBinary(PowerRate(1.0)))
    traj = simulate_chain(ds.build_law(cfg), ParticleSystem(1, [1.0]), 4, StopRule(max_jumps=200))
    assert [s.N for s in traj.states] == list(range(1, traj.jumps + 2))


@settings(max_examples=20, deadline=None)
@given(k=st.integers(2, 40), seed=st.integers(0, 10**6))
def test_pure_coagulation_absorbs_after_k_minus_one_jumps(k, seed):
    cfg = ds.DirectSimConfig(2, coag=ProductPowerKernel(0.5))
    rng = stream(seed, 0, 3)
    xi = ParticleSystem(2, rng.uniform(0.1, 3.0, k))
    traj = simulate_chain(ds.build_law(cfg), xi, seed, StopRule())
    assert traj.jumps == k - 1
    assert traj.final_state.N == 1
    assert traj.final_state.sizes[0] == pytest.approx(xi.sizes.sum(), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), N=st.integers(1, 25))
def test_incremental_rate_matches_fresh_sum(seed, N):
    cfg = mixed_config()
    law = ds.build_law(cfg)
    rng = stream(seed, 0, 3)
    st_ = law.stepper(ParticleSystem(cfg.n, rng.uniform(0.05, 4.0, N)))
    ev_rng = stream(seed)
    for _ in range(60):
        lam = st_.rate()
        assert lam == pytest.approx(ds.total_rate(st_.view(), cfg), rel=1e-10)
        st_.step(ev_rng)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_coagulation_and_fragmentation_conserve_mass(seed):
    cfg = ds.DirectSimConfig(2, coag=ConstantKernel(1.0), frag=UniformBinary(AffineRate(1.0)))
    xi = ParticleSystem(2, [1.0, 2.0, 0.5, 4.0])
    traj = simulate_chain(ds.build_law(cfg), xi, seed, StopRule(max_jumps=100))
    masses = np.array([s.sizes.sum() for s in traj.states])
    assert np.allclose(masses, 7.5, rtol=1e-12)


def test_generator_examples():
    coag = ds.DirectSimConfig(3, coag=MultiplicativeKernel())
    xi = ParticleSystem.monodisperse(3, 1.5, 4)
    assert ds.generator_apply(xi, coag, lambda x: x)[0] == pytest.approx(0.0, abs=1e-12)
    x = xi.sizes
    by_hand = sum(2 * x[i] * x[j] * x[i] * x[j] for i in range(4) for j in range(4) if i != j) / (2 * 9)
    assert ds.generator_apply(xi, coag, lambda v: v**2)[0] == pytest.approx(by_hand, rel=1e-12)
    frag = ds.DirectSimConfig(3, frag=UniformBinary(AffineRate(1.0)))
    ys = ParticleSystem(3, [0.5, 1.0, 2.5])
    est, _ = ds.generator_apply(ys, frag, lambda v: np.ones_like(np.asarray(v, dtype=float)), samples=50)
    assert est == pytest.approx(float(np.sum(0.5 * (1 + ys.sizes))) / 3, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_generator_agrees_with_drift_of_additive_functional(seed):
    cfg = mixed_config()
    rng = stream(seed, 0, 3)
    xi = ParticleSystem(cfg.n, rng.uniform(0.2, 3.0, int(rng.integers(2, 8))))
    phi = lambda v: np.sqrt(v)  # noqa: E731
    eta = TestFunction(lambda s: float(np.sum(phi(s.sizes))) / s.n if s.N else 0.0, 1e6)
    gen, gse = ds.generator_apply(xi, cfg, phi, samples=4000, seed=seed)
    rep = drift(ds.build_law(cfg), xi, eta, mc_samples=4000, seed=seed + 1)
    assert abs(gen - rep.estimate) <= 4 * math.hypot(gse, rep.std_error) + 1e-12


def test_event_json():
    ev = ds.Event("frag", 2, None, (0.25, 0.75))
    assert ev.to_json() == {"tag": "frag", "i": 2, "j": None, "sizes": [0.25, 0.75]}


def test_log_size_route_follows_real_route():
    seed, R = 21, 3
    cfg = ds.DirectSimConfig(2, frag=UniformBinary(PowerRate(1.5, 2.0)), guards=BoundaryGuards(x_min=1e-300))
    xi = ParticleSystem(2, [1.0, 0.5])
    for r in range(R):
        ref = simulate_chain(ds.build_law(cfg), xi, seed, StopRule(max_jumps=150, rate_ceiling=math.inf,
                                                                   state_guard=cfg.guards), replicate=r)
        run = ds.log_size_fragmentation(1.5, 2.0, 2, [1.0, 0.5], 150, seed, replicate=r)
        k = ref.jumps
        assert np.allclose(run.log_waits[:k], np.log(ref.waits), rtol=0, atol=1e-9)
        assert np.allclose(np.exp(run.log_rates[:k]), ref.rates[:k], rtol=1e-9)
        assert np.allclose(np.sort(np.exp(run.log_sizes[: xi.N + k])), np.sort(ref.final_state.sizes), rtol=1e-9)


def test_log_window_time_matches_direct_sum():
    run = ds.log_size_fragmentation(1.0, 1.0, 1, [1.0], 200, seed=3)
    w = np.exp(run.log_waits)
    assert run.log_window_time(10, 20) == pytest.approx(math.log(w[10:20].sum()), rel=1e-12)
    with pytest.raises(UsageError):
        run.log_window_time(5, 500)


def test_log_window_times_shrink_for_exploding_fragmentation():
    run = ds.log_size_fragmentation(1.0, 1.0, 1, [1.0], 2**13, seed=5)
    logs = [run.log_window_time(2**e, 2 ** (e + 1)) for e in range(6, 12)]
    assert all(b < a for a, b in zip(logs, logs[1:]))
