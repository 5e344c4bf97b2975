import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagfrag import mass_flow
from coagfrag.errors import ModelError, UsageError
from coagfrag.jump_core import (Atom, StopReason, StopRule, TestFunction, Verdict, check_region_criterion,
                                classify, drift, geometric_tail, martingale_statistic, one_dim_law,
                                pure_birth_law, simulate_chain, tail_slope)
from coagfrag.kernels import MultiplicativeKernel
from coagfrag.particle_state import ParticleSystem
from coagfrag.rng import holding_times


class ZeroRateLaw:
    def rate(self, state):
        return 0.0

    def sample_next(self, state, rng):  # pragma: no cover - never reached
        raise AssertionError


class FixedRateLaw:
    def __init__(self, value):
        self.value = value

    def rate(self, state):
        return self.value

    def sample_next(self, state, rng):
        return state + 1


def partial_inverse_sum(rate_fn):
    """eta(k) = sum_{j<k} 1/rate(j), bounded when the series converges."""
    return lambda k: math.fsum(1.0 / rate_fn(j) for j in range(k))


def test_pure_birth_chain_is_deterministic():
    law = pure_birth_law(lambda k: k + 1)
    traj = simulate_chain(law, 1, seed=0, stop=StopRule(max_jumps=3))
    assert traj.states == [1, 2, 3, 4]
    assert traj.stop_reason is StopReason.MAX_JUMPS
    assert traj.rates[:3] == [2.0, 3.0, 4.0]


def test_absorbing_start():
    traj = simulate_chain(ZeroRateLaw(), "anything", seed=0, stop=StopRule())
    assert traj.states == ["anything"] and traj.jumps == 0
    v = classify(traj, StopRule())
    assert v.kind is Verdict.ABSORBED and v.tau_lower == 0.0


def test_holding_times_are_unit_exponentials_over_rate():
    law = pure_birth_law(lambda k: float(k))
    traj = simulate_chain(law, 1, seed=11, stop=StopRule(max_jumps=500), replicate=4)
    T = holding_times(11, 4, 500)
    assert np.allclose(np.array(traj.waits) * np.array(traj.rates[:500]), T, rtol=1e-14, atol=0)
    assert np.array_equal(np.cumsum([0.0] + traj.waits)[-1], traj.jump_times[-1]) or \
        traj.jump_times[-1] == pytest.approx(sum(traj.waits), rel=1e-12)


def test_unit_rate_mean_tau():
    law = FixedRateLaw(1.0)
    J, R = 50, 2000
    taus = [simulate_chain(law, 0, seed=3, stop=StopRule(max_jumps=J), replicate=r,
                           record_states=False).tau(J) for r in range(R)]
    se = np.std(taus, ddof=1) / math.sqrt(R)
    assert abs(np.mean(taus) - J) <= 3 * se


@pytest.mark.slow
def test_quadratic_birth_mean_tau_is_basel_partial_sum():
    law = pure_birth_law(lambda k: (k + 1.0) ** 2)
    J, R = 10_000, 1000
    stop = StopRule(max_jumps=J)
    taus = np.array([simulate_chain(law, 0, seed=7, stop=stop, replicate=r, record_states=False).tau(J)
                     for r in range(R)])
    oracle = math.fsum(1.0 / (k + 1.0) ** 2 for k in range(J))
    assert abs(oracle - math.pi**2 / 6) < 1e-3
    assert abs(taus.mean() - oracle) <= 3 * taus.std(ddof=1) / math.sqrt(R)


def test_doubling_rates_explode_with_geometric_tail():
    law = pure_birth_law(lambda k: 2.0**k)
    stop = StopRule(rate_ceiling=1e12)
    traj = simulate_chain(law, 0, seed=5, stop=stop)
    v = classify(traj, stop)
    assert v.kind is Verdict.EXPLODED and v.stop_reason is StopReason.RATE_CEILING
    assert v.tail_slope == pytest.approx(math.log(2.0), rel=1e-12)
    assert v.tau_estimate == pytest.approx(v.tau_lower + 2.0 / v.terminal_rate, rel=1e-12)


def test_linear_birth_survives_to_horizon():
    law = pure_birth_law(lambda k: k + 1.0)
    stop = StopRule(time_horizon=8.0)
    traj = simulate_chain(law, 0, seed=1, stop=stop, record_states=False)
    v = classify(traj, stop)
    assert v.kind is Verdict.SURVIVED
    assert v.t_final == 8.0
    assert abs(v.tail_slope) < 1e-2


def test_tail_helpers():
    assert tail_slope([1.0, 2.0, 4.0, 8.0], 64) == pytest.approx(math.log(2))
    assert math.isnan(tail_slope([1.0], 64))
    assert geometric_tail(1.0, 0.0) == math.inf
    assert geometric_tail(4.0, math.log(2)) == pytest.approx(0.5)


def test_stop_rule_validation_and_bad_rates():
    with pytest.raises(UsageError):
        StopRule(max_jumps=0)
    with pytest.raises(UsageError):
        StopRule(time_horizon=0.0)
    with pytest.raises(ModelError):
        simulate_chain(FixedRateLaw(math.nan), 0, seed=0, stop=StopRule())
    with pytest.raises(ModelError):
        simulate_chain(FixedRateLaw(-1.0), 0, seed=0, stop=StopRule())
    with pytest.raises(ModelError):
        simulate_chain(pure_birth_law(lambda k: 0.0), 0, seed=0, stop=StopRule())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), replicate=st.integers(0, 1000))
def test_trajectories_are_a_function_of_seed_and_replicate(seed, replicate):
    law = pure_birth_law(lambda k: 1.0 + k * k)
    stop = StopRule(max_jumps=30)
    a = simulate_chain(law, 0, seed, stop, replicate=replicate)
    b = simulate_chain(law, 0, seed, stop, replicate=replicate)
    assert a.waits == b.waits and a.states == b.states
    c = simulate_chain(law, 0, seed, stop, replicate=replicate + 1)
    assert c.waits != a.waits


# drift


def test_inverse_rate_sum_has_unit_drift():
    rate = lambda k: (k + 1.0) ** 2  # noqa: E731
    law = pure_birth_law(rate)
    eta = TestFunction(partial_inverse_sum(rate), 2.0)
    for k in range(0, 40, 3):
        rep = drift(law, k, eta)
        assert rep.exact and rep.estimate == pytest.approx(1.0, rel=1e-12)


def test_constant_test_function_has_zero_drift():
    law = pure_birth_law(lambda k: k + 1.0)
    rep = drift(law, 3, TestFunction(lambda s: 0.7, 1.0))
    assert rep.estimate == 0.0 and rep.exact


def test_massflow_pair_drift_exact_against_monte_carlo():
    n = 2
    law = mass_flow.build_law(mass_flow.MassFlowConfig(n, coag=MultiplicativeKernel()))
    eta = TestFunction(lambda xi: -float(np.sum(1.0 / xi.sizes)) / xi.n, 10.0)
    state = ParticleSystem(n, [1.0, 2.0])
    exact = drift(law, state, eta)
    assert exact.exact

    # atoms by hand: K(x_i, x_j) / (n x_j) for (i, j) in {0,1}^2
    eta0 = eta(state)
    by_hand = (0.5 * (eta(ParticleSystem(n, [2.0, 2.0])) - eta0)
               + 0.5 * (eta(ParticleSystem(n, [3.0, 2.0])) - eta0)
               + 1.0 * (eta(ParticleSystem(n, [1.0, 3.0])) - eta0)
               + 1.0 * (eta(ParticleSystem(n, [1.0, 4.0])) - eta0))
    assert exact.estimate == pytest.approx(by_hand, rel=1e-14)

    class SampledOnly:
        def rate(self, s):
            return law.rate(s)

        def sample_next(self, s, rng):
            return law.sample_next(s, rng)

    mc = drift(SampledOnly(), state, eta, mc_samples=20_000, seed=4)
    assert not mc.exact
    assert abs(mc.estimate - exact.estimate) <= 3 * mc.std_error


def test_one_dim_doubling_drift():
    lam = lambda x: x**2  # noqa: E731
    law = one_dim_law(lam, lambda x, rng: 2 * x, successors=lambda x: [(1.0, 2 * x)])
    eta = TestFunction(lambda x: -1.0 / x, 1.0)
    for x in (1.0, 3.0, 10.0):
        assert drift(law, x, eta).estimate == pytest.approx(lam(x) / x / 2, rel=1e-14)


def test_one_dim_identity_drift_is_zero():
    law = one_dim_law(lambda x: 5.0, lambda x, rng: x, successors=lambda x: [(1.0, x)])
    assert drift(law, 2.0, TestFunction(lambda x: -1.0 / x, 1.0)).estimate == 0.0


def test_one_dim_uniform_drift_matches_log_integral():
    law = one_dim_law(lambda x: 3.0 * x, lambda x, rng: x * (1.0 + rng.random()))
    eta = TestFunction(lambda x: -1.0 / x, 1.0)
    x = 2.0
    rep = drift(law, x, eta, mc_samples=20_000, seed=9)
    oracle = 3.0 * x / x * (1.0 - math.log(2.0))
    assert abs(rep.estimate - oracle) <= 3 * rep.std_error
    with pytest.raises(ModelError):
        law.rate(0.5)


def test_atom_weights_must_sum_to_rate():
    class BadAtoms(FixedRateLaw):
        def atoms(self, state):
            return [Atom(self.value / 2, successor=state + 1)]

    with pytest.raises(ModelError):
        drift(BadAtoms(2.0), 0, TestFunction(lambda s: 0.0, 1.0))


def test_test_function_bound_is_enforced():
    eta = TestFunction(lambda s: 5.0, 1.0)
    with pytest.raises(ModelError):
        eta(0)
    with pytest.raises(UsageError):
        TestFunction(lambda s: 0.0, 0.0)


def test_region_criterion_membership():
    rate = lambda k: (k + 1.0) ** 2  # noqa: E731
    law = pure_birth_law(rate)
    eta = TestFunction(partial_inverse_sum(rate), 2.0)
    assert check_region_criterion(law, [0, 1, 5], eta, 0.5) == [True, True, True]
    assert check_region_criterion(law, [0, 1, 5], eta, 10.0) == [False, False, False]
    with pytest.raises(UsageError):
        check_region_criterion(law, [0], eta, 0.0)


# martingale statistic


def test_martingale_of_constant_is_minus_constant():
    law = pure_birth_law(lambda k: k + 1.0)
    traj = simulate_chain(law, 0, seed=2, stop=StopRule(max_jumps=20))
    W = martingale_statistic(traj, law, TestFunction(lambda s: 0.3, 1.0))
    assert np.all(W == -0.3)


def test_martingale_telescopes_for_inverse_rate_sum():
    rate = lambda k: (k + 1.0) ** 2  # noqa: E731
    law = pure_birth_law(rate)
    traj = simulate_chain(law, 0, seed=2, stop=StopRule(max_jumps=60))
    W = martingale_statistic(traj, law, TestFunction(partial_inverse_sum(rate), 2.0))
    assert np.max(np.abs(W)) < 1e-14


def test_martingale_needs_states():
    law = pure_birth_law(lambda k: k + 1.0)
    traj = simulate_chain(law, 0, seed=2, stop=StopRule(max_jumps=5), record_states=False)
    with pytest.raises(UsageError):
        martingale_statistic(traj, law, TestFunction(lambda s: 0.0, 1.0))


def test_massflow_pair_martingale_mean_is_flat():
    n = 2
    law = mass_flow.build_law(mass_flow.MassFlowConfig(n, coag=MultiplicativeKernel()))
    eta = TestFunction(lambda xi: -float(np.sum(1.0 / xi.sizes)) / xi.n, 1.0)
    stop = StopRule(max_jumps=12, rate_ceiling=math.inf)
    W = np.array([martingale_statistic(simulate_chain(law, ParticleSystem(n, [1.0, 1.0]), 8, stop,
                                                      replicate=r), law, eta) for r in range(400)])
    centred = W - W[:, :1]
    means = centred.mean(axis=0)
    ses = centred.std(axis=0, ddof=1) / math.sqrt(W.shape[0])
    assert np.all(np.abs(means) <= 3 * ses + 1e-12)
