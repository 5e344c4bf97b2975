import math
from fractions import Fraction

import numpy as np
import pytest

from coagfrag import oracles
from coagfrag.errors import DivergenceError, DomainError, UsageError
from coagfrag.kernels import ConstantKernel, MultiplicativeKernel


# The ODE integrator is checked against closed forms before anything else uses it as a reference.


def test_constant_kernel_closed_form_values():
    assert oracles.constant_kernel_density(1.0, 1) == 0.25
    for k in range(1, 12):
        assert oracles.constant_kernel_density(1.0, k) == pytest.approx(2.0 ** -(k + 1), rel=1e-15)


def test_smoluchowski_ode_matches_closed_form_at_k2():
    c = oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 1.0}, 200, 1.0)
    want = np.array([oracles.constant_kernel_density(1.0, k) for k in range(1, 201)])
    assert np.max(np.abs(c.c - want)) < 1e-10
    assert c[1] == pytest.approx(0.25, abs=1e-12)


def test_smoluchowski_ode_conserves_mass_with_flux():
    for t in (0.25, 0.5, 1.0):
        c = oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 1.0}, 200, t)
        assert abs(float(c.sizes @ c.c) + c.flux - 1.0) < 1e-6


def test_ode_at_time_zero_returns_initial_data():
    c = oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 0.5, 3: 0.25}, 10, 0.0)
    assert c[1] == 0.5 and c[3] == 0.25 and c.c.sum() == 0.75
    m = oracles.massflow_ode(ConstantKernel(2.0), [0.1, 0.2], 10, 0.0)
    assert m[1] == 0.1 and m[2] == 0.2


def test_massflow_ode_is_mass_density_of_smoluchowski():
    c = oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 1.0}, 200, 1.0)
    m = oracles.massflow_ode(ConstantKernel(2.0), {1: 1.0}, 200, 1.0)
    assert np.max(np.abs(m.c - c.sizes * c.c)) <= 1e-6
    assert abs(m.c.sum() + m.flux - 1.0) <= 1e-6


def test_ode_rejects_bad_input():
    with pytest.raises(UsageError):
        oracles.smoluchowski_ode(ConstantKernel(2.0), {0: 1.0}, 10, 1.0)
    with pytest.raises(UsageError):
        oracles.smoluchowski_ode(ConstantKernel(2.0), {1: -1.0}, 10, 1.0)
    with pytest.raises(UsageError):
        oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 1.0}, 10, -1.0)


def test_truncated_densities_csv():
    c = oracles.smoluchowski_ode(ConstantKernel(2.0), {1: 1.0}, 3, 0.0)
    assert c.to_csv() == "x,c\n1,1.0\n2,0.0\n3,0.0\n"


def test_gel_time_multiplicative():
    assert oracles.gel_time_multiplicative(1.0) == 1.0
    assert oracles.gel_time_multiplicative(2.0) == 0.5


def test_second_moment_blowup_lands_just_past_gel_time():
    for m2 in (1.0, 2.0):
        t = oracles.second_moment_blowup(m2)
        assert oracles.gel_time_multiplicative(m2) <= t < oracles.gel_time_multiplicative(m2) + 1e-3


def test_second_moment_ode_is_gel_point_for_multiplicative_kernel():
    # the truncated ODE under K = xy loses mass to the flux once t passes 1
    before = oracles.smoluchowski_ode(MultiplicativeKernel(), {1: 1.0}, 200, 0.8, dt=1e-3)
    after = oracles.smoluchowski_ode(MultiplicativeKernel(), {1: 1.0}, 200, 1.5, dt=1e-3)
    assert before.flux < 0.01
    assert after.flux > 0.3


def test_mf1_expected_explosion_time():
    assert oracles.mf1_expected_explosion_time(2.0) == 2.0
    assert oracles.mf1_expected_explosion_time(3.0) == pytest.approx(4.0 / 3.0, rel=1e-15)
    with pytest.raises(DivergenceError):
        oracles.mf1_expected_explosion_time(1.0)
    # partial sums of the rate series converge to the closed form
    s = math.fsum(1.0 / oracles.mf1_rate(k, 2.0) for k in range(80))
    assert s == pytest.approx(2.0, rel=1e-15)


def test_shifted_half_closed_forms():
    assert oracles.shifted_half_nonexplosion_prob(1.0) == 0.5
    assert oracles.shifted_half_nonexplosion_prob(2.0) == 0.25
    assert [oracles.shifted_half_slowest_path(1.0, k) for k in range(4)] == [1.0, 0.75, 0.625, 0.5625]
    with pytest.raises(DomainError):
        oracles.shifted_half_nonexplosion_prob(0.5)


def test_shifted_half_path_is_fixed_by_kappa():
    for k in range(21):
        eta = oracles.shifted_half_slowest_path(1.0, k)
        assert eta / 2 + 0.25 == oracles.shifted_half_slowest_path(1.0, k + 1)


def test_slowest_path_probability_telescopes_to_closed_form():
    # product of kappa(eta_k)/eta_k along the path, in exact arithmetic
    for x0 in (Fraction(1), Fraction(2), Fraction(3, 2)):
        x, p = x0, Fraction(1)
        for _ in range(200):
            big = x / 2 + Fraction(1, 4)
            p *= big / x
            x = big
        assert abs(float(p) - oracles.shifted_half_nonexplosion_prob(float(x0))) < 1e-15


def test_survival_tree_probability():
    assert oracles.shifted_half_survival_probability(1.0, 3) == 0.5625
    assert oracles.shifted_half_survival_probability(1.0) == pytest.approx(0.5, abs=1e-15)
    assert oracles.shifted_half_survival_probability(1.5) == pytest.approx(1 / 3, abs=1e-15)
    # above 3/2 the smaller fragment can also survive, so the total exceeds the single-path value
    assert oracles.shifted_half_survival_probability(2.0) == pytest.approx(0.5, abs=1e-15)
    assert oracles.shifted_half_survival_probability(2.0) > oracles.shifted_half_nonexplosion_prob(2.0)


def test_exact_split_jumps_bounds_numerators():
    assert oracles.exact_split_jumps(1.0) == 50
    assert oracles.exact_split_jumps(2.0) == 49
    assert oracles.exact_split_jumps(0.9) == 0
    # every state reachable within the budget round-trips through a double exactly
    for x0 in (1.0, 2.0):
        J = oracles.exact_split_jumps(x0)
        frontier = {Fraction(x0)}
        for _ in range(J):
            frontier = {c for x in frontier for c in (x / 2 + Fraction(1, 4), x / 2 - Fraction(1, 4))
                        if c > Fraction(1, 2)}
            frontier = set(sorted(frontier)[:4] + sorted(frontier)[-4:])  # extremes carry the largest numerators
            assert all(Fraction(float(x)) == x for x in frontier)


def test_halving_chain_rates_and_mean_tau():
    assert oracles.halving_chain_rate(0) == 0.5
    assert oracles.halving_chain_rate(3) == pytest.approx((3 * math.log(2) + 1) / 2)
    tau = oracles.halving_chain_mean_tau(1000)
    assert tau == pytest.approx(math.fsum(2.0 / (k * math.log(2) + 1) for k in range(1000)), rel=1e-15)


def test_halving_chain_partial_sums_grow_like_harmonic():
    euler = 0.5772156649015329
    for k in (10**3, 10**4, 10**5):
        s = oracles.halving_chain_mean_tau(k)
        harmonic = math.log(k) + euler
        assert abs(s - 2 / math.log(2) * harmonic) < 3.0


def test_fibonacci_path():
    assert oracles.fibonacci_path(0) == (1, 1)
    assert oracles.fibonacci_path(2) == (3, 2)
    assert oracles.fibonacci_path(4) == (8, 5)
    for k in range(1, 31):
        assert min(oracles.fibonacci_path(k)) >= 0.5 * oracles.GOLDEN ** (k - 1)
