import json

import pytest

from coagfrag import validations as val
from coagfrag.errors import UsageError


def test_split_budget_respects_double_precision():
    assert val.split_survival_jumps(1.0) == 50
    assert val.split_survival_jumps(2.0) == 49
    assert val.split_survival_jumps(1.0 + 2.0**-40) == 53 - 40 - 2


@pytest.mark.parametrize("name, kwargs", [
    ("mf1_mean_tau", {"replicates": 300}),
    ("mf1_alpha1_regular", {"replicates": 50, "horizon": 20.0}),
    ("shifted_split_survival_x0_1", {"replicates": 1000}),
    ("halving_chain_tau1000", {"replicates": 50}),
    ("fragmentation_explosion", {"replicates": 30}),
    ("fragmentation_cauchy", {"replicates": 1, "exponents": range(8, 12)}),
    ("fragmentation_source_regular", {"replicates": 5, "horizon": 2.0}),
    ("massflow_coag_explosion_n2", {"replicates": 30}),
    ("const_kernel_tv", {"n": 2000}),
    ("drift_direct_fragmentation", {"states": 10}),
    ("drift_massflow_coagulation", {"states": 10}),
    ("drift_massflow_fragmentation", {"states": 10, "samples": 400}),
    ("martingale_mf2", {"replicates": 100, "steps": 20}),
])
def test_quick_runs_pass(name, kwargs):
    res = val.run_validation(name, **kwargs)
    assert res.status == "PASS", res.line()
    assert res.line().startswith("PASS " + res.name)
    json.dumps(res.to_json(), allow_nan=False)


def test_shifted_split_from_two_matches_exact_tree():
    res = val.run_validation("shifted_split_tree_x0_2", replicates=2000)
    assert res.passed, res.line()


def test_massflow_hydro_quick():
    res = val.massflow_hydro(n=1000, replicates=4)
    assert res.passed, res.line()


def test_report_status():
    res = val.ValidationResult("x", None, 1.0, None, "report only")
    assert res.status == "REPORT"
    assert res.line() == "REPORT x: measured=1 expected=None tolerance=report only"


def test_unknown_name():
    with pytest.raises(UsageError):
        val.run_validation("no_such_check")
