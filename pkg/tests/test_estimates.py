import json

import pytest

from cgolab.estimates import NORM_LAMBDAS, REGISTRY, EstimateConfig, list_checks, run_all, run_check

QUICK = EstimateConfig(N=32)


def test_registry_has_fifteen_anchored_checks():
    checks = list_checks()
    assert len(checks) == 15
    assert all(isinstance(a, str) and a for a in checks.values())
    assert {c.mode for c in REGISTRY.values()} <= {"spread", "slope", "exact"}


def test_unknown_check():
    with pytest.raises(KeyError):
        run_check("no_such_check", QUICK)


@pytest.fixture(scope="module")
def quick_reports():
    return {r.name: r for r in run_all(QUICK)}


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_check_passes_at_quick_resolution(quick_reports, name):
    rep = quick_reports[name]
    assert rep.passed, (rep.statistic, rep.threshold)
    if rep.mode != "exact":
        assert len(rep.x) >= 5


def test_operator_norms_cover_every_order(quick_reports):
    for name in ("jphi_norm", "iphi_norm"):
        spreads = quick_reports[name].extras["spreads"]
        assert set(spreads) == {str(v) for v in NORM_LAMBDAS}
        assert max(spreads.values()) <= 4


def test_reports_are_reproducible(quick_reports):
    again = run_check("trilinear", QUICK)
    first = quick_reports["trilinear"]
    assert again.values == first.values and again.seed == first.seed
    blob = first.to_json()
    json.dumps(blob)
    assert blob["name"] == "trilinear"


def test_seed_changes_random_checks():
    a = run_check("smooth_mult", EstimateConfig(N=32, seed=1))
    b = run_check("smooth_mult", EstimateConfig(N=32, seed=2))
    assert a.values != b.values
