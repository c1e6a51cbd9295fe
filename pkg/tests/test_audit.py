"""
Tests for the property audit: the checks pass on correct estimators and catch
a broken one
"""

import pytest

from micmco.engine import RngStream, StreamPurpose
from micmco.objectives import composite
from micmco.objectives.estimators import s_hat_iwae
from micmco.oracle import (
    CHECK_REGISTRY,
    CheckResult,
    EstimatorKind,
    exact_posterior_kl,
    exchangeable_expectation,
    format_audit_table,
    random_tiny_model,
    run_audit,
)
from micmco.oracle import enumeration
from micmco.oracle.audit import (
    check_beta_vae_equivalence,
    check_gradient_unbiasedness,
    check_iwae_bias,
    check_power_bounds,
    check_renyi_limit,
    check_single_sample_kl,
    check_single_sample_renyi,
    check_u_hat_variance,
)


@pytest.mark.parametrize("check, kwargs", [
    (check_single_sample_kl, {"n_models": 10}),
    (check_single_sample_renyi, {"n_models": 10}),
    (check_beta_vae_equivalence, {"n_models": 5}),
    (check_iwae_bias, {"n_models": 3}),
    (check_power_bounds, {"n_models": 10}),
    (check_renyi_limit, {"n_models": 10}),
    (check_gradient_unbiasedness, {"n_models": 2}),
    (check_u_hat_variance, {"n_models": 5}),
])
def test_checks_pass(check, kwargs):
    passed, detail = check(0, **kwargs)
    assert passed, detail


def test_run_audit_selected_checks():
    results = run_audit(3, ["single_sample_kl", "renyi_limit"])
    assert [r.name for r in results] == ["single_sample_kl", "renyi_limit"]
    assert all(isinstance(r, CheckResult) and r.passed for r in results)
    assert all(r.seed == 3 for r in results)


def test_broken_u_hat_is_caught(monkeypatch):
    original = composite.u_hat
    monkeypatch.setattr(composite, "u_hat", lambda batch: -original(batch))
    passed, detail = check_single_sample_kl(0, n_models=3)
    assert not passed
    assert "model 0" in detail


def test_inconsistent_kl_estimate_is_caught(monkeypatch):
    # weights p(x|z) in place of the importance weights: right at K=1, wrong
    # in the limit
    def misweighted(lik, mi, config, alpha):
        w = lik.log_lik.log_softmax(axis=-1).exp()
        return (w * lik.log_lik).sum(axis=-1) - s_hat_iwae(lik)

    monkeypatch.setitem(enumeration.ESTIMATOR_REGISTRY, EstimatorKind.KL_EST, misweighted)
    passed, detail = check_iwae_bias(0, n_models=3)
    assert not passed
    assert "posterior proposal" in detail


def test_bias_direction_fails_without_its_premise():
    # E[Û−Ŝ] ≥ KL is not a theorem: random models undershoot
    undershoots = 0
    for i in range(10):
        model = random_tiny_model(RngStream.for_purpose(0, StreamPurpose.ORACLE, i))
        for x in range(model.n_x):
            for K in (1, 2, 4):
                kl = exchangeable_expectation(model, x, EstimatorKind.KL_EST, K)
                undershoots += kl < exact_posterior_kl(model, x)
    assert undershoots > 0


def test_exceptions_count_as_failures(monkeypatch):
    def explode(seed):
        raise RuntimeError("boom")

    check = CHECK_REGISTRY["renyi_limit"]
    monkeypatch.setitem(CHECK_REGISTRY, "renyi_limit", type(check)(check.name, check.property, explode))
    (result,) = run_audit(0, ["renyi_limit"])
    assert not result.passed
    assert "RuntimeError: boom" in result.detail


def test_table_format():
    results = [
        CheckResult("single_sample_kl", "per-draw identity", True, 0),
        CheckResult("iwae_bias", "monotone in K", False, 0, "model 1 off"),
    ]
    table = format_audit_table(results).splitlines()
    assert table[0].startswith("check")
    assert "[OK]" in table[1] and "single_sample_kl" in table[1]
    assert "[FAIL]" in table[2] and "iwae_bias" in table[2]
    assert table[3].strip() == "model 1 off"


def test_registry_names():
    assert set(CHECK_REGISTRY) == {
        "single_sample_kl",
        "single_sample_renyi",
        "beta_vae_equivalence",
        "iwae_bias",
        "power_bounds",
        "renyi_limit",
        "gradient_unbiasedness",
        "u_hat_variance",
    }


@pytest.mark.slow
def test_full_audit_passes():
    results = run_audit(0)
    assert all(r.passed for r in results), format_audit_table(results)
