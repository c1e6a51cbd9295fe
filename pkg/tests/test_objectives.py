"""
Tests for objective configuration, the Monte-Carlo estimators, the composite
objectives and model evaluation
"""

import math

import numpy as np
import pytest
from scipy.special import logsumexp, softmax

from micmco.engine import RngStream, Tape
from micmco.errors import ConfigError
from micmco.modeling import LatentKind, LatentSpec, init_model
from micmco.objectives import (
    BaseEstimator,
    LogWeightBatch,
    ObjectiveConfig,
    ObjectiveKind,
    draw_log_weights,
    evaluate_model,
    evaluate_objective,
    kl_estimate,
    objective_kl,
    objective_power,
    objective_renyi,
    renyi_estimate,
    representational_kl,
    s_hat_alpha,
    s_hat_elbo,
    s_hat_iwae,
    u_hat,
)


def _batch(log_lik, log_prior, log_prop):
    tape = Tape()
    return LogWeightBatch(
        log_lik=tape.leaf(np.atleast_2d(log_lik)),
        log_prior=tape.constant(np.atleast_2d(log_prior)),
        log_prop=tape.leaf(np.atleast_2d(log_prop)),
        latent=np.zeros(np.atleast_2d(log_lik).shape, dtype=np.int64),
    )


LL = np.array([[-2.0, -0.5, -3.0], [-1.0, -1.2, -0.1]])
LP = np.array([[-1.0, -1.5, -0.7], [-2.0, -0.3, -0.9]])
LQ = np.array([[-0.4, -2.0, -1.1], [-1.5, -0.8, -0.6]])


# ============== Configuration ==============

@pytest.mark.parametrize("values", [
    {"objective": "renyi", "lambda": 0.5, "alpha": 1.0},
    {"objective": "renyi", "lambda": 0.5, "alpha": 1.0 + 1e-9},
    {"base": "vimco", "latent_kind": "categorical", "k_lik": 1},
    {"base": "vimco", "latent_kind": "categorical", "k_lik": 2, "k_mi": 1, "objective": "kl", "lambda": 0.2},
    {"base": "stl", "k_lik": 2},
    {"base": "reinforce", "latent_kind": "continuous"},
    {"base": "iwae", "latent_kind": "categorical"},
    {"objective": "none", "lambda": 0.3},
    {"objective": "kl", "lambda": 1.0},
    {"objective": "kl", "lambda": -0.1},
    {"objective": "power", "alpha": 2.0, "lambda": 0.3},
    {"k_lik": 0},
    {"alpha": -1.0, "objective": "power"},
    {"unknown": 1},
])
def test_invalid_configs_are_rejected(values):
    with pytest.raises(ConfigError):
        ObjectiveConfig.from_values(values)


def test_valid_configs():
    config = ObjectiveConfig.from_values({"objective": "kl", "lambda": 0.5, "k_lik": 4, "k_mi": 4})
    assert config.lam == 0.5
    assert config.uses_mi_batch and config.shares_batch
    assert config.sample_counts() == {"k_lik": 4}

    config = ObjectiveConfig.from_values({"objective": "power", "alpha": 2.0, "lambda": 0.5})
    assert config.effective_lambda == pytest.approx(0.5)

    config = ObjectiveConfig.from_values(
        {"base": "vimco", "latent_kind": "categorical", "k_lik": 2, "k_mi": 5, "objective": "kl", "lambda": 0.1}
    )
    assert config.sample_counts() == {"k_lik": 2, "k_mi": 5}
    assert config.is_score_function
    assert ObjectiveConfig().alpha == 1.5
    assert ObjectiveConfig().latent_kind is LatentKind.CONTINUOUS


def test_config_error_names_the_key():
    with pytest.raises(ConfigError) as info:
        ObjectiveConfig.from_values({"k_mi": 0})
    assert info.value.key == "k_mi"


# ============== Estimators ==============

def test_iwae_and_alpha_estimators_match_numpy():
    batch = _batch(LL, LP, LQ)
    log_w = LL + LP - LQ
    np.testing.assert_allclose(s_hat_iwae(batch).value, logsumexp(log_w, axis=-1) - math.log(3), atol=1e-13)
    np.testing.assert_allclose(
        s_hat_alpha(batch, 2.5).value,
        logsumexp(2.5 * LL + LP - LQ, axis=-1) - math.log(3),
        atol=1e-13,
    )
    np.testing.assert_allclose(s_hat_elbo(batch).value, log_w.mean(axis=-1), atol=1e-13)
    np.testing.assert_allclose(u_hat(batch).value, (softmax(log_w, axis=-1) * LL).sum(axis=-1), atol=1e-13)


def test_single_sample_identities():
    batch = _batch(LL[:, :1], LP[:, :1], LQ[:, :1])
    s = s_hat_iwae(batch)
    np.testing.assert_allclose(s.value, (LL + LP - LQ)[:, 0], atol=1e-13)
    np.testing.assert_allclose(u_hat(batch).value, LL[:, 0], atol=1e-13)
    np.testing.assert_allclose(kl_estimate(batch, s).value, (LQ - LP)[:, 0], atol=1e-13)


def test_alpha_one_reduces_to_iwae():
    batch = _batch(LL, LP, LQ)
    np.testing.assert_allclose(s_hat_alpha(batch, 1.0).value, s_hat_iwae(batch).value, atol=1e-14)


def test_iwae_never_exceeds_largest_log_weight():
    batch = _batch(LL, LP, LQ)
    assert np.all(s_hat_iwae(batch).value <= (LL + LP - LQ).max(axis=-1) + 1e-12)


def test_renyi_estimate_formula():
    tape = Tape()
    s_alpha = tape.constant([1.0])
    s = tape.constant([0.25])
    assert renyi_estimate(s_alpha, s, 3.0).item() == pytest.approx((1.0 - 0.75) / 2.0)


# ============== Objectives ==============

def test_kl_objective_mixes_s_and_u():
    batch = _batch(LL, LP, LQ)
    out = objective_kl(batch, batch, 0.3)
    expected = 0.7 * s_hat_iwae(batch).value + 0.3 * u_hat(batch).value
    np.testing.assert_allclose(out.value, expected, atol=1e-13)
    np.testing.assert_allclose(out.diagnostics["kl_est"], u_hat(batch).value - s_hat_iwae(batch).value, atol=1e-13)


def test_kl_objective_at_lambda_zero_is_plain():
    batch = _batch(LL, LP, LQ)
    np.testing.assert_allclose(objective_kl(batch, batch, 0.0).value, s_hat_iwae(batch).value, atol=1e-14)


def test_kl_objective_uses_separate_mi_batch():
    lik = _batch(LL, LP, LQ)
    mi = _batch(LL[:, :2], LP[:, :2], LQ[:, :2])
    out = objective_kl(lik, mi, 0.5)
    expected = 0.5 * s_hat_iwae(lik).value + 0.5 * u_hat(mi).value
    np.testing.assert_allclose(out.value, expected, atol=1e-13)


@pytest.mark.parametrize("lam, alpha", [(0.2, 0.5), (0.5, 1.5), (0.9, 3.0), (-0.05, 2.0)])
def test_single_sample_objectives_match_beta_vae(lam, alpha):
    batch = _batch(LL[:, :1], LP[:, :1], LQ[:, :1])
    ll, rate = LL[:, 0], (LQ - LP)[:, 0]
    beta_vae = ll - (1.0 - lam) * rate
    np.testing.assert_allclose(objective_kl(batch, batch, lam).value, beta_vae, atol=1e-12)
    np.testing.assert_allclose(objective_renyi(batch, batch, lam, alpha).value, beta_vae, atol=1e-12)
    np.testing.assert_allclose(objective_power(batch, alpha).value, ll - rate / alpha, atol=1e-12)


def test_renyi_objective_diagnostics():
    batch = _batch(LL, LP, LQ)
    out = objective_renyi(batch, batch, 0.4, 2.0)
    s = s_hat_iwae(batch).value
    s_a = s_hat_alpha(batch, 2.0).value
    np.testing.assert_allclose(out.diagnostics["renyi_est"], s_a - 2.0 * s, atol=1e-12)
    np.testing.assert_allclose(out.value, 0.4 * s_a - (0.8 - 1.0) * s, atol=1e-12)


def test_power_objective_is_renyi_at_derived_lambda():
    batch = _batch(LL, LP, LQ)
    alpha = 2.5
    power = objective_power(batch, alpha).value
    renyi = objective_renyi(batch, batch, (alpha - 1.0) / alpha, alpha).value
    np.testing.assert_allclose(power, renyi, atol=1e-12)


def test_evaluate_objective_dispatch():
    batch = _batch(LL, LP, LQ)
    plain = evaluate_objective(ObjectiveConfig(), batch)
    np.testing.assert_allclose(plain.value, s_hat_iwae(batch).value)
    kl = evaluate_objective(ObjectiveConfig(objective=ObjectiveKind.KL, lam=0.25), batch)
    assert set(kl.diagnostics) == {"s_hat", "u_hat", "kl_est"}
    power = evaluate_objective(ObjectiveConfig(objective=ObjectiveKind.POWER, alpha=2.0), batch)
    assert power.diagnostics["implied_lambda"][0] == pytest.approx(0.5)
    elbo = evaluate_objective(ObjectiveConfig(base=BaseEstimator.ELBO_SAMPLED), batch)
    np.testing.assert_allclose(elbo.value, (LL + LP - LQ).mean(axis=-1), atol=1e-13)


# ============== Drawing batches ==============

def test_draw_log_weights_shapes(continuous_params, categorical_params, rng):
    batch = draw_log_weights(continuous_params, np.array([0, 3, 5]), 4, rng, Tape())
    assert batch.log_lik.shape == (3, 4)
    assert batch.log_prop_path is not None
    assert batch.kl_analytic.shape == (3,)
    batch = draw_log_weights(categorical_params, 2, 6, rng, Tape())
    assert batch.log_weights.shape == (1, 6)
    assert batch.latent.shape == (1, 6, 2)
    assert batch.log_prop_path is None


def test_draw_log_weights_reuses_noise(continuous_params, rng):
    noise = np.random.default_rng(0).normal(size=(2, 3, 3))
    a = draw_log_weights(continuous_params, np.array([1, 2]), 3, rng, Tape(), noise=noise)
    b = draw_log_weights(continuous_params, np.array([1, 2]), 3, RngStream(99), Tape(), noise=noise)
    np.testing.assert_array_equal(a.log_weights.value, b.log_weights.value)


def test_draw_needs_positive_k(continuous_params, rng):
    with pytest.raises(ConfigError):
        draw_log_weights(continuous_params, 0, 0, rng, Tape())


# ============== Evaluation ==============

@pytest.mark.parametrize("spec", [LatentSpec.continuous(2), LatentSpec.categorical(2, 3)])
def test_collapsed_model_evaluates_to_log_vocab(spec):
    V = 50
    params = init_model(spec, V, 4, 4, scheme="zeros")
    result = evaluate_model(params, np.arange(20), 8, RngStream(1), max_rows=32)
    assert result.nll == pytest.approx(math.log(V), abs=1e-10)
    assert result.avg_kl == pytest.approx(0.0, abs=1e-10)
    assert result.rep_kl == pytest.approx(0.0, abs=1e-10)
    assert result.n_examples == 20
    assert representational_kl(params, np.arange(5)) == pytest.approx(0.0, abs=1e-12)


def test_evaluation_is_deterministic(continuous_params):
    xs = np.array([0, 1, 2, 3, 4, 5])
    a = evaluate_model(continuous_params, xs, 5, RngStream(3))
    b = evaluate_model(continuous_params, xs, 5, RngStream(3))
    assert a.to_dict() == b.to_dict()
    assert a.nll > 0.0
