"""
Tests for Adam, the L2 penalty, datasets, run configuration and the trainer
"""

import math

import numpy as np
import pytest
from scipy import stats

from micmco.engine import RngStream, Tape, backward
from micmco.errors import (
    CategoryIndexError,
    ConfigError,
    DivergenceError,
    NonFiniteGradientError,
    ShapeError,
)
from micmco.modeling import LatentSpec, ModelParams, ParamEntry, ParamGroup, read_checkpoint
from micmco.training import (
    AdamState,
    Dataset,
    RunConfig,
    adam_step,
    adam_update,
    initial_params,
    l2_penalty,
    make_synthetic_batch,
    train,
    training_step,
)
from micmco.training import trainer as trainer_module


def _small_config(**overrides):
    values = {
        "vocab_size": 8,
        "hidden_size": 4,
        "emb_size": 4,
        "n_latents": 2,
        "batch_size": 4,
        "steps": 3,
        "eval_every": 2,
        "eval_k": 3,
        "eval_examples": 5,
        "lr": 0.01,
    }
    values.update(overrides)
    return RunConfig.from_values(values)


# ============== Adam ==============

def test_first_step_moves_by_learning_rate():
    state = AdamState(lr=0.01)
    out = adam_update(state, {"w": np.array([1.0, -2.0])}, {"w": np.array([0.5, -3.0])})
    np.testing.assert_allclose(out["w"], [1.0 - 0.01, -2.0 + 0.01], atol=1e-9)
    assert state.t == 1


def test_zero_gradient_leaves_values():
    state = AdamState(lr=0.1)
    out = adam_update(state, {"w": np.array([1.5])}, {"w": np.array([0.0])})
    np.testing.assert_array_equal(out["w"], [1.5])


def test_quadratic_bowl_converges_monotonically():
    state = AdamState(lr=0.05)
    w = np.array([1.0])
    losses = []
    for _ in range(100):
        losses.append(0.5 * float(w[0] ** 2))
        w = adam_update(state, {"w": w}, {"w": w.copy()})["w"]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert abs(w[0]) < 0.1


def test_non_finite_gradient_is_rejected_without_side_effects():
    state = AdamState(lr=0.01)
    with pytest.raises(NonFiniteGradientError) as info:
        adam_update(state, {"a": np.ones(2), "b": np.ones(1)}, {"a": np.ones(2), "b": np.array([np.nan])})
    assert info.value.parameter == "b"
    assert state.t == 0 and not state.m


def test_gradient_shape_is_checked():
    with pytest.raises(ShapeError):
        adam_update(AdamState(lr=0.01), {"w": np.ones(2)}, {"w": np.ones(3)})
    with pytest.raises(ShapeError):
        adam_update(AdamState(lr=0.01), {"w": np.ones(2)}, {})


def test_learning_rate_must_be_positive():
    with pytest.raises(ConfigError):
        AdamState(lr=0.0)


def test_adam_step_on_model_params(continuous_params):
    grads = {name: np.ones_like(continuous_params[name]) for name in continuous_params.names()}
    updated, state = adam_step(AdamState(lr=0.1), continuous_params, grads)
    np.testing.assert_allclose(updated["dec.out.b"], continuous_params["dec.out.b"] - 0.1, atol=1e-7)
    assert state.t == 1


# ============== L2 penalty ==============

def _two_entry_params():
    return ModelParams(
        LatentSpec.continuous(1), 2, 1, 1,
        [
            ParamEntry("w", np.array([2.0]), ParamGroup.THETA),
            ParamEntry("b", np.array([3.0]), ParamGroup.THETA, is_bias=True),
        ],
    )


def test_l2_penalty_value_and_gradient():
    params = _two_entry_params()
    tape = Tape()
    penalty = l2_penalty(params, 0.5, tape)
    assert penalty.item() == pytest.approx(2.0)
    nodes = params.bind(tape)
    grads = backward(tape, penalty)
    assert grads[nodes["w"]][0] == pytest.approx(2.0)
    assert grads[nodes["b"]][0] == 0.0


def test_l2_penalty_edge_cases(continuous_params):
    assert l2_penalty(continuous_params, 0.0).item() == 0.0
    with pytest.raises(ConfigError):
        l2_penalty(continuous_params, -1.0)


# ============== Datasets ==============

def test_synthetic_batches():
    np.testing.assert_array_equal(make_synthetic_batch(1, 6, RngStream(0)), np.zeros(6))
    a = make_synthetic_batch(5, 100, RngStream(2, 1))
    b = make_synthetic_batch(5, 100, RngStream(2, 1))
    np.testing.assert_array_equal(a, b)
    counts = np.bincount(make_synthetic_batch(5, 20000, RngStream(3)), minlength=5)
    assert stats.chisquare(counts).pvalue > 0.001
    with pytest.raises(ConfigError):
        make_synthetic_batch(5, 0, RngStream(0))


def test_file_dataset(tmp_path):
    path = tmp_path / "symbols.txt"
    path.write_text("1\n1\n3\n\n0\n")
    dataset = Dataset.from_file(path, 4)
    np.testing.assert_allclose(dataset.probabilities(), [0.25, 0.5, 0.0, 0.25])
    assert set(dataset.sample(50, RngStream(0))) <= {0, 1, 3}
    assert Dataset.for_path("", 4).probabilities().tolist() == [0.25] * 4


def test_file_dataset_errors(tmp_path):
    path = tmp_path / "symbols.txt"
    path.write_text("1\n7\n")
    with pytest.raises(CategoryIndexError):
        Dataset.from_file(path, 4)
    with pytest.raises(ConfigError):
        Dataset.from_file(tmp_path / "missing.txt", 4)
    bad = tmp_path / "bad.txt"
    bad.write_text("one\ntwo\n")
    with pytest.raises(ConfigError):
        Dataset.from_file(bad, 4)


# ============== Run configuration ==============

def test_run_config_defaults():
    config = RunConfig()
    assert config.latent_spec() == LatentSpec.continuous(40)
    assert config.steps == 40000 and config.batch_size == 256 and config.eval_k == 100
    categorical = RunConfig.from_values({"latent_kind": "categorical", "base": "reinforce"})
    assert categorical.latent_spec() == LatentSpec.categorical(8, 10)


def test_run_config_errors_name_keys():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_values({"lambda": 0.5}, {"lambda": 4})
    assert info.value.key == "lambda" and info.value.line == 4
    with pytest.raises(ConfigError) as info:
        RunConfig.from_values({"learning_rate": 0.1})
    assert info.value.key == "learning_rate"
    with pytest.raises(ConfigError) as info:
        RunConfig.from_values({"objective": "renyi", "lambda": 0.5, "alpha": 1.0})
    assert info.value.key == "alpha"


def test_with_overrides_revalidates():
    config = _small_config(objective="kl", **{"lambda": 0.5})
    assert config.with_overrides(lam=0.2, seed=4).lam == 0.2
    with pytest.raises(ConfigError):
        config.with_overrides(lam=2.0)


# ============== Trainer ==============

def test_training_step_gradients_match_finite_differences():
    config = _small_config(l2=0.1, k_lik=3, k_mi=3, objective="kl", **{"lambda": 0.5})
    params = initial_params(config)
    xs = np.array([0, 3, 7])
    _, grads = training_step(params, xs, config, RngStream(5))
    for name in ("dec.out.b", "enc.mean.b", "dec.hidden1.w"):
        base = np.array(params[name])
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            up, down = base.copy(), base.copy()
            up[idx] += 1e-6
            down[idx] -= 1e-6
            f_up, _ = training_step(params.replace_values({name: up}), xs, config, RngStream(5))
            f_down, _ = training_step(params.replace_values({name: down}), xs, config, RngStream(5))
            numeric[idx] = (f_up - f_down) / 2e-6
        np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-7)


def test_zero_steps_returns_initial_params():
    config = _small_config(steps=0)
    run = train(config)
    assert run.history == [] and run.final_row is None
    np.testing.assert_array_equal(run.params["enc.embedding"], initial_params(config)["enc.embedding"])


def test_same_seed_gives_identical_history():
    config = _small_config()
    a, b = train(config), train(config)
    assert [r.to_dict() for r in a.history] == [r.to_dict() for r in b.history]
    assert a.losses == b.losses
    assert [r.step for r in a.history] == [2, 3]


def test_evaluation_cadence_does_not_change_trajectory():
    a = train(_small_config(eval_every=1))
    b = train(_small_config(eval_every=3))
    assert a.losses == b.losses
    np.testing.assert_array_equal(a.params["dec.out.w"], b.params["dec.out.w"])
    assert a.final_row.to_dict() == b.final_row.to_dict()


def test_rows_are_reported_as_they_happen():
    seen = []
    run = train(_small_config(steps=4, eval_every=2), on_row=seen.append)
    assert seen == run.history
    row = seen[-1].to_dict()
    assert row["lambda"] == 0.0 and row["base"] == "iwae" and row["wall_time_s"] == 0.0


@pytest.mark.parametrize("config", [
    {"latent_kind": "categorical", "base": "vimco", "k_lik": 2, "k_mi": 2, "objective": "kl", "lambda": 0.3},
    {"base": "dreg", "k_lik": 3, "k_mi": 3, "objective": "renyi", "lambda": 0.3, "alpha": 2.0},
    {"base": "stl", "objective": "power", "alpha": 2.0},
    {"base": "elbo_analytic", "k_lik": 2, "k_mi": 4, "objective": "kl", "lambda": 0.5},
])
def test_every_estimator_trains(config):
    run = train(_small_config(**config))
    assert len(run.history) == 2
    assert all(math.isfinite(r.nll) for r in run.history)


def test_divergence_saves_last_good_checkpoint(tmp_path, monkeypatch):
    calls = {"n": 0}
    real_step = trainer_module.training_step

    def flaky(params, xs, config, rng):
        calls["n"] += 1
        if calls["n"] == 2:
            return float("nan"), {}
        return real_step(params, xs, config, rng)

    monkeypatch.setattr(trainer_module, "training_step", flaky)
    config = _small_config()
    path = tmp_path / "checkpoint.bin"
    with pytest.raises(DivergenceError) as info:
        train(config, checkpoint_path=path)
    assert info.value.step == 2
    saved = read_checkpoint(path, config.latent_spec())
    assert not np.array_equal(saved["dec.out.b"], initial_params(config)["dec.out.b"])


def test_non_finite_gradient_diverges(monkeypatch):
    def poisoned(params, xs, config, rng):
        grads = {name: np.full(params[name].shape, np.inf) for name in params.names()}
        return 1.0, grads

    monkeypatch.setattr(trainer_module, "training_step", poisoned)
    with pytest.raises(DivergenceError) as info:
        train(_small_config())
    assert info.value.step == 1


@pytest.mark.slow
def test_uniform_data_training_stays_near_log_vocab():
    config = _small_config(vocab_size=16, hidden_size=16, emb_size=16, steps=500, batch_size=64,
                           eval_every=500, eval_k=20, eval_examples=256)
    final = train(config).final_row
    assert final.nll == pytest.approx(math.log(16), abs=0.1)
    assert final.avg_kl < 0.1
