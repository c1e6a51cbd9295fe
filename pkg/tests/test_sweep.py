"""
Tests for sweep grids, planning and execution
"""

import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from micmco.cli import execute_run, parse_grid, plan_sweep, run_sweep
from micmco.cli import sweep as sweep_module
from micmco.engine import RngStream, StreamPurpose
from micmco.errors import ConfigError, DivergenceError
from micmco.modeling import read_checkpoint
from micmco.objectives import evaluate_model
from micmco.training import Dataset, RunConfig


def _base(**overrides):
    values = {
        "vocab_size": 6, "hidden_size": 3, "emb_size": 3, "n_latents": 2,
        "batch_size": 3, "steps": 2, "eval_every": 2, "eval_k": 2, "eval_examples": 4,
        "objective": "kl", "lambda": 0.1, "seed": 10,
    }
    values.update(overrides)
    return RunConfig.from_values(values)


# ============== Grid documents ==============

def test_parse_grid():
    grid = parse_grid("lambda = 0.0, 0.5\nseed=1,2,3\n")
    assert grid.values == {"lambda": [0.0, 0.5], "seed": [1, 2, 3]}
    assert all(isinstance(s, int) for s in grid.values["seed"])
    assert len(grid) == 6


@pytest.mark.parametrize("text, key", [
    ("lambda=\n", "lambda"),
    ("batch_size=1,2\n", "batch_size"),
    ("alpha=2,two\n", "alpha"),
])
def test_bad_grids(text, key):
    with pytest.raises(ConfigError) as info:
        parse_grid(text)
    assert info.value.key == key


def test_points_vary_last_key_fastest():
    grid = parse_grid("seed=1,2\nlambda=0.1,0.2\n")
    assert grid.points() == [
        {"lambda": 0.1, "seed": 1},
        {"lambda": 0.1, "seed": 2},
        {"lambda": 0.2, "seed": 1},
        {"lambda": 0.2, "seed": 2},
    ]


# ============== Planning ==============

def test_plan_derives_seeds_from_base():
    plan = plan_sweep(_base(), parse_grid("lambda=0.0,0.5\n"))
    assert [p.run_id for p in plan] == ["run_000", "run_001"]
    assert [p.config.seed for p in plan] == [10, 11]
    assert [p.config.lam for p in plan] == [0.0, 0.5]


def test_plan_uses_listed_seeds():
    plan = plan_sweep(_base(), parse_grid("seed=4,4\n"))
    assert [p.config.seed for p in plan] == [4, 4]


def test_plan_validates_every_point():
    with pytest.raises(ConfigError):
        plan_sweep(_base(), parse_grid("lambda=0.5,1.5\n"))


# ============== Execution ==============

def test_sweep_writes_runs_and_summary(tmp_path):
    frame = run_sweep(_base(), parse_grid("lambda=0.0,0.5\n"), tmp_path)
    assert frame["status"].tolist() == ["ok", "ok"]
    assert frame["run_id"].tolist() == ["run_000", "run_001"]
    for run_id in ("run_000", "run_001"):
        assert (tmp_path / run_id / "metrics.csv").is_file()
        assert (tmp_path / run_id / "checkpoint.bin").is_file()
    summary = pd.read_csv(tmp_path / "sweep.csv")
    assert summary["lambda"].tolist() == [0.0, 0.5]
    assert summary["step"].tolist() == [2, 2]


def test_single_point_sweep_matches_direct_run(tmp_path):
    base = _base()
    run_sweep(base, parse_grid(f"seed={base.seed}\n"), tmp_path / "sweep")
    execute_run(base, tmp_path / "direct")
    for name in ("metrics.csv", "checkpoint.bin"):
        assert (tmp_path / "sweep" / "run_000" / name).read_bytes() == (tmp_path / "direct" / name).read_bytes()


def test_failed_run_is_recorded(tmp_path, monkeypatch):
    real = sweep_module.execute_run

    def failing(config, out_dir):
        if config.lam > 0.2:
            raise DivergenceError(1, "loss became nan")
        return real(config, out_dir)

    monkeypatch.setattr(sweep_module, "execute_run", failing)
    frame = run_sweep(_base(), parse_grid("lambda=0.0,0.5\n"), tmp_path)
    assert frame["status"].tolist() == ["ok", "failed"]
    assert "nan" in frame.loc[1, "error"]
    assert (tmp_path / "sweep.csv").is_file()


# ============== Acceptance runs ==============

LAMBDAS = (0.0, 0.3, 0.6, 0.9)


@pytest.fixture(scope="module")
def lambda_sweep(tmp_path_factory):
    """Categorical 8x10, VIMCO 16, KL objective, every lambda under three seeds"""
    base = RunConfig.from_values({
        "latent_kind": "categorical", "n_latents": 8, "n_categories": 10,
        "base": "vimco", "k_lik": 16, "k_mi": 16, "objective": "kl",
        "steps": 4000, "batch_size": 64, "eval_every": 4000, "eval_k": 100,
    })
    out_dir = tmp_path_factory.mktemp("lambda_sweep")
    plan = plan_sweep(base, parse_grid(f"lambda={','.join(map(str, LAMBDAS))}\nseed=0,1,2\n"))
    runs = [(point, execute_run(point.config, out_dir / point.run_id)) for point in plan]
    return out_dir, runs


@pytest.mark.slow
def test_lambda_zero_collapses_posterior(tmp_path):
    base = RunConfig.from_values({
        "vocab_size": 10000, "hidden_size": 128, "objective": "none", "lambda": 0.0,
        "steps": 10000, "batch_size": 256, "eval_every": 10000, "eval_k": 100,
    })
    (point,) = plan_sweep(base, parse_grid("seed=0\n"))
    final = execute_run(point.config, tmp_path / point.run_id).final_row
    assert abs(final.nll - math.log(10000)) <= 0.02
    assert final.avg_kl <= 0.05


@pytest.mark.slow
def test_mutual_information_rises_with_lambda(lambda_sweep):
    _, runs = lambda_sweep
    lams = [point.config.lam for point, _ in runs]
    kls = [run.final_row.avg_kl for _, run in runs]
    rho, _ = stats.spearmanr(lams, kls)
    assert rho > 0.8, list(zip(lams, kls))


@pytest.mark.slow
def test_mutual_information_estimate_is_stable_across_seeds(lambda_sweep):
    out_dir, runs = lambda_sweep
    point, _ = runs[-1]
    params = read_checkpoint(out_dir / point.run_id / "checkpoint.bin", point.config.latent_spec())
    xs = Dataset.synthetic(params.vocab_size).sample(512, RngStream.for_purpose(0, StreamPurpose.EVAL, 0))
    kls = [
        evaluate_model(params, xs, 100, RngStream.for_purpose(seed, StreamPurpose.EVAL, 1)).avg_kl
        for seed in range(1, 11)
    ]
    assert np.std(kls, ddof=1) < 0.01
