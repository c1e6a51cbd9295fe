"""
Trainer
Adam over fresh minibatches with the configured objective and gradient
estimator, periodic evaluation, and the metric history of the run
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ..engine.diffcore import Tape
from ..engine.stochastics import RngStream, StreamPurpose
from ..errors import DivergenceError, NonFiniteGradientError
from ..modeling.checkpoint import write_checkpoint
from ..modeling.models import ModelParams, encode, init_model
from ..objectives.composite import evaluate_objective
from ..objectives.evaluation import evaluate_model
from ..objectives.log_weights import draw_log_weights
from ..objectives.surrogates import build_surrogate, surrogate_gradients
from ..settings import settings
from .adam import AdamState, adam_step, l2_penalty
from .dataset import Dataset
from .run_config import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class MetricsRow:
    """One evaluation point of a run"""
    step: int
    nll: float
    avg_kl: float
    lam: float
    alpha: float
    base: str
    k_lik: int
    k_mi: int
    seed: int
    wall_time_s: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "nll": self.nll,
            "avg_kl": self.avg_kl,
            "lambda": self.lam,
            "alpha": self.alpha,
            "base": self.base,
            "k_lik": self.k_lik,
            "k_mi": self.k_mi,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
        }


@dataclass(eq=False)
class TrainRun:
    """A configured run and, once trained, its history and final parameters"""
    config: RunConfig
    history: List[MetricsRow] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    params: Optional[ModelParams] = None

    @property
    def final_row(self) -> Optional[MetricsRow]:
        return self.history[-1] if self.history else None


@dataclass
class _Streams:
    minibatch: RngStream
    latent: RngStream
    init: RngStream

    @classmethod
    def for_seed(cls, seed: int) -> "_Streams":
        return cls(
            minibatch=RngStream.for_purpose(seed, StreamPurpose.MINIBATCH),
            latent=RngStream.for_purpose(seed, StreamPurpose.LATENT),
            init=RngStream.for_purpose(seed, StreamPurpose.INIT),
        )


def initial_params(config: RunConfig) -> ModelParams:
    """The parameters a run with this config starts from"""
    return init_model(
        config.latent_spec(),
        config.vocab_size,
        config.hidden_size,
        config.emb_size,
        _Streams.for_seed(config.seed).init,
    )


def training_step(
    params: ModelParams,
    xs: np.ndarray,
    config: RunConfig,
    rng: RngStream,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Loss and gradients for one minibatch

    The loss is the negated batch-mean objective plus the L2 penalty; the
    gradients are those of the estimator's surrogate under the same sign.

    Returns:
        (loss, grads by parameter name)
    """
    objective = config.objective_config()
    tape = Tape()
    params.bind(tape)
    proposal = encode(params, xs, tape)
    batch_lik = draw_log_weights(params, xs, objective.k_lik, rng, tape, proposal=proposal)
    batch_mi = None
    if objective.uses_mi_batch and not objective.shares_batch:
        batch_mi = draw_log_weights(params, xs, objective.k_mi, rng, tape, proposal=proposal)
    output = evaluate_objective(objective, batch_lik, batch_mi)
    surrogate = build_surrogate(objective, output)
    penalty = l2_penalty(params, config.l2, tape)
    loss = -output.mean_value + penalty.item()
    if not math.isfinite(loss):
        return loss, {}
    grads = surrogate_gradients(surrogate, params, tape, penalty=penalty, sign=-1.0)
    return loss, grads


def evaluation_set(config: RunConfig, dataset: Dataset) -> np.ndarray:
    """Fixed examples every periodic evaluation of the run is scored on"""
    return dataset.sample(config.eval_examples, RngStream.for_purpose(config.seed, StreamPurpose.EVAL, 0))


def _save_last_good(params: ModelParams, checkpoint_path: Optional[Path]) -> None:
    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, params)
        logger.warning("last good checkpoint saved to %s", checkpoint_path)


def train(
    config: RunConfig,
    dataset: Optional[Dataset] = None,
    checkpoint_path: Optional[Union[str, Path]] = None,
    on_row: Optional[Callable[[MetricsRow], None]] = None,
) -> TrainRun:
    """
    Run config.steps Adam steps and evaluate every config.eval_every steps
    and after the final step

    Minibatches, latent samples, initialization and evaluation each draw from
    their own stream, so the evaluation cadence never changes the training
    trajectory. Identical configs give bit-identical histories.

    Args:
        dataset: Data distribution; defaults to the one named by config.data_file
        checkpoint_path: Where the last good parameters go if training diverges
        on_row: Called with each metrics row as soon as it is recorded

    Raises:
        DivergenceError: the loss or a gradient became non-finite
    """
    dataset = dataset if dataset is not None else Dataset.for_path(config.data_file, config.vocab_size)
    checkpoint_path = Path(checkpoint_path) if checkpoint_path is not None else None
    objective = config.objective_config()
    streams = _Streams.for_seed(config.seed)
    params = initial_params(config)
    run = TrainRun(config=config, params=params)
    if config.steps == 0:
        return run

    eval_xs = evaluation_set(config, dataset)
    state = AdamState(lr=config.lr)
    started = time.perf_counter()
    logger.info(
        "training %s/%s lambda=%g alpha=%g for %d steps (seed %d)",
        objective.base.value, objective.objective.value, objective.effective_lambda,
        config.alpha, config.steps, config.seed,
    )

    for step in range(1, config.steps + 1):
        xs = dataset.sample(config.batch_size, streams.minibatch)
        loss, grads = training_step(params, xs, config, streams.latent)
        if not math.isfinite(loss):
            _save_last_good(params, checkpoint_path)
            raise DivergenceError(step)
        try:
            params, state = adam_step(state, params, grads)
        except NonFiniteGradientError as e:
            _save_last_good(params, checkpoint_path)
            raise DivergenceError(step, str(e)) from e
        run.losses.append(loss)
        run.params = params

        if step % config.eval_every == 0 or step == config.steps:
            elapsed = time.perf_counter() - started
            result = evaluate_model(
                params, eval_xs, config.eval_k,
                RngStream.for_purpose(config.seed, StreamPurpose.EVAL, step),
            )
            row = MetricsRow(
                step=step,
                nll=result.nll,
                avg_kl=result.avg_kl,
                lam=objective.effective_lambda,
                alpha=config.alpha,
                base=objective.base.value,
                k_lik=objective.k_lik,
                k_mi=objective.k_mi,
                seed=config.seed,
                wall_time_s=round(elapsed, 3) if settings.wall_clock else 0.0,
            )
            run.history.append(row)
            if on_row is not None:
                on_row(row)
            window = run.losses[-config.eval_every:]
            logger.info(
                "step %d loss %.4f nll %.4f avg_kl %.4f (%.1fs)",
                step, float(np.mean(window)), row.nll, row.avg_kl, elapsed,
            )
            if row.avg_kl < -0.02:
                logger.warning("step %d: avg_kl %.4f below the Monte-Carlo noise floor", step, row.avg_kl)

    return run
