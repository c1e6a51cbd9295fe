"""
Tiny Enumerable Models
Explicit prior, likelihood and proposal tables over |Z|, |X| ≤ 16, optionally
generated from logits so that exact gradients can be taken
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.special import softmax

from ..engine.diffcore import NodeRef, Tape, embedding_lookup, pick
from ..engine.stochastics import RngStream
from ..errors import ConfigError

MAX_STATES = 16
ROW_TOLERANCE = 1e-12
POSITIVITY_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class TinyLogits:
    """Unnormalized log-tables; θ = (prior, likelihood), φ = proposal"""
    prior: np.ndarray        # (Z,)
    likelihood: np.ndarray   # (Z, X)
    proposal: np.ndarray     # (X, Z)


@dataclass(frozen=True)
class TinyTables:
    """Log-tables of one model as nodes on a tape"""
    log_prior: NodeRef       # (Z,)
    log_lik: NodeRef         # (Z, X)
    log_prop: NodeRef        # (X, Z)
    leaves: Dict[str, NodeRef]

    def log_lik_column(self, x: int) -> NodeRef:
        """ln p(x|z) for every z"""
        n_z = self.log_lik.shape[0]
        return pick(self.log_lik, np.full(n_z, x, dtype=np.int64))

    def log_prop_row(self, x: int) -> NodeRef:
        """ln q(z|x) for every z"""
        row = embedding_lookup(self.log_prop, np.array([x]))
        return row.reshape(self.log_prop.shape[1])


@dataclass(eq=False)
class TinyModel:
    """
    p(z), p(x|z) and q(z|x) as explicit tables

    With strict=True every entry must be positive; strict=False admits
    zeros (deterministic decoders) for the table-only oracle quantities.
    """
    prior: np.ndarray
    likelihood: np.ndarray
    proposal: np.ndarray
    logits: Optional[TinyLogits] = None
    strict: bool = True

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=np.float64)
        self.likelihood = np.asarray(self.likelihood, dtype=np.float64)
        self.proposal = np.asarray(self.proposal, dtype=np.float64)
        n_z, n_x = self.likelihood.shape
        if self.prior.shape != (n_z,) or self.proposal.shape != (n_x, n_z):
            raise ConfigError(
                f"inconsistent table shapes prior {self.prior.shape}, "
                f"likelihood {self.likelihood.shape}, proposal {self.proposal.shape}"
            )
        if n_z > MAX_STATES or n_x > MAX_STATES:
            raise ConfigError(f"tiny models hold at most {MAX_STATES} states, got |Z|={n_z}, |X|={n_x}")
        for name, table in (("prior", self.prior), ("likelihood", self.likelihood), ("proposal", self.proposal)):
            sums = table.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > ROW_TOLERANCE):
                raise ConfigError(f"{name} rows must sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3g})")
            if self.strict and np.any(table <= 0.0):
                raise ConfigError(f"{name} has non-positive entries in a strict model")
            if np.any(table < 0.0):
                raise ConfigError(f"{name} has negative entries")

    @property
    def n_z(self) -> int:
        return self.likelihood.shape[0]

    @property
    def n_x(self) -> int:
        return self.likelihood.shape[1]

    @property
    def is_parameterized(self) -> bool:
        return self.logits is not None

    # ---------- construction ----------
    @classmethod
    def from_logits(cls, prior: np.ndarray, likelihood: np.ndarray, proposal: np.ndarray) -> "TinyModel":
        logits = TinyLogits(
            np.asarray(prior, dtype=np.float64),
            np.asarray(likelihood, dtype=np.float64),
            np.asarray(proposal, dtype=np.float64),
        )
        return cls(
            prior=softmax(logits.prior),
            likelihood=softmax(logits.likelihood, axis=-1),
            proposal=softmax(logits.proposal, axis=-1),
            logits=logits,
        )

    def with_proposal(self, proposal: np.ndarray) -> "TinyModel":
        """Same model with another (table-only) proposal"""
        return TinyModel(self.prior, self.likelihood, proposal, None, self.strict)

    def posterior_table(self) -> np.ndarray:
        """p(z|x) as an (X, Z) table"""
        joint = self.prior[:, None] * self.likelihood
        return (joint / joint.sum(axis=0, keepdims=True)).T

    # ---------- parameter vector ----------
    def param_vector(self) -> np.ndarray:
        if self.logits is None:
            raise ConfigError("model has no logits to differentiate")
        lg = self.logits
        return np.concatenate([lg.prior.ravel(), lg.likelihood.ravel(), lg.proposal.ravel()])

    @property
    def n_theta(self) -> int:
        return self.n_z + self.n_z * self.n_x

    def with_param_vector(self, vector: np.ndarray) -> "TinyModel":
        n_z, n_x = self.n_z, self.n_x
        vector = np.asarray(vector, dtype=np.float64)
        prior = vector[:n_z]
        lik = vector[n_z:n_z + n_z * n_x].reshape(n_z, n_x)
        prop = vector[n_z + n_z * n_x:].reshape(n_x, n_z)
        return TinyModel.from_logits(prior, lik, prop)

    # ---------- tape binding ----------
    def bind(self, tape: Tape, requires_grad: bool = True) -> TinyTables:
        """Log-tables as nodes; parameterized models expose their logits as leaves"""
        if self.logits is None:
            with np.errstate(divide="ignore"):
                return TinyTables(
                    tape.constant(np.log(self.prior)),
                    tape.constant(np.log(self.likelihood)),
                    tape.constant(np.log(self.proposal)),
                    leaves={},
                )
        leaves = {
            "prior": tape.leaf(self.logits.prior, requires_grad),
            "likelihood": tape.leaf(self.logits.likelihood, requires_grad),
            "proposal": tape.leaf(self.logits.proposal, requires_grad),
        }
        return TinyTables(
            leaves["prior"].log_softmax(axis=-1),
            leaves["likelihood"].log_softmax(axis=-1),
            leaves["proposal"].log_softmax(axis=-1),
            leaves=leaves,
        )


# ============== Generators ==============

def _dirichlet_rows(rng: RngStream, n_rows: Optional[int], n_cols: int, floor: float) -> np.ndarray:
    rows = rng.dirichlet(np.ones(n_cols), size=n_rows)
    rows = np.maximum(rows, floor)
    return rows / rows.sum(axis=-1, keepdims=True)


def random_tiny_model(
    rng: RngStream,
    n_z: int = 3,
    n_x: int = 3,
    floor: float = POSITIVITY_FLOOR,
) -> TinyModel:
    """Dirichlet(1, …, 1) tables floored at `floor`, carried as logits"""
    prior = _dirichlet_rows(rng, None, n_z, floor)
    lik = _dirichlet_rows(rng, n_z, n_x, floor)
    prop = _dirichlet_rows(rng, n_x, n_z, floor)
    return TinyModel.from_logits(np.log(prior), np.log(lik), np.log(prop))


def deterministic_decoder_model(rng: RngStream, n_z: int = 4, n_x: int = 3) -> TinyModel:
    """Each z emits exactly one symbol, so H(X|Z) = 0"""
    prior = _dirichlet_rows(rng, None, n_z, POSITIVITY_FLOOR)
    assignment = np.arange(n_z) % n_x
    rng.generator.shuffle(assignment)
    lik = np.zeros((n_z, n_x))
    lik[np.arange(n_z), assignment] = 1.0
    prop = _dirichlet_rows(rng, n_x, n_z, POSITIVITY_FLOOR)
    return TinyModel(prior, lik, prop, strict=False)


def collapsed_tiny_model(rng: RngStream, n_z: int = 3, n_x: int = 3) -> TinyModel:
    """p(x|z) independent of z and q(z|x) = p(z)"""
    prior = _dirichlet_rows(rng, None, n_z, POSITIVITY_FLOOR)
    row = _dirichlet_rows(rng, None, n_x, POSITIVITY_FLOOR)
    lik_logits = np.tile(np.log(row), (n_z, 1))
    prop_logits = np.tile(np.log(prior), (n_x, 1))
    return TinyModel.from_logits(np.log(prior), lik_logits, prop_logits)

