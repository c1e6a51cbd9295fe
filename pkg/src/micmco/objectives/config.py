"""
Objective Configuration
Base estimator, sample counts, λ and α, validated as one frozen pydantic model
"""

from enum import Enum
from typing import Any, Dict, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError
from ..modeling.models import LatentKind

LAMBDA_RANGE = (-0.05, 0.9999)
ALPHA_SINGULARITY = 1e-6
DEFAULT_RENYI_ALPHA = 1.5


class BaseEstimator(str, Enum):
    """Marginal-likelihood estimator and its gradient estimator"""
    ELBO_ANALYTIC = "elbo_analytic"
    ELBO_SAMPLED = "elbo_sampled"
    IWAE = "iwae"
    STL = "stl"
    DREG = "dreg"
    REINFORCE = "reinforce"
    VIMCO = "vimco"


class ObjectiveKind(str, Enum):
    """Mutual-information augmentation applied on top of the base estimator"""
    NONE = "none"
    KL = "kl"
    RENYI = "renyi"
    POWER = "power"


CONTINUOUS_BASES = frozenset({
    BaseEstimator.ELBO_ANALYTIC,
    BaseEstimator.ELBO_SAMPLED,
    BaseEstimator.IWAE,
    BaseEstimator.STL,
    BaseEstimator.DREG,
})
SCORE_FUNCTION_BASES = frozenset({BaseEstimator.REINFORCE, BaseEstimator.VIMCO})


class ObjectiveConfig(BaseModel):
    """All objective hyperparameters; every invariant is checked at construction"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    base: BaseEstimator = BaseEstimator.IWAE
    latent_kind: LatentKind = LatentKind.CONTINUOUS
    k_lik: int = Field(default=1, ge=1)
    k_mi: int = Field(default=1, ge=1)
    objective: ObjectiveKind = ObjectiveKind.NONE
    lam: float = Field(default=0.0, alias="lambda")
    alpha: float = Field(default=DEFAULT_RENYI_ALPHA, gt=0.0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ObjectiveConfig":
        continuous = self.latent_kind is LatentKind.CONTINUOUS
        if continuous and self.base in SCORE_FUNCTION_BASES:
            raise ValueError(f"base '{self.base.value}' needs categorical latents")
        if not continuous and self.base in CONTINUOUS_BASES:
            raise ValueError(f"base '{self.base.value}' needs continuous latents")

        if self.base is BaseEstimator.VIMCO:
            for key, k in self.sample_counts().items():
                if k < 2:
                    raise ValueError(f"vimco needs at least 2 samples, {key}={k}")
        if self.base is BaseEstimator.STL:
            for key, k in self.sample_counts().items():
                if k != 1:
                    raise ValueError(f"stl is a single-sample estimator, {key}={k}")

        if self.objective is ObjectiveKind.NONE and self.lam != 0.0:
            raise ValueError("lambda has no effect with objective=none")
        if self.objective in (ObjectiveKind.KL, ObjectiveKind.RENYI):
            low, high = LAMBDA_RANGE
            if not low <= self.lam <= high:
                raise ValueError(f"lambda={self.lam} outside [{low}, {high}]")
        if self.objective is ObjectiveKind.RENYI and abs(self.alpha - 1.0) < ALPHA_SINGULARITY:
            raise ValueError(f"alpha={self.alpha} too close to 1 for the renyi objective; use objective=kl")
        if self.objective is ObjectiveKind.POWER and "lam" in self.model_fields_set:
            derived = (self.alpha - 1.0) / self.alpha
            if abs(self.lam - derived) > 1e-12:
                raise ValueError(
                    f"lambda is derived as (alpha-1)/alpha={derived:.6g} for objective=power"
                )
        return self

    # ---------- derived views ----------
    def sample_counts(self) -> Dict[str, int]:
        """K values of the batches this objective actually draws"""
        if self.uses_mi_batch and not self.shares_batch:
            return {"k_lik": self.k_lik, "k_mi": self.k_mi}
        return {"k_lik": self.k_lik}

    @property
    def uses_mi_batch(self) -> bool:
        return self.objective in (ObjectiveKind.KL, ObjectiveKind.RENYI)

    @property
    def shares_batch(self) -> bool:
        return self.k_lik == self.k_mi

    @property
    def effective_lambda(self) -> float:
        if self.objective is ObjectiveKind.POWER:
            return (self.alpha - 1.0) / self.alpha
        return self.lam

    @property
    def uses_alpha(self) -> bool:
        return self.objective in (ObjectiveKind.RENYI, ObjectiveKind.POWER)

    @property
    def is_score_function(self) -> bool:
        return self.base in SCORE_FUNCTION_BASES

    @classmethod
    def from_values(cls, values: Mapping[str, Any]) -> "ObjectiveConfig":
        """Validate a plain mapping, turning pydantic failures into ConfigError"""
        try:
            return cls.model_validate(dict(values))
        except ValidationError as e:
            first = e.errors()[0]
            key = ".".join(str(p) for p in first.get("loc", ())) or None
            raise ConfigError(first.get("msg", str(e)), key=key) from None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base.value,
            "latent_kind": self.latent_kind.value,
            "k_lik": self.k_lik,
            "k_mi": self.k_mi,
            "objective": self.objective.value,
            "lambda": self.effective_lambda,
            "alpha": self.alpha,
        }
