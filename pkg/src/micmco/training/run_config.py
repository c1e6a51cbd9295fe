"""
Run Configuration
Every key of a training run with its documented default, validated as one
pydantic model; the objective constraints are enforced at parse time
"""

import re
from typing import Any, Dict, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError
from ..modeling.models import LatentKind, LatentSpec
from ..objectives.config import DEFAULT_RENYI_ALPHA, BaseEstimator, ObjectiveConfig, ObjectiveKind
from ..settings import settings

DEFAULT_N_LATENTS = {LatentKind.CONTINUOUS: 40, LatentKind.CATEGORICAL: 8}
DEFAULT_N_CATEGORIES = 10


# Keys accepted in a config file, in the order they are documented
CONFIG_KEYS = (
    "latent_kind",
    "n_latents",
    "n_categories",
    "vocab_size",
    "hidden_size",
    "emb_size",
    "base",
    "k_lik",
    "k_mi",
    "objective",
    "lambda",
    "alpha",
    "lr",
    "batch_size",
    "steps",
    "seed",
    "l2",
    "eval_every",
    "eval_k",
    "out_dir",
    "data_file",
    "eval_examples",
)


def _blame_key(message: str) -> Optional[str]:
    """The config key mentioned first in a cross-field validation message"""
    found = [(m.start(), key) for key in CONFIG_KEYS for m in [re.search(rf"\b{key}\b", message)] if m]
    return min(found)[1] if found else None


class RunConfig(BaseModel):
    """One training run; missing keys take the defaults below"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    # Model
    latent_kind: LatentKind = LatentKind.CONTINUOUS
    n_latents: Optional[int] = Field(default=None, ge=1)
    n_categories: int = Field(default=DEFAULT_N_CATEGORIES, ge=1)
    vocab_size: int = Field(default=10000, ge=1)
    hidden_size: int = Field(default=128, ge=1)
    emb_size: int = Field(default=128, ge=1)

    # Objective
    base: BaseEstimator = BaseEstimator.IWAE
    k_lik: int = Field(default=1, ge=1)
    k_mi: int = Field(default=1, ge=1)
    objective: ObjectiveKind = ObjectiveKind.NONE
    lam: float = Field(default=0.0, alias="lambda")
    alpha: float = Field(default=DEFAULT_RENYI_ALPHA, gt=0.0)

    # Optimization
    lr: float = Field(default=1e-3, gt=0.0)
    batch_size: int = Field(default=256, ge=1)
    steps: int = Field(default=40000, ge=0)
    seed: int = Field(default=0, ge=0)
    l2: float = Field(default=0.0, ge=0.0)

    # Evaluation and output
    eval_every: int = Field(default=1000, ge=1)
    eval_k: int = Field(default=100, ge=1)
    eval_examples: int = Field(default=512, ge=1)
    out_dir: str = settings.out_dir
    data_file: str = ""

    @model_validator(mode="after")
    def _check_objective(self) -> "RunConfig":
        try:
            self.objective_config()
        except ValidationError as e:
            raise ValueError(e.errors()[0].get("msg", str(e)).removeprefix("Value error, ")) from None
        return self

    # ---------- derived views ----------
    def objective_config(self) -> ObjectiveConfig:
        values: Dict[str, Any] = {
            "base": self.base,
            "latent_kind": self.latent_kind,
            "k_lik": self.k_lik,
            "k_mi": self.k_mi,
            "objective": self.objective,
            "alpha": self.alpha,
        }
        if "lam" in self.model_fields_set:
            values["lam"] = self.lam
        return ObjectiveConfig(**values)

    def latent_spec(self) -> LatentSpec:
        n_latents = self.n_latents or DEFAULT_N_LATENTS[self.latent_kind]
        if self.latent_kind is LatentKind.CONTINUOUS:
            return LatentSpec.continuous(n_latents)
        return LatentSpec.categorical(n_latents, self.n_categories)

    def with_overrides(self, **values: Any) -> "RunConfig":
        """Copy with some keys replaced, re-validated"""
        merged = self.to_dict(explicit_only=True)
        merged.update({("lambda" if k == "lam" else k): v for k, v in values.items()})
        return RunConfig.from_values(merged)

    @classmethod
    def from_values(cls, values: Mapping[str, Any], lines: Optional[Mapping[str, int]] = None) -> "RunConfig":
        """
        Validate a plain mapping of config keys

        Args:
            values: key → value, keys as written in config files
            lines: key → line number, used to locate errors

        Raises:
            ConfigError: naming the first offending key (and its line when known)
        """
        lines = lines or {}
        unknown = [k for k in values if k not in CONFIG_KEYS]
        if unknown:
            key = unknown[0]
            raise ConfigError("unknown key", key=key, line=lines.get(key))
        try:
            return cls.model_validate(dict(values))
        except ValidationError as e:
            first = e.errors()[0]
            loc = [str(p) for p in first.get("loc", ())]
            message = first.get("msg", str(e)).removeprefix("Value error, ")
            if loc:
                key = "lambda" if loc[0] == "lam" else loc[0]
            else:
                key = _blame_key(message)
            raise ConfigError(message, key=key, line=lines.get(key) if key else None) from None

    def to_dict(self, explicit_only: bool = False) -> Dict[str, Any]:
        """Plain key → value mapping using config-file key names"""
        data = self.model_dump(by_alias=True, mode="json", exclude_unset=explicit_only)
        return {k: data[k] for k in CONFIG_KEYS if k in data}
