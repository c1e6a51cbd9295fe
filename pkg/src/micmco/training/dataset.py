"""
Datasets
Single-symbol observations: the synthetic uniform task or symbols listed in a file
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..engine.stochastics import RngStream
from ..errors import CategoryIndexError, ConfigError

logger = logging.getLogger(__name__)


class DatasetKind(Enum):
    SYNTHETIC_UNIFORM = "synthetic_uniform"
    FILE = "file"


def make_synthetic_batch(vocab_size: int, batch_size: int, rng: RngStream) -> np.ndarray:
    """batch_size i.i.d. symbols, uniform over the vocabulary"""
    if batch_size < 1:
        raise ConfigError(f"must be at least 1, got {batch_size}", key="batch_size")
    if vocab_size < 1:
        raise ConfigError(f"must be positive, got {vocab_size}", key="vocab_size")
    return rng.integers(vocab_size, (batch_size,)).astype(np.int64)


@dataclass(eq=False)
class Dataset:
    """
    The data distribution p_D(x)

    For kind=file, minibatches are drawn uniformly with replacement from the
    listed symbols, so p_D is their empirical distribution.
    """
    kind: DatasetKind
    vocab_size: int
    symbols: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind is DatasetKind.FILE:
            if self.symbols is None or len(self.symbols) == 0:
                raise ConfigError("file dataset has no symbols", key="data_file")
            self.symbols = np.asarray(self.symbols, dtype=np.int64)
            bad = (self.symbols < 0) | (self.symbols >= self.vocab_size)
            if np.any(bad):
                raise CategoryIndexError(
                    f"symbol {int(self.symbols[np.argmax(bad)])} outside vocabulary of {self.vocab_size}"
                )

    @classmethod
    def synthetic(cls, vocab_size: int) -> "Dataset":
        return cls(DatasetKind.SYNTHETIC_UNIFORM, vocab_size)

    @classmethod
    def from_file(cls, path: Union[str, Path], vocab_size: int) -> "Dataset":
        """One integer symbol index per line; blank lines are skipped"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"no such file '{path}'", key="data_file")
        try:
            frame = pd.read_csv(path, header=None, names=["symbol"], dtype="int64", skip_blank_lines=True)
        except (ValueError, pd.errors.EmptyDataError) as e:
            raise ConfigError(f"cannot read symbols from '{path}': {e}", key="data_file") from None
        logger.info("loaded %d symbols from %s", len(frame), path)
        return cls(DatasetKind.FILE, vocab_size, frame["symbol"].to_numpy())

    @classmethod
    def for_path(cls, data_file: str, vocab_size: int) -> "Dataset":
        """Empty path means the synthetic uniform task"""
        return cls.from_file(data_file, vocab_size) if data_file else cls.synthetic(vocab_size)

    def sample(self, batch_size: int, rng: RngStream) -> np.ndarray:
        if self.kind is DatasetKind.SYNTHETIC_UNIFORM:
            return make_synthetic_batch(self.vocab_size, batch_size, rng)
        if batch_size < 1:
            raise ConfigError(f"must be at least 1, got {batch_size}", key="batch_size")
        return self.symbols[rng.integers(len(self.symbols), (batch_size,))]

    def probabilities(self) -> np.ndarray:
        """p_D over the vocabulary"""
        if self.kind is DatasetKind.SYNTHETIC_UNIFORM:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        counts = np.bincount(self.symbols, minlength=self.vocab_size)
        return counts / counts.sum()
