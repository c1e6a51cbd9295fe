"""
Encoder / Decoder Models
Single-symbol MLP encoder producing q(z|x), MLP decoder producing p(x|z),
their parameter layout, θ/φ partition, and initialization
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..engine.diffcore import NodeRef, Tape, embedding_lookup, log_softmax_pick
from ..engine.stochastics import CategoricalSet, DiagGaussian, Distribution, RngStream
from ..errors import CategoryIndexError, ConfigError, ShapeError

LOG_VARIANCE_BOUNDS = (-20.0, 20.0)


class LatentKind(Enum):
    """Latent variable family"""
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class ParamGroup(Enum):
    """Which side of the model a tensor belongs to"""
    THETA = "theta"   # decoder / prior
    PHI = "phi"       # encoder / proposal


@dataclass(frozen=True)
class LatentSpec:
    """Latent layout: 40 continuous dims, or 8 categoricals over 10 classes"""
    kind: LatentKind = LatentKind.CONTINUOUS
    n_latents: int = 40
    n_categories: int = 1

    def __post_init__(self):
        if self.n_latents < 1:
            raise ConfigError(f"must be positive, got {self.n_latents}", key="n_latents")
        if self.kind is LatentKind.CATEGORICAL and self.n_categories < 2:
            raise ConfigError(f"need at least 2 categories, got {self.n_categories}", key="n_categories")

    @classmethod
    def continuous(cls, n_latents: int = 40) -> "LatentSpec":
        return cls(LatentKind.CONTINUOUS, n_latents, 1)

    @classmethod
    def categorical(cls, n_latents: int = 8, n_categories: int = 10) -> "LatentSpec":
        return cls(LatentKind.CATEGORICAL, n_latents, n_categories)

    @property
    def is_continuous(self) -> bool:
        return self.kind is LatentKind.CONTINUOUS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n_latents": self.n_latents,
            "n_categories": self.n_categories if not self.is_continuous else None,
        }


@dataclass(frozen=True)
class ParamEntry:
    """One named parameter tensor"""
    name: str
    value: np.ndarray
    group: ParamGroup
    is_bias: bool = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape


# (name, shape, group, is_bias)
LayoutRow = Tuple[str, Tuple[int, ...], ParamGroup, bool]


def model_layout(spec: LatentSpec, vocab_size: int, hidden_size: int, emb_size: int) -> List[LayoutRow]:
    """Ordered tensor table for an architecture; checkpoints are validated against it"""
    V, H, E, L = vocab_size, hidden_size, emb_size, spec.n_latents
    phi, theta = ParamGroup.PHI, ParamGroup.THETA
    rows: List[LayoutRow] = [
        ("enc.embedding", (V, E), phi, False),
        ("enc.hidden1.w", (E, H), phi, False),
        ("enc.hidden1.b", (H,), phi, True),
        ("enc.hidden2.w", (H, H), phi, False),
        ("enc.hidden2.b", (H,), phi, True),
    ]
    if spec.is_continuous:
        rows += [
            ("enc.mean.w", (H, L), phi, False),
            ("enc.mean.b", (L,), phi, True),
            ("enc.logvar.w", (H, L), phi, False),
            ("enc.logvar.b", (L,), phi, True),
            ("dec.hidden1.w", (L, H), theta, False),
            ("dec.hidden1.b", (H,), theta, True),
            ("dec.hidden2.w", (H, H), theta, False),
            ("dec.hidden2.b", (H,), theta, True),
        ]
    else:
        C = spec.n_categories
        rows += [
            ("enc.logits.w", (H, L * C), phi, False),
            ("enc.logits.b", (L * C,), phi, True),
            ("dec.latent_embedding", (L * C, E), theta, False),
            ("dec.hidden1.w", (E, H), theta, False),
            ("dec.hidden1.b", (H,), theta, True),
        ]
    rows += [
        ("dec.out.w", (H, V), theta, False),
        ("dec.out.b", (V,), theta, True),
    ]
    return rows


@dataclass(eq=False)
class ModelParams:
    """Named parameter tensors in layout order, each tagged θ or φ"""
    spec: LatentSpec
    vocab_size: int
    hidden_size: int
    emb_size: int
    entries: List[ParamEntry] = field(default_factory=list)

    def __post_init__(self):
        self._index = {entry.name: i for i, entry in enumerate(self.entries)}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[self._index[name]].value

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def names(self, group: Optional[ParamGroup] = None) -> List[str]:
        return [e.name for e in self.entries if group is None or e.group is group]

    def entry(self, name: str) -> ParamEntry:
        return self.entries[self._index[name]]

    @property
    def n_parameters(self) -> int:
        return int(sum(e.value.size for e in self.entries))

    def bind(self, tape: Tape, requires_grad: bool = True) -> Dict[str, NodeRef]:
        """Leaves for every tensor; binding twice on one tape reuses the leaves"""
        return {
            e.name: tape.named_leaf(("param", e.name), e.value, requires_grad)
            for e in self.entries
        }

    def replace_values(self, values: Mapping[str, np.ndarray]) -> "ModelParams":
        entries = []
        for e in self.entries:
            if e.name in values:
                new = np.array(values[e.name], dtype=np.float64)
                if new.shape != e.shape:
                    raise ShapeError("replace_values", [e.shape, new.shape], e.name)
                new.flags.writeable = False
                e = replace(e, value=new)
            entries.append(e)
        return replace(self, entries=entries)

    def architecture(self) -> Tuple[LatentSpec, int, int, int]:
        return (self.spec, self.vocab_size, self.hidden_size, self.emb_size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "latent": self.spec.to_dict(),
            "vocab_size": self.vocab_size,
            "hidden_size": self.hidden_size,
            "emb_size": self.emb_size,
            "n_parameters": self.n_parameters,
            "theta_tensors": len(self.names(ParamGroup.THETA)),
            "phi_tensors": len(self.names(ParamGroup.PHI)),
        }


# ============== Initialization ==============

def init_model(
    spec: LatentSpec,
    vocab_size: int,
    hidden_size: int,
    emb_size: int,
    rng: Optional[RngStream] = None,
    scheme: str = "glorot",
) -> ModelParams:
    """
    Fresh parameters for the architecture

    Args:
        scheme: "glorot" draws weights from U(−s, s) with s = sqrt(6 / (fan_in + fan_out))
            and zero biases; "zeros" gives the exactly collapsed model.
    """
    for key, size in (("vocab_size", vocab_size), ("hidden_size", hidden_size), ("emb_size", emb_size)):
        if size < 1:
            raise ConfigError(f"must be positive, got {size}", key=key)
    if scheme not in ("glorot", "zeros"):
        raise ConfigError(f"unknown init scheme '{scheme}'", key="init")
    if scheme == "glorot" and rng is None:
        raise ConfigError("glorot init needs a random stream", key="init")

    entries = []
    for name, shape, group, is_bias in model_layout(spec, vocab_size, hidden_size, emb_size):
        if is_bias or scheme == "zeros":
            value = np.zeros(shape)
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            value = rng.generator.uniform(-limit, limit, size=shape)
        value.flags.writeable = False
        entries.append(ParamEntry(name, value, group, is_bias))
    return ModelParams(spec, vocab_size, hidden_size, emb_size, entries)


# ============== Forward Passes ==============

def _dense(x: NodeRef, nodes: Dict[str, NodeRef], prefix: str) -> NodeRef:
    return x @ nodes[f"{prefix}.w"] + nodes[f"{prefix}.b"]


def encode(params: ModelParams, x: Union[int, np.ndarray], tape: Tape) -> Distribution:
    """
    Proposal q(z|x) for one symbol or a vector of symbols

    Returns parameters as nodes on the tape; a vector of B symbols gives a
    leading batch axis of length B.
    """
    nodes = params.bind(tape)
    x_arr = np.asarray(x)
    flat = x_arr.reshape(-1)
    h = embedding_lookup(nodes["enc.embedding"], flat)
    h = _dense(h, nodes, "enc.hidden1").tanh()
    h = _dense(h, nodes, "enc.hidden2").tanh()

    spec = params.spec
    lead = x_arr.shape
    if spec.is_continuous:
        mean = _dense(h, nodes, "enc.mean")
        log_var = _dense(h, nodes, "enc.logvar").clip(*LOG_VARIANCE_BOUNDS)
        return DiagGaussian(mean.reshape(lead + (spec.n_latents,)), log_var.reshape(lead + (spec.n_latents,)))
    logits = _dense(h, nodes, "enc.logits")
    return CategoricalSet(logits.reshape(lead + (spec.n_latents, spec.n_categories)))


def _align_symbols(x: Union[int, np.ndarray], lead: Tuple[int, ...]) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim > len(lead):
        raise ShapeError("decode_log_likelihood", [x.shape, lead], "symbols have more axes than latents")
    x = x.reshape(x.shape + (1,) * (len(lead) - x.ndim))
    try:
        return np.broadcast_to(x, lead)
    except ValueError:
        raise ShapeError("decode_log_likelihood", [x.shape, lead]) from None


def decode_log_likelihood(
    params: ModelParams,
    z: Union[NodeRef, np.ndarray],
    x: Union[int, np.ndarray],
    tape: Tape,
) -> NodeRef:
    """
    ln p(x|z) for every latent in z

    z is a node shaped (..., n_latents) for continuous latents or an integer
    array shaped (..., n_latents) for categorical ones; x broadcasts against
    the leading axes of z (a (B,) symbol vector matches (B, K) latents).
    """
    nodes = params.bind(tape)
    spec = params.spec

    if spec.is_continuous:
        if not isinstance(z, NodeRef):
            z = tape.constant(z)
        if not z.shape or z.shape[-1] != spec.n_latents:
            raise ShapeError("decode_log_likelihood", [z.shape, (spec.n_latents,)])
        lead = z.shape[:-1]
        h = z.reshape(-1, spec.n_latents)
        h = _dense(h, nodes, "dec.hidden1").tanh()
        h = _dense(h, nodes, "dec.hidden2").tanh()
    else:
        if isinstance(z, NodeRef):
            raise ShapeError("decode_log_likelihood", [z.shape], "categorical latents must be integer arrays")
        z = np.asarray(z)
        if z.ndim < 1 or z.shape[-1] != spec.n_latents:
            raise ShapeError("decode_log_likelihood", [z.shape, (spec.n_latents,)])
        if z.size and (z.min() < 0 or z.max() >= spec.n_categories):
            raise CategoryIndexError(
                f"latent category out of range [0, {spec.n_categories}) (min={z.min()}, max={z.max()})"
            )
        lead = z.shape[:-1]
        offsets = np.arange(spec.n_latents) * spec.n_categories
        rows = (z + offsets).reshape(-1, spec.n_latents)
        h = embedding_lookup(nodes["dec.latent_embedding"], rows).sum(axis=1)
        h = _dense(h, nodes, "dec.hidden1").tanh()

    logits = _dense(h, nodes, "dec.out")
    symbols = _align_symbols(x, lead).reshape(-1)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= params.vocab_size):
        raise CategoryIndexError(f"symbol out of range [0, {params.vocab_size})")
    return log_softmax_pick(logits, symbols).reshape(lead)
