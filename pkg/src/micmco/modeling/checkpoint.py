"""
Checkpoint Codec
Binary save/load of ModelParams: magic + version, architecture header,
length-prefixed tensor table, little-endian float64 payload
"""

import logging
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..errors import (
    CheckpointFormatError,
    CheckpointLengthError,
    CheckpointVersionError,
    SpecMismatchError,
)
from .models import LatentKind, LatentSpec, ModelParams, ParamEntry, ParamGroup, model_layout

logger = logging.getLogger(__name__)

MAGIC_PREFIX = b"MICMCO"
FORMAT_VERSION = b"01"
MAGIC = MAGIC_PREFIX + FORMAT_VERSION

# kind, n_latents, n_categories, vocab, hidden, emb, n_entries
_HEADER = struct.Struct("<BIIIIII")
_KIND_CODES = {LatentKind.CONTINUOUS: 0, LatentKind.CATEGORICAL: 1}
_GROUP_CODES = {ParamGroup.THETA: 0, ParamGroup.PHI: 1}


class _Reader:
    """Cursor over the checkpoint bytes; running short is a format error"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(f"truncated checkpoint while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def save_checkpoint(params: ModelParams) -> bytes:
    """Encode params; identical params always give identical bytes"""
    spec = params.spec
    parts: List[bytes] = [
        MAGIC,
        _HEADER.pack(
            _KIND_CODES[spec.kind],
            spec.n_latents,
            spec.n_categories,
            params.vocab_size,
            params.hidden_size,
            params.emb_size,
            len(params.entries),
        ),
    ]
    for entry in params.entries:
        name = entry.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<B", len(entry.shape)))
        parts.append(struct.pack(f"<{len(entry.shape)}I", *entry.shape))
        parts.append(struct.pack("<B", _GROUP_CODES[entry.group]))
    for entry in params.entries:
        parts.append(np.ascontiguousarray(entry.value, dtype="<f8").tobytes())
    return b"".join(parts)


def load_checkpoint(data: bytes, expected_spec: Optional[LatentSpec] = None) -> ModelParams:
    """
    Decode a checkpoint

    Args:
        data: Bytes produced by save_checkpoint
        expected_spec: When given, the stored latent spec must equal it

    Raises:
        CheckpointFormatError: bad magic or truncated header/table
        CheckpointVersionError: unknown format version
        CheckpointLengthError: payload size disagrees with the table
        SpecMismatchError: stored spec or tensor table differs from what is expected
    """
    reader = _Reader(data)
    magic = reader.take(len(MAGIC), "magic")
    if magic[:len(MAGIC_PREFIX)] != MAGIC_PREFIX:
        raise CheckpointFormatError(f"not a checkpoint (magic {magic!r})")
    if magic[len(MAGIC_PREFIX):] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {magic[len(MAGIC_PREFIX):]!r} (expected {FORMAT_VERSION!r})"
        )

    kind_code, n_latents, n_categories, vocab, hidden, emb, n_entries = reader.unpack(
        _HEADER.format, "header"
    )
    kinds = {code: kind for kind, code in _KIND_CODES.items()}
    if kind_code not in kinds:
        raise CheckpointFormatError(f"unknown latent kind code {kind_code}")
    spec = LatentSpec(kinds[kind_code], n_latents, n_categories)
    if expected_spec is not None and spec != expected_spec:
        raise SpecMismatchError(f"checkpoint holds {spec.to_dict()}, expected {expected_spec.to_dict()}")

    groups = {code: group for group, code in _GROUP_CODES.items()}
    table = []
    for _ in range(n_entries):
        (name_len,) = reader.unpack("<H", "entry name length")
        name = reader.take(name_len, "entry name").decode("utf-8")
        (ndim,) = reader.unpack("<B", "entry rank")
        shape = reader.unpack(f"<{ndim}I", "entry shape")
        (tag,) = reader.unpack("<B", "entry tag")
        if tag not in groups:
            raise CheckpointFormatError(f"unknown parameter tag {tag} for '{name}'")
        table.append((name, tuple(shape), groups[tag]))

    expected = model_layout(spec, vocab, hidden, emb)
    if [(n, s, g) for n, s, g, _ in expected] != table:
        raise SpecMismatchError("tensor table does not match the architecture in the header")

    n_floats = sum(int(np.prod(shape)) for _, shape, _ in table)
    if reader.remaining != n_floats * 8:
        raise CheckpointLengthError(
            f"payload holds {reader.remaining} bytes, table needs {n_floats * 8}"
        )
    payload = np.frombuffer(data, dtype="<f8", offset=reader.pos).astype(np.float64)

    entries = []
    offset = 0
    for name, shape, group, is_bias in expected:
        size = int(np.prod(shape))
        value = payload[offset:offset + size].reshape(shape).copy()
        value.flags.writeable = False
        entries.append(ParamEntry(name, value, group, is_bias))
        offset += size
    return ModelParams(spec, vocab, hidden, emb, entries)


def write_checkpoint(path: Union[str, Path], params: ModelParams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(save_checkpoint(params))
    logger.info("checkpoint written: %s (%d parameters)", path, params.n_parameters)
    return path


def read_checkpoint(path: Union[str, Path], expected_spec: Optional[LatentSpec] = None) -> ModelParams:
    path = Path(path)
    params = load_checkpoint(path.read_bytes(), expected_spec)
    logger.info("checkpoint loaded: %s", path)
    return params
