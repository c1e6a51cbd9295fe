"""
Tests for the binary checkpoint codec
"""

import numpy as np
import pytest

from micmco.errors import (
    CheckpointFormatError,
    CheckpointLengthError,
    CheckpointVersionError,
    SpecMismatchError,
)
from micmco.modeling import (
    MAGIC,
    LatentSpec,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint,
)


def _assert_same(a, b):
    assert a.architecture() == b.architecture()
    assert a.names() == b.names()
    for name in a.names():
        np.testing.assert_array_equal(a[name], b[name])
        assert a.entry(name).group is b.entry(name).group


@pytest.mark.parametrize("fixture", ["continuous_params", "categorical_params"])
def test_round_trip_is_bit_exact(fixture, request):
    params = request.getfixturevalue(fixture)
    data = save_checkpoint(params)
    assert data.startswith(MAGIC)
    loaded = load_checkpoint(data, params.spec)
    _assert_same(params, loaded)
    assert save_checkpoint(loaded) == data


def test_truncated_payload(continuous_params):
    data = save_checkpoint(continuous_params)
    with pytest.raises(CheckpointLengthError):
        load_checkpoint(data[:-8])


def test_trailing_bytes(continuous_params):
    with pytest.raises(CheckpointLengthError):
        load_checkpoint(save_checkpoint(continuous_params) + b"\x00" * 8)


def test_truncated_header():
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(MAGIC + b"\x00\x01")


def test_bad_magic(continuous_params):
    data = save_checkpoint(continuous_params)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(b"NOTONE" + data[6:])


def test_unknown_version(continuous_params):
    data = bytearray(save_checkpoint(continuous_params))
    data[len(MAGIC) - 2:len(MAGIC)] = b"99"
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(bytes(data))


def test_spec_mismatch(continuous_params):
    data = save_checkpoint(continuous_params)
    with pytest.raises(SpecMismatchError):
        load_checkpoint(data, LatentSpec.categorical(2, 3))
    with pytest.raises(SpecMismatchError):
        load_checkpoint(data, LatentSpec.continuous(4))


def test_file_round_trip(tmp_path, categorical_params):
    path = write_checkpoint(tmp_path / "nested" / "checkpoint.bin", categorical_params)
    _assert_same(categorical_params, read_checkpoint(path, categorical_params.spec))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_checkpoint(tmp_path / "absent.bin")
