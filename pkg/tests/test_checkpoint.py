"""Tests for the checkpoint file format."""

from dataclasses import replace

import numpy as np
import pytest

from fastskip.core.checkpoint import (
    CHECKPOINT_MAGIC,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    load_checkpoint,
    save_checkpoint,
)
from fastskip.core.model import PARAM_NAMES
from fastskip.utils.exceptions import (
    CheckpointMismatchError,
    CorruptFileError,
    FileFormatError,
)


class TestCheckpoint:
    def test_save_and_load(self, small_params, tmp_path):
        path = save_checkpoint(tmp_path / "sub" / "model.fskm", small_params, 42)
        ckpt = load_checkpoint(path)
        assert ckpt.step == 42
        for name in PARAM_NAMES:
            assert np.array_equal(ckpt.params.tensors[name], small_params.tensors[name])
        assert not list(path.parent.glob("*.tmp"))

    def test_header_starts_with_magic(self, small_params):
        assert checkpoint_to_bytes(small_params, 0)[:4] == CHECKPOINT_MAGIC

    def test_expected_config_carries_init_seed(self, small_params, tmp_path):
        path = save_checkpoint(tmp_path / "m.fskm", small_params, 1)
        ckpt = load_checkpoint(path, expected=small_params.config)
        assert ckpt.params.config == small_params.config

    def test_mismatched_config(self, small_params, tmp_path):
        path = save_checkpoint(tmp_path / "m.fskm", small_params, 1)
        other = replace(small_params.config, hidden_size=9)
        with pytest.raises(CheckpointMismatchError) as exc:
            load_checkpoint(path, expected=other)
        assert exc.value.field == "hidden_size"

    def test_bad_magic(self, small_params):
        data = b"XXXX" + checkpoint_to_bytes(small_params, 0)[4:]
        with pytest.raises(FileFormatError):
            checkpoint_from_bytes(data)

    def test_bad_version(self, small_params):
        data = bytearray(checkpoint_to_bytes(small_params, 0))
        data[4] = 9
        with pytest.raises(FileFormatError):
            checkpoint_from_bytes(bytes(data))

    def test_truncated(self, small_params):
        data = checkpoint_to_bytes(small_params, 0)
        with pytest.raises(CorruptFileError):
            checkpoint_from_bytes(data[:-8])
        with pytest.raises(CorruptFileError):
            checkpoint_from_bytes(data[:10])

    def test_trailing_bytes(self, small_params):
        with pytest.raises(CorruptFileError):
            checkpoint_from_bytes(checkpoint_to_bytes(small_params, 0) + b"\0")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            load_checkpoint(tmp_path / "absent.fskm")
