from collections import OrderedDict

import numpy as np
import pytest

from exemplar_dialog import container
from exemplar_dialog.errors import DataError


def sample(tmp_path):
    arrays = OrderedDict(a=np.arange(6, dtype=np.float64).reshape(2, 3), b=np.array([1, -2], dtype=np.int64))
    path = tmp_path / "x.bin"
    container.save(path, "ckpt", {"k": 1}, arrays)
    return path, arrays


def test_round_trip(tmp_path):
    path, arrays = sample(tmp_path)
    header, back = container.load(path, "ckpt")
    assert header["k"] == 1
    assert list(back) == ["a", "b"]
    for name in arrays:
        assert np.array_equal(back[name], arrays[name]) and back[name].dtype == arrays[name].dtype


def test_wrong_kind_magic_truncation_and_trailing_bytes(tmp_path):
    path, _ = sample(tmp_path)
    data = path.read_bytes()
    with pytest.raises(DataError, match="kind"):
        container.load(path, "index")
    for bad in (b"XXXXXXXX" + data[8:], data[:-3], data + b"\x00"):
        path.write_bytes(bad)
        with pytest.raises(DataError):
            container.load(path, "ckpt")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    container.atomic_write_text(tmp_path / "f.txt", "hello")
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]
