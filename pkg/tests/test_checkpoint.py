import numpy as np
import pytest

from finetype.checkpoint import load_checkpoint, save_checkpoint
from finetype.errors import DataError


def test_round_trip_f8_value_exact(tmp_path):
    arrays = {
        "W": np.random.default_rng(0).normal(size=(3, 4)),
        "b": np.array([1e-300, -0.0, np.pi]),
    }
    path = tmp_path / "ck.bin"
    save_checkpoint(path, arrays, meta={"model": "mention", "labels": ["/a"]})
    loaded, meta = load_checkpoint(path)
    assert meta["model"] == "mention"
    for name in arrays:
        assert np.array_equal(loaded[name], arrays[name])


def test_round_trip_f4_exact_at_stored_precision(tmp_path):
    arrays = {"W": np.random.default_rng(1).normal(size=(5,))}
    path = tmp_path / "ck.bin"
    save_checkpoint(path, arrays, dtype="<f4")
    loaded, _ = load_checkpoint(path)
    assert np.array_equal(loaded["W"], arrays["W"].astype(np.float32).astype(np.float64))


def test_order_and_meta_preserved(tmp_path):
    arrays = {"z.late": np.zeros(2), "a.early": np.ones(3)}
    path = tmp_path / "ck.bin"
    save_checkpoint(path, arrays, meta={"k": [1, 2]})
    loaded, meta = load_checkpoint(path)
    assert list(loaded) == ["z.late", "a.early"]
    assert meta == {"k": [1, 2]}


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTACKPTxxxxxxxxxxx")
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "ck.bin"
    save_checkpoint(path, {"W": np.ones((4, 4))})
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(DataError, match="truncated"):
        load_checkpoint(path)


def test_identical_saves_are_bitwise_identical(tmp_path):
    arrays = {"W": np.random.default_rng(2).normal(size=(6, 2))}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, arrays, meta={"seed": 7})
    save_checkpoint(p2, arrays, meta={"seed": 7})
    assert p1.read_bytes() == p2.read_bytes()
