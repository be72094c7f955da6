import base64
import logging

import numpy as np
import pytest

from veracity.exceptions import DimensionError, ParseError
from veracity.visual import (VISUAL_DIM, VisualStore, encode_record, load_visual_features, stub_extract,
                             visual_fc, write_visual_features)


def test_zero_record(tmp_path):
    path = tmp_path / "v.tsv"
    path.write_text(encode_record("img", np.zeros(VISUAL_DIM)) + "\n")
    store = load_visual_features(path)
    assert list(store) == ["img"]
    assert store["img"].shape == (4096,) and np.all(store["img"] == 0.0)


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    feats = {f"id{i}": rng.standard_normal(VISUAL_DIM).astype(np.float32) for i in range(5)}
    path = tmp_path / "v.tsv"
    write_visual_features(path, feats)
    store = load_visual_features(path)
    assert set(store) == set(feats)
    for key, vec in feats.items():
        assert store[key].tobytes() == vec.tobytes()


def test_missing_id_gives_zeros():
    store = VisualStore({"a": np.ones(4)}, dim=4)
    assert np.all(store.vector("b") == 0.0)
    assert np.all(store.vector(None) == 0.0)
    assert np.all(store.vector("a") == 1.0)
    assert store.missing == 2


def test_vectors_are_read_only():
    store = VisualStore({"a": np.ones(3)}, dim=3)
    with pytest.raises(ValueError):
        store["a"][0] = 5.0


def test_duplicates_last_wins(tmp_path, caplog):
    path = tmp_path / "v.tsv"
    path.write_text(encode_record("a", np.zeros(4)) + "\n" + encode_record("a", np.ones(4)) + "\n")
    with caplog.at_level(logging.WARNING):
        store = load_visual_features(path, dim=4)
    assert store.duplicates == 1
    assert np.all(store["a"] == 1.0)
    assert "duplicate" in caplog.text


@pytest.mark.parametrize("line", ["no-tab-here", "\tAAAA", "a\t!!!notbase64", "a\tAAA="])
def test_malformed_record_names_line(tmp_path, line):
    path = tmp_path / "v.tsv"
    path.write_text(encode_record("ok", np.zeros(4)) + "\n" + line + "\n")
    with pytest.raises(ParseError) as info:
        load_visual_features(path, dim=4)
    assert info.value.line == 2


def test_wrong_dimension_names_id(tmp_path):
    path = tmp_path / "v.tsv"
    path.write_text(encode_record("short-one", np.zeros(3)) + "\n")
    with pytest.raises(DimensionError, match="short-one"):
        load_visual_features(path, dim=4)
    with pytest.raises(DimensionError):
        VisualStore({"x": np.zeros(5)}, dim=4)


def test_wire_format_is_little_endian_float32():
    record = encode_record("x", np.array([1.0, -2.0]))
    key, blob = record.split("\t")
    assert np.frombuffer(base64.b64decode(blob), dtype="<f4").tolist() == [1.0, -2.0]


def test_stub_extract():
    a = stub_extract(b"image one")
    assert a.shape == (VISUAL_DIM,) and a.dtype == np.float32
    assert np.array_equal(a, stub_extract(b"image one"))
    assert np.all((a >= 0.0) & (a < 1.0))
    vecs = [stub_extract(f"img-{i}".encode()) for i in range(50)]
    for i in range(50):
        for j in range(i + 1, 50):
            assert not np.array_equal(vecs[i], vecs[j])
    with pytest.raises(ValueError):
        stub_extract(b"")


def test_visual_fc():
    rng = np.random.default_rng(1)
    f = rng.random(20)
    assert np.all(visual_fc(np.zeros((4, 20)), f) == 0.0)
    assert np.all(visual_fc(-np.ones((4, 20)), f) == 0.0)
    W = rng.standard_normal((4, 20))
    expected = [max(sum(W[i, j] * f[j] for j in range(20)), 0.0) for i in range(4)]
    np.testing.assert_allclose(visual_fc(W, f), expected, atol=1e-12)
    with pytest.raises(DimensionError):
        visual_fc(W, np.ones(19))
