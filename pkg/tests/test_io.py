import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miikit.errors import ContractError
from miikit.io import (read_embeddings, read_embeddings_csv, read_landmarks, read_png, read_table,
                       sha256_file, write_embeddings, write_embeddings_csv, write_landmarks,
                       write_png, write_table)

from conftest import unit_rows


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(0, 50), d=st.integers(1, 64))
def test_embedding_binary_round_trip(tmp_path_factory, seed, n, d):
    path = tmp_path_factory.mktemp("e") / "x.miie"
    X = unit_rows(np.random.default_rng(seed), n, d)
    write_embeddings(path, X)
    Y = read_embeddings(path)
    assert Y.shape == (n, d) and Y.dtype == np.float64
    np.testing.assert_allclose(Y, X, atol=1e-6)
    if n:
        np.testing.assert_allclose(np.linalg.norm(Y, axis=1), 1.0, atol=1e-15)


def test_embedding_binary_rejects_corruption(tmp_path, rng):
    path = tmp_path / "x.miie"
    write_embeddings(path, unit_rows(rng, 3, 4))
    raw = path.read_bytes()
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ContractError, match="magic"):
        read_embeddings(path)
    path.write_bytes(raw[:-1])
    with pytest.raises(ContractError, match="bytes"):
        read_embeddings(path)
    path.write_bytes(raw[:5])
    with pytest.raises(ContractError, match="truncated"):
        read_embeddings(path)
    with pytest.raises(ContractError):
        write_embeddings(path, np.zeros(3))


def test_embedding_csv_is_exact(tmp_path, rng):
    X = unit_rows(rng, 7, 5)
    write_embeddings_csv(tmp_path / "x.csv", X)
    np.testing.assert_array_equal(read_embeddings_csv(tmp_path / "x.csv"), X)


def test_png_round_trip(tmp_path, rng):
    img = np.round(rng.uniform(size=(9, 11, 3)) * 255) / 255
    write_png(tmp_path / "a.png", img)
    back = read_png(tmp_path / "a.png")
    assert back.shape == (9, 11, 3)
    np.testing.assert_allclose(back, img, atol=1e-12)


def test_landmarks(tmp_path, rng):
    pts = rng.uniform(0, 31, (68, 2))
    write_landmarks(tmp_path / "l.json", pts)
    np.testing.assert_array_equal(read_landmarks(tmp_path / "l.json", 32, 32), pts)
    with pytest.raises(ContractError, match="outside"):
        read_landmarks(tmp_path / "l.json", 16, 16)
    write_landmarks(tmp_path / "s.json", pts[:10])
    with pytest.raises(ContractError):
        read_landmarks(tmp_path / "s.json")


def test_tables(tmp_path):
    header = ["name", "value", "count"]
    rows = [("a", 0.1 + 0.2, np.int64(3)), ("b", np.float64(1e-300), 0)]
    write_table(tmp_path / "t.csv", header, rows)
    write_table(tmp_path / "t.json", header, rows, fmt="json")
    c, j = read_table(tmp_path / "t.csv"), read_table(tmp_path / "t.json")
    assert float(c[0]["value"]) == 0.1 + 0.2 and float(c[1]["value"]) == 1e-300
    assert j[0] == {"name": "a", "value": 0.1 + 0.2, "count": 3}
    with pytest.raises(ContractError):
        write_table(tmp_path / "t.x", header, rows, fmt="xml")


def test_sha256(tmp_path):
    (tmp_path / "f").write_bytes(b"abc")
    assert sha256_file(tmp_path / "f") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
