import gzip
import pathlib
import struct
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubo_denoise.core import BinaryImage
from qubo_denoise.data import (DataFormatError, Dataset, binarize, downscale_nn, gen_bas,
                               idx_to_dataset, is_bas, load_idx, read_pbm, write_idx, write_pbm)


def test_bas_images_are_valid():
    ds = gen_bas(5, 4, 300, seed=2)
    assert len(ds) == 300 and ds.pixels.shape == (300, 20)
    assert all(is_bas(img) for img in ds.images)
    # both orientations and some variety show up
    rows = sum(bool(np.all(a == a[:, :1])) for a in (i.to_array() for i in ds.images))
    assert 50 < rows < 300
    assert len({tuple(r) for r in ds.pixels}) > 20


def test_bas_seeded():
    assert gen_bas(3, 3, 10, seed=1) == gen_bas(3, 3, 10, seed=1)
    assert gen_bas(3, 3, 10, seed=1) != gen_bas(3, 3, 10, seed=2)
    with pytest.raises(ValueError):
        gen_bas(3, 3, 0)


def test_is_bas():
    assert is_bas(BinaryImage.from_array([[1, 1], [0, 0]]))
    assert is_bas(BinaryImage.from_array([[1, 0], [1, 0]]))
    assert not is_bas(BinaryImage.from_array([[1, 0], [0, 0]]))


def idx_bytes(images):
    images = np.asarray(images, dtype=np.uint8)
    return struct.pack(">IIII", 0x803, *images.shape) + images.tobytes()


def test_idx_fixture(tmp_path):
    imgs = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4) * 10
    path = tmp_path / "x.idx"
    path.write_bytes(idx_bytes(imgs))
    np.testing.assert_array_equal(load_idx(path), imgs)
    gz = tmp_path / "x.idx.gz"
    gz.write_bytes(gzip.compress(idx_bytes(imgs)))
    np.testing.assert_array_equal(load_idx(gz), imgs)
    out = tmp_path / "y.idx"
    write_idx(out, imgs)
    assert out.read_bytes() == idx_bytes(imgs)


def test_idx_errors_report_offsets(tmp_path):
    bad = tmp_path / "bad.idx"
    bad.write_bytes(struct.pack(">IIII", 0x801, 1, 2, 2) + b"\0" * 4)
    with pytest.raises(DataFormatError, match="offset 0"):
        load_idx(bad)
    short = tmp_path / "short.idx"
    short.write_bytes(idx_bytes(np.zeros((2, 3, 3)))[:-5])
    with pytest.raises(DataFormatError, match="offset 16.*expected 34.*available 29"):
        load_idx(short)
    tiny = tmp_path / "tiny.idx"
    tiny.write_bytes(struct.pack(">I", 0x803) + b"\0\0")
    with pytest.raises(DataFormatError, match="offset 4"):
        load_idx(tiny)


def test_downscale_oracle():
    src = np.arange(28 * 28).reshape(28, 28)
    out = downscale_nn(src, 12, 12)
    for r in range(12):
        for c in range(12):
            assert out[r, c] == src[r * 28 // 12, c * 28 // 12]
    stack = np.stack([src, src + 1])
    np.testing.assert_array_equal(downscale_nn(stack, 12, 12)[1], out + 1)


def test_binarize_threshold():
    np.testing.assert_array_equal(binarize([[0, 127, 128, 255]]), [[0, 0, 1, 1]])
    np.testing.assert_array_equal(binarize([[10, 20]], threshold=20), [[0, 1]])


def test_idx_to_dataset(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, (5, 28, 28)).astype(np.uint8)
    path = tmp_path / "m.idx"
    write_idx(path, imgs)
    ds = idx_to_dataset(path, 12, 12, split="test", limit=3)
    assert (len(ds), ds.width, ds.height, ds.split) == (3, 12, 12, "test")
    np.testing.assert_array_equal(ds.pixels[2], binarize(downscale_nn(imgs[2], 12, 12)).ravel())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 11), st.integers(1, 5), st.integers(0, 4), st.integers(0, 2**31 - 1),
       st.sampled_from(["train", "test", ""]), st.text(max_size=8))
def test_container_round_trip(w, h, count, seed, split, name):
    px = np.random.default_rng(seed).integers(0, 2, (count, w * h))
    ds = Dataset(name, w, h, px, split)
    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "x.qdb"
        ds.save(p)
        assert Dataset.load(p) == ds


def test_container_layout(tmp_path):
    ds = Dataset("ab", 3, 3, [[1, 0, 0, 0, 0, 0, 0, 0, 1]], "test")
    p = tmp_path / "a.qdb"
    ds.save(p)
    raw = p.read_bytes()
    assert raw[:4] == b"QDBS"
    assert struct.unpack_from("<HBBIIIH", raw, 4) == (1, 1, 0, 3, 3, 1, 2)
    assert raw[22:24] == b"ab"
    assert raw[24:] == bytes([0b10000000, 0b10000000])


def test_container_rejects_corruption(tmp_path):
    p = tmp_path / "a.qdb"
    gen_bas(4, 4, 3).save(p)
    raw = p.read_bytes()
    for bad, pattern in ((b"XXXX" + raw[4:], "magic"), (raw[:-1], "expected"),
                         (raw[:10], "truncated"), (raw[:4] + b"\x09\x00" + raw[6:], "version")):
        q = tmp_path / "b.qdb"
        q.write_bytes(bad)
        with pytest.raises(DataFormatError, match=pattern):
            Dataset.load(q)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_pbm_round_trip(w, h, seed):
    img = BinaryImage(w, h, np.random.default_rng(seed).integers(0, 2, w * h))
    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "x.pbm"
        write_pbm(p, img)
        assert read_pbm(p) == img


def test_pbm_ascii_and_comments(tmp_path):
    p = tmp_path / "a.pbm"
    p.write_bytes(b"P1\n# a comment\n3 2\n1 0 1\n0 1 0\n")
    assert read_pbm(p) == BinaryImage(3, 2, [1, 0, 1, 0, 1, 0])
    p.write_bytes(b"P4\n3 2\n" + bytes([0b10100000]))
    with pytest.raises(DataFormatError):
        read_pbm(p)
    p.write_bytes(b"P2\n1 1\n0\n")
    with pytest.raises(DataFormatError):
        read_pbm(p)


def test_pbm_bit_convention(tmp_path):
    p = tmp_path / "a.pbm"
    write_pbm(p, BinaryImage(2, 1, [1, 0]))
    assert p.read_bytes() == b"P4\n2 1\n" + bytes([0b10000000])
