import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hsifusion.errors import DimensionError, FormatError
from hsifusion.io import (
    error_map, raw_to_hst, read_hst, read_metrics_csv, read_pgm, read_srf, write_hst,
    write_metrics_csv, write_pgm, write_srf,
)
from hsifusion.metrics import evaluate


def test_hst_layout_bytes(tmp_path):
    t = np.arange(24.0).reshape(2,3, 4)
    p = tmp_path / "t.hst"
    write_hst(p, t)
    data = p.read_bytes()
    assert data[:4] == b"HST1"
    assert struct.unpack("<3I", data[4:16]) == (2, 3, 4)
    payload = np.frombuffer(data[16:], dtype="<f8")
    # first index fastest
    assert payload[0] == t[0, 0, 0] and payload[1] == t[1, 0, 0] and payload[2] == t[0, 1, 0]
    assert payload[6] == t[0, 0, 1]


def test_hst_singleton_size(tmp_path):
    p = tmp_path / "one.hst"
    write_hst(p, np.full((1, 1, 1), 3.25))
    assert p.stat().st_size == 24
    assert read_hst(p)[0, 0, 0] == 3.25


@settings(max_examples=30, deadline=None)
@given(st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4)).flatmap(
    lambda d: arrays(np.float64, d, elements=st.floats(allow_nan=True, allow_infinity=True))))
def test_hst_roundtrip_bit_exact(tmp_path_factory, t):
    p = tmp_path_factory.mktemp("h") / "t.hst"
    write_hst(p, t)
    back = read_hst(p)
    assert back.shape == t.shape
    assert back.tobytes() == t.tobytes()


def test_hst_errors(tmp_path):
    p = tmp_path / "bad.hst"
    p.write_bytes(b"HST2" + struct.pack("<3I", 1, 1, 1) + b"\0" * 8)
    with pytest.raises(FormatError) as exc:
        read_hst(p)
    assert exc.value.offset == 0
    p.write_bytes(b"HST1" + struct.pack("<3I", 2, 2, 2) + b"\0" * 10)
    with pytest.raises(FormatError) as exc:
        read_hst(p)
    assert exc.value.offset == 26
    p.write_bytes(b"HST1" + struct.pack("<3I", 1, 1, 1) + b"\0" * 9)
    with pytest.raises(FormatError) as exc:
        read_hst(p)
    assert exc.value.offset == 24
    p.write_bytes(b"HST1\x01\x00")
    with pytest.raises(FormatError):
        read_hst(p)
    with pytest.raises(DimensionError):
        write_hst(tmp_path / "x.hst", np.zeros((2, 2)))


def test_raw_conversion(tmp_path, rng):
    t = rng.standard_normal((3, 4, 5))
    raw = tmp_path / "t.raw"
    t.astype("<f8").tofile(raw)  # C order: last index fastest
    raw_to_hst(raw, (3, 4, 5), tmp_path / "c.hst", order="C")
    np.testing.assert_array_equal(read_hst(tmp_path / "c.hst"), t)
    raw.write_bytes(t.astype("<f8").tobytes(order="F"))
    raw_to_hst(raw, (3, 4, 5), tmp_path / "f.hst")
    np.testing.assert_array_equal(read_hst(tmp_path / "f.hst"), t)
    with pytest.raises(FormatError):
        raw_to_hst(raw, (3, 4, 4), tmp_path / "g.hst")


def test_srf_csv(tmp_path, rng):
    f = rng.random((3, 7))
    p = tmp_path / "srf.csv"
    write_srf(p, f)
    np.testing.assert_array_equal(read_srf(p), f)
    p.write_text("0.5,0.5\n1\n")
    with pytest.raises(FormatError):
        read_srf(p)
    p.write_text("a,b\n")
    with pytest.raises(FormatError):
        read_srf(p)


def test_metrics_csv_roundtrip(tmp_path, rng):
    ref = rng.random((8, 8, 3)) + 0.1
    rep = evaluate(ref, ref + 0.01 * rng.standard_normal(ref.shape), 4)
    p = tmp_path / "m.csv"
    write_metrics_csv(p, rep)
    assert p.read_text().splitlines()[0] == "metric,value"
    back = read_metrics_csv(p)
    assert back == {k: float(v) for k, v in rep.rows()}


def test_error_map_levels():
    ref = np.zeros((2, 3))
    test = ref.copy()
    test[0, 1] = 0.05
    test[1, 2] = -0.5
    img = error_map(ref, test, vmax=0.1)
    assert img.dtype == np.uint8
    assert img[0, 1] == 128 and img[1, 2] == 255 and img.sum() == 128 + 255
    np.testing.assert_array_equal(error_map(ref, ref), 0)


def test_pgm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)).astype(np.uint8)
    p = tmp_path / "e.pgm"
    write_pgm(p, img, comment="scale [0, 0.1]")
    data = p.read_bytes()
    assert data.startswith(b"P5\n# scale [0, 0.1]\n7 5\n255\n")
    back, comments = read_pgm(p)
    np.testing.assert_array_equal(back, img)
    assert comments == ["scale [0, 0.1]"]
