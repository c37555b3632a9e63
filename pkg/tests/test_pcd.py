import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cosmicp.pcd import (HEADER_KEYS, MalformedHeader, MalformedRecord, UnsupportedEncoding,
                         parse_pcd, read_pcd, save_pcd, write_pcd)


def doc(n, body, fields="x y z", size="4 4 4", type_="F F F", count="1 1 1",
        width=None, data="ascii", extra=""):
    width = n if width is None else width
    return (f"# .PCD v0.7\nVERSION 0.7\nFIELDS {fields}\nSIZE {size}\nTYPE {type_}\n"
            f"COUNT {count}\nWIDTH {width}\nHEIGHT 1\n{extra}VIEWPOINT 0 0 0 1 0 0 0\n"
            f"POINTS {n}\nDATA {data}\n{body}")


def test_minimal_file():
    header, cloud = parse_pcd(doc(1, "0 0 0\n").encode())
    assert header.points == 1
    assert cloud.tolist() == [[0.0, 0.0, 0.0]]


def test_two_points_in_file_order():
    _, cloud = parse_pcd(doc(2, "1 2 3\n4 5 6\n"))
    assert cloud.tolist() == [[1, 2, 3], [4, 5, 6]]


@pytest.mark.parametrize("mode", ["binary", "binary_compressed"])
def test_binary_rejected(mode):
    with pytest.raises(UnsupportedEncoding):
        parse_pcd(doc(1, "", data=mode))


def test_extra_fields_are_dropped():
    text = doc(2, "1 2 3 0.5\n4 5 6 0.25\n", fields="x y z intensity",
               size="4 4 4 4", type_="F F F F", count="1 1 1 1")
    _, cloud = parse_pcd(text)
    assert cloud.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_field_order_is_respected():
    text = doc(1, "9 1 2 3\n", fields="rgb z y x", size="4 4 4 4", type_="F F F F",
               count="1 1 1 1")
    assert parse_pcd(text)[1].tolist() == [[3, 2, 1]]


def test_scientific_notation():
    assert parse_pcd(doc(1, "1e-3 -2.5E+2 .5\n"))[1].tolist() == [[1e-3, -250.0, 0.5]]


def test_width_height_mismatch():
    with pytest.raises(MalformedHeader) as exc:
        parse_pcd(doc(2, "1 2 3\n4 5 6\n", width=3))
    assert exc.value.line == 10  # the POINTS line


def test_duplicate_key():
    with pytest.raises(MalformedHeader, match="duplicate WIDTH"):
        parse_pcd(doc(1, "0 0 0\n", extra="WIDTH 1\n"))


def test_missing_key():
    text = doc(1, "0 0 0\n").replace("POINTS 1\n", "")
    with pytest.raises(MalformedHeader, match="POINTS"):
        parse_pcd(text)


def test_missing_xyz_field():
    with pytest.raises(MalformedHeader):
        parse_pcd(doc(1, "0 0 0\n", fields="x y w"))


@pytest.mark.parametrize("body, line", [
    ("1 2 x\n", 12), ("1 2\n", 12), ("1 2 3\n1 2 nan\n", 13), ("1 2 3\n4 5 inf\n", 13),
])
def test_bad_records_name_the_line(body, line):
    n = body.count("\n")
    with pytest.raises(MalformedRecord) as exc:
        parse_pcd(doc(n, body))
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_record_count_mismatch():
    with pytest.raises(MalformedRecord):
        parse_pcd(doc(3, "1 2 3\n4 5 6\n"))
    with pytest.raises(MalformedRecord):
        parse_pcd(doc(1, "1 2 3\n4 5 6\n"))


def test_writer_header_layout():
    text = write_pcd(np.array([[1.0, 2.0, 3.0]])).decode()
    keys = [line.split()[0] for line in text.splitlines()[:10]]
    assert tuple(keys) == HEADER_KEYS
    assert "VIEWPOINT 0 0 0 1 0 0 0" in text
    assert "SIZE 4 4 4" in text and "DATA ascii" in text


def test_origin_round_trip():
    assert parse_pcd(write_pcd(np.zeros((1, 3))))[1].tolist() == [[0.0, 0.0, 0.0]]


def test_writer_rejects_empty():
    with pytest.raises(ValueError):
        write_pcd(np.zeros((0, 3)))


def test_random_cloud_round_trip(rng):
    C = rng.uniform(-100, 100, size=(100, 3))
    _, back = parse_pcd(write_pcd(C))
    assert back.shape == C.shape
    np.testing.assert_allclose(back, C, rtol=0, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
                  elements=st.floats(-100, 100, allow_nan=False)))
def test_round_trip_property(C):
    _, back = parse_pcd(write_pcd(C))
    assert back.shape == C.shape
    assert np.abs(back - C).max() <= 1e-6


def test_file_helpers(tmp_path, rng):
    C = rng.normal(size=(5, 3))
    save_pcd(tmp_path / "a.pcd", C)
    np.testing.assert_allclose(read_pcd(tmp_path / "a.pcd"), C, atol=1e-6)
