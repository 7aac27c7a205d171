import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tconvex.io import CloudParseError, format_cloud, parse_cloud, read_cloud, write_cloud

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.integers(1, 20).flatmap(lambda n: st.integers(1, 5).flatmap(
    lambda d: arrays(np.float64, (n, d), elements=finite))), st.booleans())
def test_cloud_text_round_trip_is_exact(x, header):
    back = parse_cloud(format_cloud(x, header))
    assert back.shape == x.shape
    assert np.array_equal(back, x)


def test_header_and_blank_lines():
    x = parse_cloud("x0,x1\n1,2\n\n3,4\n")
    assert x.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert format_cloud(np.array([[1.0, 0.5]]), header=True) == "x0,x1\n1,0.5\n"
    assert format_cloud(np.array([[1.0, 0.5]])) == "1,0.5\n"


@pytest.mark.parametrize("text,row", [
    ("1,2\n3,oops\n", 2),
    ("1,2\n3\n", 2),
    ("1,2\nnan,1\n", 2),
    ("1,inf\n", 1),
    ("x0,y\n1,2\n", 1),
    ("", 0),
    ("x0,x1\n", 0),
])
def test_parse_errors_name_the_row(text, row):
    with pytest.raises(CloudParseError) as err:
        parse_cloud(text, "c.csv")
    assert err.value.row == row
    assert f"row {row}" in str(err.value)


def test_file_round_trip(tmp_path, rng):
    x = rng.standard_normal((30, 4))
    path = tmp_path / "c.csv"
    write_cloud(path, x)
    assert np.array_equal(read_cloud(path), x)
    with pytest.raises(FileNotFoundError):
        read_cloud(tmp_path / "missing.csv")
    with pytest.raises(ValueError):
        format_cloud(np.zeros(3))
