import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lrfd.io import FormatError, read_mask, read_matrix, write_mask, write_matrix
from lrfd.observation import ObservationSet, UniformExactCount, sample_observations

matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(allow_nan=False, allow_infinity=False)))


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(matrices)
def test_matrix_round_trip_is_exact(tmp_path, m):
    p = tmp_path / "m.csv"
    write_matrix(p, m)
    np.testing.assert_array_equal(read_matrix(p), m)


def test_matrix_header(tmp_path):
    p = tmp_path / "m.csv"
    write_matrix(p, np.array([[1.0, 0.1], [2.5, -3.0]]))
    lines = p.read_text().splitlines()
    assert lines[0] == "2,2"
    assert lines[1].split(",")[1] == "0.10000000000000001"


@pytest.mark.parametrize("text", ["", "2,2\n1,2\n", "2,2\n1,2\n3\n", "a,b\n", "1,1\nx\n", "1,2,3\n1\n"])
def test_matrix_format_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(FormatError):
        read_matrix(p)


def test_mask_round_trip(tmp_path):
    om = sample_observations(13, 9, UniformExactCount(50), 3)
    p = tmp_path / "mask.csv"
    write_mask(p, om)
    assert p.read_text().splitlines()[0] == "13,9,50"
    assert read_mask(p) == om


def test_empty_mask_round_trip(tmp_path):
    p = tmp_path / "mask.csv"
    write_mask(p, ObservationSet.empty(2, 3))
    assert read_mask(p).count == 0


@pytest.mark.parametrize("text", ["", "2,2,1\n", "2,2,2\n0,0\n0,0\n", "2,2,1\n5,0\n", "2,2,1\n0\n",
                                  "2,2,1\na,b\n"])
def test_mask_format_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_mask(p)
