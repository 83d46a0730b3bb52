import numpy as np
import pytest

from csbp import vectors
from csbp.errors import ParseError
from csbp.rng import make_rng


class TestVectorFiles:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = make_rng(1)
        for size in (1, 7, 100):
            x = rng.standard_normal(size) * 10.0 ** rng.integers(-8, 8, size)
            path = tmp_path / f"v{size}.txt"
            vectors.save_vector(x, path)
            back = vectors.load_vector(path)
            assert np.array_equal(back, x)

    def test_header_checked(self):
        with pytest.raises(ParseError):
            vectors.parse_vector("csvec v2 1\n0.0\n")
        with pytest.raises(ParseError):
            vectors.parse_vector("")

    def test_length_mismatch(self):
        with pytest.raises(ParseError):
            vectors.parse_vector("csvec v1 3\n1.0\n2.0\n")

    def test_bad_value_names_line(self):
        with pytest.raises(ParseError) as err:
            vectors.parse_vector("csvec v1 2\n1.0\nxyz\n")
        assert err.value.line == 3
