import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmachine.errors import QuadratureError
from qmachine.numerics import bisect_decreasing, bisect_increasing_vec, integrate_1d, merge_breakpoints


class TestIntegrate:
    def test_polynomial(self):
        assert integrate_1d(lambda x: 3 * x * x, 0.0, 2.0) == pytest.approx(8.0, abs=1e-13)

    def test_reversed_and_empty(self):
        assert integrate_1d(math.sin, math.pi, 0.0) == pytest.approx(-2.0, abs=1e-13)
        assert integrate_1d(math.sin, 1.0, 1.0) == 0.0

    def test_kink_with_breakpoint(self):
        f = lambda x: abs(x - 0.3)
        assert integrate_1d(f, 0.0, 1.0, breakpoints=[0.3, 5.0]) == pytest.approx(0.045 + 0.245, abs=1e-14)

    def test_non_finite(self):
        with pytest.raises(QuadratureError):
            integrate_1d(lambda x: math.inf, 0.0, 1.0)

    def test_error_contract(self):
        # an unresolvable oscillation leaves a large error estimate
        with pytest.raises(QuadratureError) as exc:
            integrate_1d(lambda x: math.sin(1e6 * x) * (x > 0.5), 0.0, 1.0)
        assert exc.value.abserr > 1e-9


class TestBisection:
    def test_decreasing(self):
        x = bisect_decreasing(math.cos, 0.5, 0.0, math.pi)
        assert x == pytest.approx(math.pi / 3, abs=1e-15)

    def test_clamps(self):
        assert bisect_decreasing(math.cos, 2.0, 0.0, math.pi) == 0.0
        assert bisect_decreasing(math.cos, -2.0, 0.0, math.pi) == math.pi

    @given(st.floats(-1.0, 1.0))
    def test_vectorized_matches_scalar(self, y):
        scalar = bisect_decreasing(lambda t: -math.sin(t), -y, -math.pi / 2, math.pi / 2)
        vec = bisect_increasing_vec(np.sin, np.array([y]), -math.pi / 2, math.pi / 2)[0]
        # compare residuals: near y = +-1 sin is flat and abscissas spread out
        assert math.sin(scalar) == pytest.approx(y, abs=1e-12)
        assert math.sin(vec) == pytest.approx(y, abs=1e-12)

    def test_vectorized_array_brackets(self):
        lo = np.array([0.0, 1.0])
        hi = np.array([1.0, 2.0])
        out = bisect_increasing_vec(lambda x: x * x, np.array([0.25, 2.25]), lo, hi)
        assert out == pytest.approx([0.5, 1.5], abs=1e-15)


def test_merge_breakpoints():
    assert merge_breakpoints([3, 1], (1.0, 2)) == (1.0, 2.0, 3.0)
