import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jadce.harness.metrics import aer, false_alarm_rate, miss_rate, nmse, nmse_standard, to_db


class TestAer:
    def test_identical(self):
        assert aer({1, 2, 3}, {1, 2, 3}, 10) == 0

    def test_example(self):
        assert aer({1, 2}, {2, 3}, 4) == 0.5

    def test_nothing_detected(self):
        assert aer({1, 4, 7}, set(), 20) == 3 / 20

    @given(st.sets(st.integers(1, 12)), st.sets(st.integers(1, 12)))
    def test_bounds_and_zero_iff_equal(self, t, d):
        v = aer(t, d, 12)
        assert 0 <= v <= 1
        assert (v == 0) == (t == d)

    def test_components(self):
        assert miss_rate({1, 2}, {2, 3}) == 0.5
        assert false_alarm_rate({1, 2}, {2, 3}, 4) == 0.5
        assert miss_rate(set(), {1}) == 0.0
        assert false_alarm_rate({1, 2}, {1, 2}, 2) == 0.0


class TestNmse:
    def test_perfect(self):
        H = np.ones((2, 3, 3), complex)
        assert nmse(H, H) == 0

    def test_doubled_estimate(self):
        H = np.random.default_rng(0).standard_normal((4, 3, 5)) + 0j
        assert nmse(H, 2 * H) == pytest.approx(0.5, rel=1e-14)
        assert nmse_standard(H, 2 * H) == pytest.approx(1.0, rel=1e-14)

    def test_loop_oracle(self):
        rng = np.random.default_rng(1)
        H = rng.standard_normal((5, 4, 3)) + 1j * rng.standard_normal((5, 4, 3))
        Hh = rng.standard_normal((5, 4, 3)) + 1j * rng.standard_normal((5, 4, 3))
        num = den = den_t = 0.0
        for n in range(5):
            for i in range(4):
                for j in range(3):
                    num += abs(H[n, i, j] - Hh[n, i, j]) ** 2
                    den += abs(Hh[n, i, j]) ** 2
                    den_t += abs(H[n, i, j]) ** 2
        assert nmse(H, Hh) == pytest.approx(math.sqrt(num) / math.sqrt(den), abs=1e-12)
        assert nmse_standard(H, Hh) == pytest.approx(math.sqrt(num) / math.sqrt(den_t), abs=1e-12)

    def test_zero_estimate_is_nan(self):
        assert math.isnan(nmse(np.ones((1, 2, 2)), np.zeros((1, 2, 2))))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nmse(np.ones((1, 2, 2)), np.ones((1, 2, 3)))

    def test_db(self):
        assert to_db(0.1) == pytest.approx(-10.0)
        assert to_db(0.0) == -math.inf
