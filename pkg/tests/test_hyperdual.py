"""Second-order forward arithmetic against hand or symbolic derivatives."""

import math

import numpy as np
import pytest

from kernelpde import hyperdual as hd
from kernelpde.hyperdual import EvaluationError, HyperDual, lift


def seeded(x):
    return lift(x, 1.0, 1.0)


def slots(a):
    return (a.v, a.d1, a.d2, a.d12)


class TestLift:
    def test_constant_lift(self):
        np.testing.assert_array_equal(slots(lift(3.0)), (3.0, 0.0, 0.0, 0.0))

    def test_seeded_variable(self):
        np.testing.assert_array_equal(slots(lift(2.0, 1.0, 1.0)), (2.0, 1.0, 1.0, 0.0))

    def test_exp_at_zero(self):
        np.testing.assert_allclose(slots(hd.exp(seeded(0.0))), (1.0, 1.0, 1.0, 1.0))

    def test_unseeded_matches_plain_arithmetic(self):
        x = lift(1.7)
        out = hd.exp(x * x - 3.0 * x) / (1.0 + x)
        plain = math.exp(1.7 * 1.7 - 3.0 * 1.7) / (1.0 + 1.7)
        assert out.v == plain
        assert out.d1 == 0.0 and out.d2 == 0.0 and out.d12 == 0.0


class TestApply:
    def test_square_second_derivative(self):
        out = hd.apply("mul", seeded(2.0), seeded(2.0))
        np.testing.assert_allclose(slots(out), (4.0, 4.0, 4.0, 2.0))

    def test_sin_at_zero(self):
        out = hd.apply("sin", seeded(0.0))
        np.testing.assert_allclose(slots(out), (0.0, 1.0, 1.0, 0.0))

    def test_softplus_derivatives_at_zero(self):
        out = hd.log(1.0 + hd.exp(seeded(0.0)))
        np.testing.assert_allclose(slots(out), (math.log(2.0), 0.5, 0.5, 0.25))

    def test_unknown_op_rejected(self):
        with pytest.raises(ValueError, match="unknown operation"):
            hd.apply("atan2", seeded(1.0))

    def test_div_by_zero_value(self):
        with pytest.raises(EvaluationError):
            seeded(1.0) / lift(0.0)

    def test_log_requires_positive(self):
        with pytest.raises(EvaluationError):
            hd.log(seeded(-1.0))

    def test_sqrt_zero_is_domain_error(self):
        with pytest.raises(EvaluationError):
            hd.sqrt(seeded(0.0))


class TestPolynomials:
    """Degree <= 4 polynomials carry exact first/second derivatives."""

    @pytest.mark.parametrize("x0", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_quartic(self, x0):
        c = [0.7, -1.3, 2.1, 0.4, -0.9]
        x = seeded(x0)
        p = c[0] + c[1] * x + c[2] * x ** 2 + c[3] * x ** 3 + c[4] * x ** 4
        d1 = c[1] + 2 * c[2] * x0 + 3 * c[3] * x0 ** 2 + 4 * c[4] * x0 ** 3
        d2 = 2 * c[2] + 6 * c[3] * x0 + 12 * c[4] * x0 ** 2
        val = sum(ci * x0 ** i for i, ci in enumerate(c))
        assert abs(p.v - val) < 1e-12
        assert abs(p.d1 - d1) < 1e-12
        assert abs(p.d2 - d1) < 1e-12
        assert abs(p.d12 - d2) < 1e-12


class TestComposition:
    def test_exp_sin_square(self, rng):
        """d/dx and d2/dx2 of exp(sin(x^2)) against the closed form."""
        for x0 in rng.uniform(-2.0, 2.0, size=20):
            out = hd.exp(hd.sin(seeded(x0) ** 2))
            s, c = math.sin(x0 ** 2), math.cos(x0 ** 2)
            f = math.exp(s)
            df = f * c * 2 * x0
            d2f = f * ((c * 2 * x0) ** 2 + 2 * c - s * 4 * x0 ** 2)
            np.testing.assert_allclose(out.v, f, rtol=1e-10)
            np.testing.assert_allclose(out.d1, df, rtol=1e-10)
            np.testing.assert_allclose(out.d12, d2f, rtol=1e-10)

    def test_tanh_sqrt_mix(self, rng):
        for x0 in rng.uniform(0.5, 3.0, size=10):
            out = hd.tanh(hd.sqrt(seeded(x0)))
            r = math.sqrt(x0)
            t = math.tanh(r)
            sech2 = 1 - t * t
            df = sech2 * 0.5 / r
            d2f = (-2 * t * sech2) * (0.5 / r) ** 2 + sech2 * (-0.25 / r ** 3)
            np.testing.assert_allclose(out.d1, df, rtol=1e-10)
            np.testing.assert_allclose(out.d12, d2f, rtol=1e-10)


class TestArraySlots:
    """All formulas are elementwise, so arrays ride along unchanged."""

    def test_vectorized_matches_scalar(self, rng):
        xs = rng.uniform(-1.5, 1.5, size=7)
        batch = hd.exp(hd.sin(lift(xs, np.ones(7), np.ones(7)) ** 2))
        for i, x0 in enumerate(xs):
            single = hd.exp(hd.sin(seeded(float(x0)) ** 2))
            assert batch.v[i] == single.v
            assert batch.d1[i] == single.d1
            assert batch.d12[i] == single.d12

    def test_softplus_extreme_arguments(self):
        big = hd.softplus(seeded(50.0))
        assert abs(big.v - 50.0) < 1e-12
        small = hd.softplus(seeded(-50.0))
        assert 0.0 < small.v < 1e-20
        assert np.isfinite(small.d12)

    def test_relu_gates_slopes(self):
        neg = hd.relu(seeded(-0.5))
        pos = hd.relu(seeded(0.5))
        assert (neg.v, neg.d1, neg.d12) == (0.0, 0.0, 0.0)
        assert (pos.v, pos.d1, pos.d12) == (0.5, 1.0, 0.0)


class TestSeededPoints:
    def test_single_axis_seed(self):
        x = np.array([[0.3, 0.7], [0.1, 0.2]])
        out = hd.seeded_points(x, 1)
        np.testing.assert_array_equal(out.d1[:, 0], [0.0, 0.0])
        np.testing.assert_array_equal(out.d1[:, 1], [1.0, 1.0])
        np.testing.assert_array_equal(out.d1, out.d2)
        np.testing.assert_array_equal(out.d12, 0.0)
