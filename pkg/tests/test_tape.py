"""Reverse-mode tape: exactness against finite differences, determinism."""

import numpy as np
import pytest

from conftest import fd_gradient, max_rel_dev
from kernelpde.hyperdual import seeded_points
from kernelpde.kernels import kernel_from_name
from kernelpde.model import ModelParams
from kernelpde.tape import Tape, TapeUsageError, loss_gradient


class TestBasics:
    def test_square_gradient(self):
        tape = Tape()
        th = tape.leaf(3.0)
        (g,) = tape.gradient(th * th, [th])
        assert g == 6.0

    def test_unreferenced_leaf_gets_zero(self):
        tape = Tape()
        a = tape.leaf(2.0)
        b = tape.leaf(5.0)
        loss = a * a
        ga, gb = tape.gradient(loss, [a, b])
        assert ga == 4.0
        assert gb == 0.0

    def test_backward_before_forward(self):
        tape = Tape()
        with pytest.raises(TapeUsageError):
            tape.gradient(None, [])

    def test_foreign_loss_rejected(self):
        t1, t2 = Tape(), Tape()
        a = t1.leaf(1.0)
        t2.leaf(1.0)
        with pytest.raises(TapeUsageError):
            t2.gradient(a * a, [a])

    def test_nonscalar_loss_rejected(self):
        tape = Tape()
        a = tape.leaf(np.array([1.0, 2.0]))
        with pytest.raises(TapeUsageError, match="scalar"):
            tape.gradient(a * a, [a])

    def test_loss_gradient_wrapper(self):
        tape = Tape()
        th = tape.leaf(2.0)
        (g,) = loss_gradient(th * th * th, [th])
        np.testing.assert_allclose(g, 12.0)


class TestAgainstFiniteDifferences:
    def test_second_derivative_loss_single_gaussian(self):
        """L = (u_xx at one point)^2 for a one-node model, all parameters."""
        base = {"free_X": np.array([[0.3]]), "h": np.array([0.8]),
                "U": np.array([1.7])}
        x = np.array([[0.1]])

        def loss_fn(params):
            m = ModelParams(np.zeros((0, 1)), params["free_X"], params["h"],
                            params["U"], kernel_from_name("gaussian"))
            out = m.evaluate(seeded_points(x, 0))
            return float(out.d12[0] ** 2)

        m = ModelParams(np.zeros((0, 1)), base["free_X"], base["h"], base["U"],
                        kernel_from_name("gaussian"))
        tape = Tape()
        bound = m.bind(tape)
        out = m.evaluate(seeded_points(x, 0), bound=bound)
        d2 = out.slot("d12")
        loss = (d2 * d2).sum()
        names = sorted(base)
        grads = dict(zip(names, tape.gradient(loss, [bound[k] for k in names])))
        fd = fd_gradient(loss_fn, base)
        assert max_rel_dev(grads, fd) < 1e-5

    def test_mixed_slot_loss(self, rng):
        """Loss mixing value, slope and curvature slots of several nodes."""
        base = {"free_X": rng.uniform(0, 1, (4, 1)), "h": rng.uniform(0.2, 0.6, 5),
                "U": rng.normal(size=5)}
        fixed = np.array([[0.0]])
        xs = rng.uniform(0, 1, (6, 1))

        def build(params):
            return ModelParams(fixed, params["free_X"], params["h"], params["U"],
                               kernel_from_name("softplus-hat"))

        def loss_fn(params):
            out = build(params).evaluate(seeded_points(xs, 0))
            return float(np.mean((out.d12 + 3.0 * out.v) ** 2)
                         + np.mean(out.d1 ** 2))

        m = build(base)
        tape = Tape()
        bound = m.bind(tape)
        out = m.evaluate(seeded_points(xs, 0), bound=bound)
        r = out.slot("d12") + 3.0 * out.slot("v")
        loss = (r * r).mean() + (out.slot("d1") * out.slot("d1")).mean()
        names = sorted(base)
        grads = dict(zip(names, tape.gradient(loss, [bound[k] for k in names])))
        fd = fd_gradient(loss_fn, base)
        assert max_rel_dev(grads, fd) < 1e-4


class TestDeterminism:
    def test_identical_recordings_identical_gradients(self, rng):
        base = {"free_X": rng.uniform(0, 1, (3, 1)), "h": rng.uniform(0.2, 0.5, 3),
                "U": rng.normal(size=3)}
        xs = rng.uniform(0, 1, (8, 1))

        def run():
            m = ModelParams(np.zeros((0, 1)), base["free_X"], base["h"],
                            base["U"], kernel_from_name("gaussian"))
            tape = Tape()
            bound = m.bind(tape)
            out = m.evaluate(seeded_points(xs, 0), bound=bound)
            r = out.slot("d12") + 1.0
            loss = (r * r).mean()
            names = sorted(base)
            return [g.copy() for g in
                    tape.gradient(loss, [bound[k] for k in names])]

        g1, g2 = run(), run()
        for a, b in zip(g1, g2):
            np.testing.assert_array_equal(a, b)


class TestStructuralOps:
    def test_concat_routes_adjoints(self):
        tape = Tape()
        a = tape.leaf(np.array([1.0, 2.0]))
        joined = tape.concat([np.array([5.0]), a], axis=0)
        loss = (joined * np.array([1.0, 10.0, 100.0])).sum()
        (g,) = tape.gradient(loss, [a])
        np.testing.assert_array_equal(g, [10.0, 100.0])

    def test_take_scatters_adjoints(self):
        tape = Tape()
        a = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
        loss = (a.take(1, axis=-1) * 3.0).sum()
        (g,) = tape.gradient(loss, [a])
        np.testing.assert_array_equal(g, [[0.0, 3.0], [0.0, 3.0]])

    def test_reshape_roundtrip(self):
        tape = Tape()
        a = tape.leaf(np.arange(6.0))
        loss = (a.reshape((2, 3)) * np.ones((2, 3))).sum()
        (g,) = tape.gradient(loss, [a])
        np.testing.assert_array_equal(g, np.ones(6))

    def test_broadcast_unbroadcast(self):
        tape = Tape()
        a = tape.leaf(np.array([2.0]))          # will broadcast over 4 rows
        b = tape.leaf(np.ones((4, 1)))
        loss = (a * b).sum()
        ga, gb = tape.gradient(loss, [a, b])
        np.testing.assert_array_equal(ga, [4.0])
        np.testing.assert_array_equal(gb, 2.0 * np.ones((4, 1)))
