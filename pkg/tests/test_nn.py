import numpy as np
import pytest

from minidml.errors import ShapeError
from minidml.matrix import Matrix
from minidml.nn import Affine, Conv2D, Dropout, MaxPool2D, ReLU, Sequential, Softmax
from minidml.nn import layers as L
from oracles import central_diff, direct_conv, direct_maxpool, loop_matmul, rel_err

RNG = np.random.default_rng


def a(m):
    return m.to_numpy()


class TestForward:
    def test_affine(self):
        rng = RNG(0)
        X, W, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=(1, 2))
        np.testing.assert_allclose(a(L.affine.forward(X, W, b)), loop_matmul(X, W) + b, atol=1e-12)

    def test_elementwise_activations(self):
        x = np.array([[-2.0, -0.5, 0.0, 0.5, 2.0]])
        np.testing.assert_array_equal(a(L.relu.forward(x)), [[0, 0, 0, 0.5, 2.0]])
        np.testing.assert_allclose(a(L.sigmoid.forward(x)), 1 / (1 + np.exp(-x)))
        np.testing.assert_allclose(a(L.tanh.forward(x)), np.tanh(x))

    def test_sigmoid_is_stable_for_large_inputs(self):
        out = a(L.sigmoid.forward(np.array([[-1000.0, 1000.0]])))
        np.testing.assert_array_equal(out, [[0.0, 1.0]])

    def test_softmax_rows_sum_to_one_and_are_shift_invariant(self):
        s = RNG(1).normal(size=(3, 4))
        p = a(L.softmax.forward(s))
        np.testing.assert_allclose(p.sum(axis=1), 1.0)
        np.testing.assert_allclose(a(L.softmax.forward(s + 1000.0)), p, atol=1e-12)

    def test_cross_entropy(self):
        p = np.array([[0.7, 0.3], [0.2, 0.8]])
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert L.cross_entropy_loss.forward(p, y) == pytest.approx(-(np.log(0.7) + np.log(0.8)) / 2)

    def test_conv_layer_adds_bias_per_filter(self):
        rng = RNG(2)
        X, W, b = rng.normal(size=(2, 2 * 16)), rng.normal(size=(3, 2 * 9)), rng.normal(size=(1, 3))
        out, hout, wout = L.conv2d.forward(X, W, b, 2, 4, 4, 3, 3, 1, 1, 1, 1)
        assert (hout, wout) == (4, 4)
        np.testing.assert_allclose(a(out), direct_conv(X, W, b, 2, 4, 4, 3, 3, 1, 1), atol=1e-12)

    def test_max_pool_layer(self):
        X = RNG(3).normal(size=(2, 2 * 16))
        out, hout, wout = L.max_pool2d.forward(X, 2, 4, 4, 2, 2, 2, 2, 0, 0)
        assert (hout, wout) == (2, 2)
        np.testing.assert_array_equal(a(out), direct_maxpool(X, 2, 4, 4, 2, 2, 2))

    def test_dropout_mask_is_seeded_and_scaled(self):
        X = np.ones((50, 40))
        out1, m1 = L.dropout.forward(X, 0.5, 7)
        out2, m2 = L.dropout.forward(X, 0.5, 7)
        assert np.array_equal(a(m1), a(m2))
        assert set(np.unique(a(out1))) <= {0.0, 2.0}
        assert 0.4 < a(m1).mean() < 0.6
        assert np.array_equal(a(L.dropout.forward(X, 1.0, 0)[0]), X)
        with pytest.raises(ShapeError):
            L.dropout.forward(X, 0.0, 0)

    def test_init_shapes_and_determinism(self):
        W, b = L.affine.init(5, 3, seed=1)
        assert W.shape == (5, 3) and b.shape == (1, 3) and b.nnz == 0
        assert np.array_equal(a(W), a(L.affine.init(5, 3, seed=1)[0]))
        limit = np.sqrt(6 / 8)
        assert np.all(np.abs(a(W)) <= limit)
        Wc, bc = L.conv2d.init(4, 2, 3, 3, seed=0)
        assert Wc.shape == (4, 18) and bc.shape == (1, 4)

    def test_affine_shape_errors(self):
        with pytest.raises(ShapeError, match="affine"):
            L.affine.forward(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros((1, 2)))
        with pytest.raises(ShapeError, match="bias"):
            L.affine.forward(np.zeros((2, 3)), np.zeros((3, 2)), np.zeros((1, 3)))


def fd_check(f, x, analytic, tol=1e-6):
    assert rel_err(analytic, central_diff(f, x)) < tol


class TestBackward:
    """Every backward against central differences of an independent forward."""

    def test_affine(self):
        rng = RNG(4)
        X, W, b, R = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=(1, 2)), rng.normal(size=(3, 2))
        dX, dW, db = L.affine.backward(R, X, W, b)
        fd_check(lambda v: np.sum((loop_matmul(v, W) + b) * R), X, a(dX))
        fd_check(lambda v: np.sum((loop_matmul(X, v) + b) * R), W, a(dW))
        fd_check(lambda v: np.sum((loop_matmul(X, W) + v) * R), b, a(db))

    @pytest.mark.parametrize("name, fn", [("relu", lambda x: np.maximum(x, 0)),
                                          ("sigmoid", lambda x: 1 / (1 + np.exp(-x))),
                                          ("tanh", np.tanh)])
    def test_activations(self, name, fn):
        rng = RNG(5)
        X = rng.uniform(0.1, 2, size=(3, 4)) * rng.choice([-1, 1], size=(3, 4))
        R = rng.normal(size=X.shape)
        dX = getattr(L, name).backward(R, X)
        fd_check(lambda v: np.sum(fn(v) * R), X, a(dX))

    def test_softmax(self):
        rng = RNG(6)
        S, R = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))

        def f(v):
            e = np.exp(v)
            return np.sum(e / e.sum(axis=1, keepdims=True) * R)
        fd_check(f, S, a(L.softmax.backward(R, S)))

    def test_cross_entropy(self):
        rng = RNG(7)
        p = rng.uniform(0.1, 1, size=(4, 3))
        y = np.eye(3)[[0, 2, 1, 1]]
        fd_check(lambda v: -np.sum(y * np.log(v)) / 4, p, a(L.cross_entropy_loss.backward(p, y)))

    def test_conv2d(self):
        rng = RNG(8)
        X, W, b = rng.normal(size=(2, 2 * 25)), rng.normal(size=(2, 2 * 9)), rng.normal(size=(1, 2))
        geom = (2, 5, 5, 3, 3, 2, 2, 1, 1)
        out, hout, wout = L.conv2d.forward(X, W, b, *geom)
        R = rng.normal(size=a(out).shape)
        dX, dW, db = L.conv2d.backward(R, hout, wout, X, W, b, *geom)
        conv = lambda x, w, bb: direct_conv(x, w, bb, 2, 5, 5, 3, 3, 2, 1)  # noqa: E731
        fd_check(lambda v: np.sum(conv(v, W, b) * R), X, a(dX))
        fd_check(lambda v: np.sum(conv(X, v, b) * R), W, a(dW))
        fd_check(lambda v: np.sum(conv(X, W, v) * R), b, a(db))

    def test_max_pool(self):
        rng = RNG(9)
        X = (rng.permutation(32).reshape(1, 32) - 16) * 0.1
        geom = (2, 4, 4, 2, 2, 2, 2, 0, 0)
        out, hout, wout = L.max_pool2d.forward(X, *geom)
        R = rng.normal(size=a(out).shape)
        dX = L.max_pool2d.backward(R, hout, wout, X, *geom)
        fd_check(lambda v: np.sum(direct_maxpool(v, 2, 4, 4, 2, 2, 2) * R), X, a(dX))

    def test_dropout(self):
        rng = RNG(10)
        X, R = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
        _, mask = L.dropout.forward(X, 0.6, 3)
        dX = L.dropout.backward(R, mask, 0.6)
        fd_check(lambda v: np.sum(a(L.dropout.forward(v, 0.6, 3)[0]) * R), X, a(dX))


class TestSequential:
    def build(self, rng):
        layers = [Conv2D(1, 6, 6, 2, (3, 3), rng=rng), ReLU(), MaxPool2D(2, 4, 4, (2, 2), (2, 2)),
                  Affine(8, 3, rng=rng), Softmax()]
        names = [("W1", "b1"), None, None, ("W2", "b2"), None]
        return Sequential(layers, names)

    def test_params_and_grads(self):
        net = self.build(RNG(0))
        X, y = RNG(1).normal(size=(2, 36)), np.eye(3)[[0, 2]]
        probs = net.forward(Matrix.dense(X))
        net.backward_from_loss(probs, y)
        assert set(net.params) == set(net.grads) == {"W1", "b1", "W2", "b2"}
        assert net.grads["W1"].shape == net.params["W1"].shape

    def test_set_params_and_predict(self):
        net = self.build(RNG(0))
        zeros = {k: Matrix.zeros(*v.shape) for k, v in net.params.items()}
        net.set_params(zeros)
        p = net.predict(Matrix.dense(RNG(2).normal(size=(3, 36))))
        np.testing.assert_allclose(p, 1 / 3)

    def test_dropout_is_identity_at_inference(self):
        d = Dropout(0.5, seed=1)
        x = Matrix.dense(np.ones((2, 3)))
        assert d.forward(x, training=False) is x
        assert d.backward(x) is x
