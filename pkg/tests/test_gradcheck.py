import numpy as np
import pytest

from minidml.gradcheck import LAYER_NAMES, central_difference, check_layer, check_network, kink_margin, \
    relative_error
from minidml.matrix import Matrix
from minidml.nn import Affine, MaxPool2D, ReLU, Sequential, Softmax


def test_central_difference_on_known_function():
    x = np.array([[1.0, -2.0, 0.5]])
    g = central_difference(lambda v: float(np.sum(v ** 3)), x)
    np.testing.assert_allclose(g, 3 * x ** 2, rtol=1e-8)
    assert np.array_equal(x, [[1.0, -2.0, 0.5]])


def test_relative_error_floor():
    assert relative_error([0.0], [1e-12]) < 1e-5
    assert relative_error([1.0], [1.1]) == pytest.approx(0.1 / 1.1)


@pytest.mark.parametrize("name", LAYER_NAMES)
def test_every_layer_passes(name):
    report = check_layer(name, seed=3)
    assert report and max(report.values()) < 1e-6


def test_unknown_layer():
    with pytest.raises(ValueError, match="unknown layer"):
        check_layer("lstm")


def test_detects_a_wrong_gradient():
    class BrokenReLU(ReLU):
        def backward(self, dout):
            return super().backward(dout) * 1.01

    rng = np.random.default_rng(0)
    net = Sequential([Affine(3, 4, rng=rng), BrokenReLU(), Affine(4, 2, rng=rng), Softmax()],
                     [("W1", "b1"), None, ("W2", "b2"), None])
    X, y = rng.normal(size=(3, 3)), np.eye(2)[[0, 1, 1]]
    report = check_network(net, X, y)
    assert report["W1"] > 1e-3


def test_kink_margin():
    net = Sequential([ReLU(), MaxPool2D(1, 1, 2, (1, 2), (1, 2))])
    net.forward(Matrix.dense([[0.25, -1.0]]))
    assert kink_margin(net) == pytest.approx(0.25)
