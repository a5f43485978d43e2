from pathlib import Path

import numpy as np
import pytest

from minidml.datasets import separable
from minidml.dsl import Interpreter, interpret, parse
from minidml.errors import DSLRuntimeError
from minidml.matrix import use_sparsity_threshold
from oracles import loop_matmul

FIXTURES = Path(__file__).parent / "fixtures"


def run(src, **inputs):
    return interpret(parse(src), inputs)


class TestValues:
    def test_scalar_arithmetic_and_ieee(self):
        env = run("a = 7 %% 3\nb = 7 %/% 2\nc = 1 / 0\nd = 2 ^ 10\ne = -1 / 0")
        assert (env["a"], env["b"], env["c"], env["d"], env["e"]) == (1.0, 3.0, np.inf, 1024.0, -np.inf)

    def test_booleans_and_strings(self):
        env = run('t = 3 > 2\nf = !t\ns = "n=" + 3 + " " + TRUE\nu = t & f')
        assert env["t"] is True and env["f"] is False and env["u"] is False
        assert env["s"] == "n=3 TRUE"

    def test_matrix_ops_against_loops(self):
        rng = np.random.default_rng(0)
        A, B = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        env = run("C = A %*% B\nD = t(A) * 2 + 1\ns = sum(A)\nr = rowSums(A)", A=A, B=B)
        np.testing.assert_allclose(env["C"].to_numpy(), loop_matmul(A, B), atol=1e-12)
        np.testing.assert_allclose(env["D"].to_numpy(), A.T * 2 + 1)
        assert env["s"] == pytest.approx(A.sum())
        assert env["r"].shape == (3, 1)

    def test_one_based_slicing(self):
        X = np.arange(12.0).reshape(4, 3)
        env = run("a = X[2:3, ]\nb = X[, 1]\nc = X[4, 3]\nd = as.scalar(X[1, 2])", X=X)
        np.testing.assert_array_equal(env["a"].to_numpy(), X[1:3])
        np.testing.assert_array_equal(env["b"].to_numpy(), X[:, :1])
        assert env["c"].to_numpy()[0, 0] == 11.0 and env["d"] == 1.0

    def test_assignment_applies_format_decision(self):
        env = run("Z = matrix(0, rows=10, cols=10)\nO = Z + 1")
        assert env["Z"].is_sparse and not env["O"].is_sparse
        with use_sparsity_threshold(0.0):
            env = run("Z = matrix(0, rows=3, cols=3)\nI = rbind(matrix(1, rows=1, cols=3), Z)")
            assert env["Z"].is_sparse and not env["I"].is_sparse     # 3/12 > 0

    def test_builtins(self):
        env = run("M = matrix(1, rows=2, cols=3)\nn = nrow(M) + ncol(M)\nR = rand(rows=2, cols=2)\n"
                  "B = rbind(M, M)\nC = cbind(M, M)\nk = length(M)\nm = max(M)")
        assert env["n"] == 5 and env["B"].shape == (4, 3) and env["C"].shape == (2, 6)
        assert env["R"].shape == (2, 2) and env["k"] == 6 and env["m"] == 1.0

    def test_rand_is_seeded(self):
        a = interpret(parse("R = rand(rows=3, cols=3)"), seed=5)["R"].to_numpy()
        b = interpret(parse("R = rand(rows=3, cols=3)"), seed=5)["R"].to_numpy()
        c = interpret(parse("R = rand(rows=3, cols=3)"), seed=6)["R"].to_numpy()
        assert np.array_equal(a, b) and not np.array_equal(a, c)


class TestControlFlow:
    def test_for_loop_inclusive(self):
        assert run("s = 0\nfor (i in 1:4) { s = s + i }")["s"] == 10

    def test_for_loop_zero_iterations_when_hi_below_lo(self):
        env = run("s = 0\nfor (i in 3:2) { s = s + 1 }")
        assert env["s"] == 0 and "i" not in env

    def test_fractional_upper_bound(self):
        assert run("s = 0\nfor (i in 1:2.5) { s = s + 1 }")["s"] == 2

    def test_if_else(self):
        env = run("x = 5\nif (x > 3) { y = 1 } else { y = 2 }\nif (x < 3) z = 1 else z = 2")
        assert env["y"] == 1 and env["z"] == 2

    def test_print_output(self):
        seen = []
        interpret(parse('print("v=" + 1.5)\nprint(TRUE)'), output=seen.append)
        assert seen == ["v=1.5", "TRUE"]


class TestFunctions:
    def test_multiple_returns_and_named_args(self):
        src = ("f = function(double a, double b) return (double s, double d) { s = a + b; d = a - b }\n"
               "[p, q] = f(b=1, a=5)")
        env = run(src)
        assert (env["p"], env["q"]) == (6, 4)

    def test_functions_have_local_scope(self):
        env = run("x = 1\nf = function(double a) return (double b) { x = 100; b = a + 1 }\ny = f(x)")
        assert env["x"] == 1 and env["y"] == 2

    def test_recursion_limit(self):
        with pytest.raises(DSLRuntimeError, match="depth"):
            run("f = function(double a) return (double b) { b = f(a) }\ny = f(1)")

    def test_arity_errors(self):
        src = "f = function(double a, double b) return (double s) { s = a + b }\n"
        with pytest.raises(DSLRuntimeError, match="line 2"):
            run(src + "y = f(1)")
        with pytest.raises(DSLRuntimeError, match="line 2"):
            run(src + "[a, b] = f(1, 2)")

    def test_call_function_with_numpy(self):
        it = Interpreter("f = function(matrix[double] X) return (double s) { s = sum(X) }")
        assert it.call_function("f", np.ones((2, 2))) == 4.0

    def test_scalar_to_matrix_coercion_at_call_boundary(self):
        assert run("s = sum(3)")["s"] == 3.0

    def test_type_errors_are_line_tagged(self):
        with pytest.raises(DSLRuntimeError, match="line 2"):
            run('x = "a"\ny = x * 2')


class TestReferenceScript:
    def test_reference_trains_and_loss_decreases(self):
        """Run the fixed reference script on 64 rows; trace W, b and compare to a flat numpy replay."""
        X, Y = separable(64, 4, seed=3)
        trace = []
        it = Interpreter((FIXTURES / "softmax_reference_fixed.dml").read_text(), seed=11,
                         on_assign=lambda n, v, line: trace.append((n, v)) if n in ("W", "b") else None)
        it.call_function("train", X, Y)
        Ws = [v.to_numpy() for n, v in trace if n == "W"]
        bs = [v.to_numpy() for n, v in trace if n == "b"]
        assert len(Ws) == 3 and len(bs) == 3            # init + 2 iterations

        def loss(W, b):
            s = loop_matmul(X, W) + b
            p = np.exp(s - s.max(1, keepdims=True))
            p /= p.sum(1, keepdims=True)
            return -np.sum(Y * np.log(p)) / len(X)

        # independent replay of two minibatch SGD steps
        W, b = Ws[0].copy(), bs[0].copy()
        for i in range(2):
            xb, yb = X[32 * i:32 * i + 32], Y[32 * i:32 * i + 32]
            s = xb @ W + b
            p = np.exp(s - s.max(1, keepdims=True))
            p /= p.sum(1, keepdims=True)
            ds = (p - yb) / 32
            W, b = W - 0.01 * xb.T @ ds, b - 0.01 * ds.sum(0, keepdims=True)
            np.testing.assert_allclose(Ws[i + 1], W, atol=1e-9)
            np.testing.assert_allclose(bs[i + 1], b, atol=1e-9)
        losses = [loss(W_, b_) for W_, b_ in zip(Ws, bs)]
        assert losses[2] < losses[1] < losses[0]

    def test_original_reference_fails_on_undefined_dout(self):
        X, Y = separable(64, 4, seed=3)
        it = Interpreter((FIXTURES / "softmax_reference_original.dml").read_text())
        with pytest.raises(DSLRuntimeError, match="line 19: .*'dout'|undefined identifier 'dout'"):
            it.call_function("train", X, Y)
