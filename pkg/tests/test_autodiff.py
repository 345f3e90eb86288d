import math

import numpy as np
import pytest

from core.autodiff import (PRIMITIVES, Tensor, apply_primitive, backward, gather, grad_check,
                           matmul, register_primitive)
from core.exceptions import DomainError, IndexRangeError, ShapeError, UnmixError


def leaf(value, name="x"):
    return Tensor(value, requires_grad=True, name=name)


class TestForward:
    def test_add_componentwise(self):
        out = apply_primitive("add", [Tensor([1.0, 2.0]), Tensor([3.0, 4.0])])
        assert out.value.tolist() == [4.0, 6.0]

    def test_matmul_identity(self):
        out = matmul(np.eye(2), Tensor([[5.0], [7.0]]))
        assert out.value.tolist() == [[5.0], [7.0]]

    def test_sigmoid_zero(self):
        assert Tensor(0.0).sigmoid().item() == 0.5

    def test_broadcasting_follows_numpy(self):
        out = Tensor(np.ones((2, 3))) + Tensor([1.0, 2.0, 3.0])
        assert out.shape == (2, 3)
        assert out.value[1].tolist() == [2.0, 3.0, 4.0]

    def test_unknown_primitive(self):
        with pytest.raises(UnmixError):
            apply_primitive("cosh", [Tensor(1.0)])

    def test_registry_rejects_duplicates(self):
        with pytest.raises(UnmixError):
            register_primitive("add")(lambda a, b: (a + b, None))

    def test_registry_holds_every_primitive(self):
        expected = {"add", "sub", "mul", "div", "matmul", "transpose", "reduce_sum", "reduce_mean",
                    "exp", "log", "tanh", "sigmoid", "square", "sqrt", "negate", "broadcast_add_row"}
        assert expected <= set(PRIMITIVES)


class TestErrors:
    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
            Tensor([1.0, 2.0]) + Tensor([1.0, 2.0, 3.0])

    def test_matmul_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    @pytest.mark.parametrize("op", ["log", "sqrt"])
    def test_domain_errors(self, op):
        with pytest.raises(DomainError):
            apply_primitive(op, [Tensor([1.0, 0.0])])
        with pytest.raises(DomainError):
            apply_primitive(op, [Tensor([-2.0])])

    def test_division_by_zero(self):
        with pytest.raises(DomainError):
            Tensor(1.0) / Tensor(0.0)

    def test_shape_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            Tensor([1.0, 2.0]) * Tensor([1.0, 2.0, 3.0])

    def test_take_out_of_range(self):
        with pytest.raises(IndexRangeError):
            Tensor([1.0, 2.0]).take([2])

    def test_gather_out_of_range(self):
        with pytest.raises(IndexRangeError):
            gather(np.zeros((2, 3)), np.array([[0, 3], [1, 1]]))

    def test_backward_needs_scalar(self):
        x = leaf([1.0, 2.0])
        with pytest.raises(ShapeError):
            backward(x * 2.0)

    def test_grad_check_epsilon_range(self):
        x = leaf(1.0)
        with pytest.raises(DomainError):
            grad_check(lambda: x.square(), [x], epsilon=0.1)
        with pytest.raises(DomainError):
            grad_check(lambda: x.square(), [x], epsilon=0.0)


class TestBackward:
    def test_square(self):
        x = leaf(3.0)
        grads = backward(x.square())
        assert grads[x] == pytest.approx(6.0)
        assert x.grad == pytest.approx(6.0)

    def test_product_rule(self):
        a, b = leaf([1.0, 2.0], "a"), leaf([3.0, 4.0], "b")
        grads = backward((a * b).sum())
        assert grads[a].tolist() == [3.0, 4.0]
        assert grads[b].tolist() == [1.0, 2.0]

    def test_sigmoid_slope_at_zero(self):
        w = leaf(0.0)
        assert backward(w.sigmoid())[w] == pytest.approx(0.25)

    def test_unreachable_leaf_gets_zero(self):
        x, unused = leaf([1.0, 2.0], "x"), leaf([[1.0, 2.0]], "unused")
        grads = backward(x.sum(), [x, unused])
        assert np.array_equal(grads[unused], np.zeros((1, 2)))

    def test_shared_node_accumulates(self):
        x = leaf(2.0)
        y = x * x + x
        assert backward(y)[x] == pytest.approx(5.0)

    def test_fresh_gradients_each_call(self):
        x = leaf(3.0)
        backward(x.square())
        assert backward(x.square())[x] == pytest.approx(6.0)

    def test_constants_do_not_join_graph(self):
        out = Tensor(2.0) * 3.0
        assert out.is_leaf and not out.requires_grad

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        a = leaf(rng.normal(size=(3, 4)), "a")
        b = leaf(rng.normal(size=(4, 2)), "b")

        def run():
            loss = (matmul(a, b).tanh().square()).mean()
            grads = backward(loss, [a, b])
            return loss.value.copy(), grads[a].copy(), grads[b].copy()

        first, second = run(), run()
        for x, y in zip(first, second):
            assert np.array_equal(x, y)


def test_grad_check_polynomial():
    x = leaf(1.5)
    report = grad_check(lambda: x.square(), [x], epsilon=1e-5)
    assert report.max_relative_error < 1e-6
    assert report.passed


def test_grad_check_reports_bad_rule():
    @register_primitive("wrong_double")
    def _wrong_double(a):
        return 2.0 * a, lambda g: (3.0 * g,)

    x = leaf([1.0, -1.0])
    try:
        report = grad_check(lambda: apply_primitive("wrong_double", [x]).sum(), [x])
    finally:
        del PRIMITIVES["wrong_double"]
    assert not report.passed
    assert report.max_relative_error == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert report.worst_param == 0
    assert len(report.failures) == 2


def _magnitudes(rng, shape, positive=False):
    values = rng.uniform(0.5, 2.0, size=shape)
    if positive:
        return values
    return values * rng.choice([-1.0, 1.0], size=shape)


# name -> (builder(params, weights) -> scalar loss, input shapes, all-positive inputs)
CASES = {
    "add": (lambda p, w: ((p[0] + p[1]) * w).sum(), [(2, 3), (3,)], False),
    "sub": (lambda p, w: ((p[0] - p[1]) * w).sum(), [(2, 3), (2, 1)], False),
    "mul": (lambda p, w: ((p[0] * p[1]) * w).sum(), [(2, 3), (2, 3)], False),
    "div": (lambda p, w: ((p[0] / p[1]) * w).sum(), [(2, 3), (3,)], True),
    "matmul": (lambda p, w: (matmul(p[0], p[1]) * w).sum(), [(2, 3), (3, 3)], True),
    "transpose": (lambda p, w: (p[0].T * w).sum(), [(3, 2)], False),
    "reduce_sum": (lambda p, w: (p[0].sum(axis=0) * w[0]).sum(), [(2, 3)], False),
    "reduce_mean": (lambda p, w: (p[0].mean(axis=1) * w[:, 0]).sum(), [(2, 3)], False),
    "exp": (lambda p, w: (p[0].exp() * w).sum(), [(2, 3)], False),
    "log": (lambda p, w: (p[0].log() * w).sum(), [(2, 3)], True),
    "tanh": (lambda p, w: (p[0].tanh() * w).sum(), [(2, 3)], False),
    "sigmoid": (lambda p, w: (p[0].sigmoid() * w).sum(), [(2, 3)], False),
    "square": (lambda p, w: (p[0].square() * w).sum(), [(2, 3)], False),
    "sqrt": (lambda p, w: (p[0].sqrt() * w).sum(), [(2, 3)], True),
    "negate": (lambda p, w: ((-p[0]) * w).sum(), [(2, 3)], False),
    "broadcast_add_row": (lambda p, w: (apply_primitive("broadcast_add_row", [p[0], p[1]]) * w).sum(),
                          [(2, 3), (3,)], False),
    "reshape": (lambda p, w: (p[0].reshape(2, 3) * w).sum(), [(3, 2)], False),
    "take": (lambda p, w: (p[0].take([2, 0, 2], axis=1) * w).sum(), [(2, 3)], False),
    "gather": (lambda p, w: (gather(p[0], np.array([[2, 0, 1], [1, 1, 0]])) * w.T).sum(), [(2, 3)], False),
    "clamp": (lambda p, w: (p[0].clamp(-1.25, 1.25) * w).sum(), [(2, 3)], False),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_primitive_matches_finite_differences(name):
    build, shapes, positive = CASES[name]
    rng = np.random.default_rng(sorted(CASES).index(name))
    for _ in range(100):
        params = [leaf(_magnitudes(rng, s, positive), f"p{i}") for i, s in enumerate(shapes)]
        weights = rng.uniform(0.5, 2.0, size=(2, 3))
        report = grad_check(lambda: build(params, weights), params, epsilon=1e-6, tolerance=1e-5)
        assert report.passed, f"{name}: relative error {report.max_relative_error:.3e}"


def test_gather_rows_follow_index():
    mu = Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    out = gather(mu, np.array([[0, 2], [2, 0]]))
    assert out.value.tolist() == [[1.0, 6.0], [3.0, 4.0]]


def test_item_requires_single_element():
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()
    assert Tensor([[math.pi]]).item() == math.pi
