"""
Minimal reverse-mode automatic differentiation over dense float64 arrays

Every numeric quantity of a model (observations, latent means, network
weights, length scales) is a Tensor. Operations go through a fixed registry
of primitives; each primitive returns its forward value together with a
vector-Jacobian rule, and results that depend on a trainable leaf keep a
reference to their parents. The graph is rebuilt on every training step.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from core.exceptions import DomainError, IndexRangeError, ShapeError, UnmixError

Operand = Union["Tensor", float, int, np.ndarray]
BackwardRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

PRIMITIVES: Dict[str, Callable] = {}


def register_primitive(name: str):
    """Add a forward/backward rule to the primitive registry"""
    def decorator(fn):
        if name in PRIMITIVES:
            raise UnmixError(f"Primitive already registered: {name}")
        PRIMITIVES[name] = fn
        return fn
    return decorator


class Tensor:
    """Dense float64 array participating in a differentiation graph"""

    __slots__ = ("value", "requires_grad", "grad", "name", "op", "parents", "_backward")
    __array_priority__ = 1000

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        self.value = np.array(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        # graph node fields, set by apply_primitive
        self.op = ""
        self.parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardRule] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def detach(self) -> "Tensor":
        """Constant copy cut from the graph"""
        return Tensor(self.value)

    def __repr__(self):
        label = f"{self.name}: " if self.name else ""
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator overloads
    def __add__(self, other): return apply_primitive("add", [self, other])
    def __radd__(self, other): return apply_primitive("add", [other, self])
    def __sub__(self, other): return apply_primitive("sub", [self, other])
    def __rsub__(self, other): return apply_primitive("sub", [other, self])
    def __mul__(self, other): return apply_primitive("mul", [self, other])
    def __rmul__(self, other): return apply_primitive("mul", [other, self])
    def __truediv__(self, other): return apply_primitive("div", [self, other])
    def __rtruediv__(self, other): return apply_primitive("div", [other, self])
    def __matmul__(self, other): return apply_primitive("matmul", [self, other])
    def __rmatmul__(self, other): return apply_primitive("matmul", [other, self])
    def __neg__(self): return apply_primitive("negate", [self])

    @property
    def T(self) -> "Tensor":
        return apply_primitive("transpose", [self])

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        return apply_primitive("reduce_sum", [self], axis=axis)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        return apply_primitive("reduce_mean", [self], axis=axis)

    def exp(self) -> "Tensor": return apply_primitive("exp", [self])
    def log(self) -> "Tensor": return apply_primitive("log", [self])
    def tanh(self) -> "Tensor": return apply_primitive("tanh", [self])
    def sigmoid(self) -> "Tensor": return apply_primitive("sigmoid", [self])
    def square(self) -> "Tensor": return apply_primitive("square", [self])
    def sqrt(self) -> "Tensor": return apply_primitive("sqrt", [self])

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return apply_primitive("reshape", [self], shape=tuple(shape))

    def take(self, indices, axis: int = 0) -> "Tensor":
        return apply_primitive("take", [self], indices=indices, axis=axis)

    def clamp(self, low: float, high: float) -> "Tensor":
        return apply_primitive("clamp", [self], low=low, high=high)


def as_tensor(x: Operand) -> Tensor:
    """Wrap constants; tensors pass through untouched"""
    return x if isinstance(x, Tensor) else Tensor(x)


def apply_primitive(op: str, operands: Sequence[Operand], **attrs) -> Tensor:
    """Run a registered primitive and link the result into the graph"""
    try:
        rule = PRIMITIVES[op]
    except KeyError:
        raise UnmixError(f"Unknown primitive: {op}") from None

    tensors = [as_tensor(o) for o in operands]
    value, backward_rule = rule(*[t.value for t in tensors], **attrs)

    out = Tensor(value)
    out.op = op
    if any(t.requires_grad for t in tensors):
        out.requires_grad = True
        out.parents = tuple(tensors)
        out._backward = backward_rule
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Optional[Sequence[Tensor]] = None) -> Dict[Tensor, np.ndarray]:
    """
    Propagate d(loss)/d(node) through the graph.

    Every trainable leaf reachable from the loss gets its gradient written to
    `.grad`; leaves listed in `params` but unreachable get zeros. Returns a
    map from leaf to gradient.
    """
    if loss.shape not in ((), (1,)):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    order = _topological_order(loss)
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}

    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, parent_grad in zip(node.parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            # multiple consumers accumulate additively
            previous = grads.get(id(parent))
            grads[id(parent)] = parent_grad if previous is None else previous + parent_grad

    leaves = [node for node in order if node.is_leaf and node.requires_grad]
    if params is not None:
        leaves = list(params)

    gradient_map: Dict[Tensor, np.ndarray] = {}
    for leaf in leaves:
        g = grads.get(id(leaf))
        leaf.grad = np.zeros_like(leaf.value) if g is None else np.array(g, dtype=np.float64).reshape(leaf.shape)
        gradient_map[leaf] = leaf.grad
    return gradient_map


@dataclass
class GradCheckReport:
    """Analytic vs central finite-difference gradients"""

    max_relative_error: float
    worst_param: int
    worst_coordinate: Tuple[int, ...]
    tolerance: float
    failures: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def grad_check(fn: Callable[[], Tensor], params: Sequence[Tensor],
               epsilon: float = 1e-6, tolerance: float = 1e-4) -> GradCheckReport:
    """Compare backward() against (f(θ+ε) − f(θ−ε)) / 2ε for every coordinate"""
    if not 0.0 < epsilon <= 1e-2:
        raise DomainError(f"epsilon must lie in (0, 1e-2], got {epsilon}")

    analytic = backward(fn(), params)
    analytic = [analytic[p].copy() for p in params]

    max_err, worst_param, worst_coord = 0.0, -1, ()
    failures = []
    for p_idx, param in enumerate(params):
        for coord in np.ndindex(*param.shape):
            original = param.value[coord]
            param.value[coord] = original + epsilon
            f_plus = fn().item()
            param.value[coord] = original - epsilon
            f_minus = fn().item()
            param.value[coord] = original

            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            exact = analytic[p_idx][coord]
            err = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            if err > max_err or worst_param < 0:
                max_err, worst_param, worst_coord = err, p_idx, tuple(coord)
            if err > tolerance:
                failures.append((p_idx, tuple(coord)))

    return GradCheckReport(max_err, worst_param, worst_coord, tolerance, failures)


# ----------------------------------------------------------------------------
# Primitive rules: (operand values, attrs) -> (forward value, vjp)
# ----------------------------------------------------------------------------

def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


@register_primitive("add")
def _add(a, b):
    _broadcast_shape("add", a, b)
    return a + b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))


@register_primitive("sub")
def _sub(a, b):
    _broadcast_shape("sub", a, b)
    return a - b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))


@register_primitive("mul")
def _mul(a, b):
    _broadcast_shape("mul", a, b)
    return a * b, lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))


@register_primitive("div")
def _div(a, b):
    _broadcast_shape("div", a, b)
    if np.any(b == 0):
        raise DomainError("div: division by zero")
    value = a / b
    return value, lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * value / b, b.shape))


@register_primitive("matmul")
def _matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b, lambda g: (g @ b.T, a.T @ g)


@register_primitive("transpose")
def _transpose(a):
    return a.T.copy(), lambda g: (g.T,)


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis: Optional[int]) -> np.ndarray:
    if axis is not None:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


@register_primitive("reduce_sum")
def _reduce_sum(a, axis=None):
    return a.sum(axis=axis), lambda g: (_expand_reduced(g, a.shape, axis),)


@register_primitive("reduce_mean")
def _reduce_mean(a, axis=None):
    count = a.size if axis is None else a.shape[axis]
    return a.mean(axis=axis), lambda g: (_expand_reduced(g / count, a.shape, axis),)


@register_primitive("exp")
def _exp(a):
    value = np.exp(a)
    return value, lambda g: (g * value,)


@register_primitive("log")
def _log(a):
    if np.any(a <= 0):
        raise DomainError(f"log: non-positive input (min {a.min()})")
    return np.log(a), lambda g: (g / a,)


@register_primitive("tanh")
def _tanh(a):
    value = np.tanh(a)
    return value, lambda g: (g * (1.0 - value * value),)


@register_primitive("sigmoid")
def _sigmoid(a):
    value = expit(a)
    return value, lambda g: (g * value * (1.0 - value),)


@register_primitive("square")
def _square(a):
    return a * a, lambda g: (2.0 * g * a,)


@register_primitive("sqrt")
def _sqrt(a):
    if np.any(a <= 0):
        raise DomainError(f"sqrt: non-positive input (min {a.min()})")
    value = np.sqrt(a)
    return value, lambda g: (g / (2.0 * value),)


@register_primitive("negate")
def _negate(a):
    return -a, lambda g: (-g,)


@register_primitive("broadcast_add_row")
def _broadcast_add_row(a, row):
    if a.ndim != 2 or row.shape != (a.shape[1],):
        raise ShapeError(f"broadcast_add_row: incompatible shapes {a.shape} and {row.shape}")
    return a + row, lambda g: (g, g.sum(axis=0))


@register_primitive("reshape")
def _reshape(a, shape):
    try:
        value = a.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None
    return value, lambda g: (g.reshape(a.shape),)


@register_primitive("take")
def _take(a, indices, axis=0):
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    size = a.shape[axis]
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise IndexRangeError(f"take: indices outside [0, {size}) on axis {axis}")

    def vjp(g):
        ga = np.zeros_like(a)
        np.add.at(np.moveaxis(ga, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (ga,)

    return np.take(a, idx, axis=axis), vjp


@register_primitive("gather")
def _gather(a, index):
    """out[b, i] = a[i, index[i, b]] for a (n, T) and index (n, B)"""
    idx = np.asarray(index, dtype=np.int64)
    if a.ndim != 2 or idx.ndim != 2 or idx.shape[0] != a.shape[0]:
        raise ShapeError(f"gather: incompatible shapes {a.shape} and {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[1]):
        raise IndexRangeError(f"gather: indices outside [0, {a.shape[1]})")
    rows = np.broadcast_to(np.arange(a.shape[0])[:, None], idx.shape)

    def vjp(g):
        ga = np.zeros_like(a)
        np.add.at(ga, (rows, idx), g.T)
        return (ga,)

    return a[rows, idx].T.copy(), vjp


@register_primitive("clamp")
def _clamp(a, low, high):
    inside = (a >= low) & (a <= high)
    return np.clip(a, low, high), lambda g: (g * inside,)


# Functional aliases matching the primitive names
def matmul(a: Operand, b: Operand) -> Tensor:
    return apply_primitive("matmul", [a, b])


def broadcast_add_row(a: Operand, row: Operand) -> Tensor:
    return apply_primitive("broadcast_add_row", [a, row])


def gather(a: Operand, index) -> Tensor:
    return apply_primitive("gather", [a], index=index)
