"""Minimal dense-tensor arithmetic with reverse-mode differentiation.

A `Tape` records every primitive applied while it is active; `Tape.backward`
replays the records in exact reverse order, so gradients are deterministic
and bit-for-bit repeatable for a fixed tape. The op set is deliberately
small: matrix product, elementwise arithmetic, reductions, a couple of
structural ops, and a gradient-reversal node whose forward pass is the
identity and whose backward pass flips (and scales) the incoming gradient.

All buffers are 64-bit floats in row-major order. Broadcasting is limited
to scalar-vs-tensor; anything richer is out of scope.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    EmptyInputError,
    NumericError,
    ShapeError,
    StateError,
)

# Clamp bounds applied to probabilities before log inside losses; keeps
# log finite at saturated sigmoid outputs.
PROB_EPS = 1e-12

_ACTIVE_TAPE: "Tape | None" = None
_TAPE_COUNTER = 0


class Tensor:
    """Dense float64 array, optionally bound to the active gradient tape.

    A Tensor participates in at most one tape at a time; re-using it under
    a fresh tape re-registers it as a leaf of that tape. Values must be
    treated as immutable once recorded on a tape (the optimizer replaces
    `.data` with a new buffer instead of writing in place).
    """

    __slots__ = ("data", "node_id", "_tape_id")

    def __init__(self, data):
        if isinstance(data, np.ndarray) and data.dtype == np.float64 \
                and data.flags["C_CONTIGUOUS"]:
            self.data = data
        else:
            self.data = np.array(data, dtype=np.float64, order="C")
        self.node_id: int | None = None
        self._tape_id: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __float__(self) -> float:
        return self.item()

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("tensor/tensor division is not a primitive; "
                             "multiply by a reciprocal instead")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return pow_scalar(self, exponent)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)

    def sum(self, axis: int | None = None):
        return reduce_sum(self, axis)

    def mean(self, axis: int | None = None):
        return reduce_mean(self, axis)

    def reshape(self, shape):
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Tape:
    """Ordered record of primitive operations for one forward pass.

    Usage::

        with Tape() as tape:
            loss = ...            # ops executed here are recorded
        grads = tape.backward(loss)

    Recording order is a topological order by construction (an op's inputs
    exist before the op runs), so the backward pass simply walks the node
    list in reverse. Single-threaded; nesting tapes is an error.
    """

    def __init__(self):
        global _TAPE_COUNTER
        _TAPE_COUNTER += 1
        self._id = _TAPE_COUNTER
        # each node: (output_id, backward_fn); backward_fn maps the output
        # adjoint to ((input_id, adjoint_contribution), ...)
        self._nodes: list[tuple[int, Callable]] = []
        self._leaf_shapes: dict[int, tuple[int, ...]] = {}
        self._next_id = 0

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise StateError("a gradient tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def _bind(self, t: Tensor) -> int:
        """Return t's node id on this tape, registering it as a leaf if new."""
        if t._tape_id == self._id and t.node_id is not None:
            return t.node_id
        nid = self._next_id
        self._next_id += 1
        t.node_id = nid
        t._tape_id = self._id
        self._leaf_shapes[nid] = t.shape
        return nid

    def _record(self, out: Tensor, backward_fn: Callable) -> None:
        nid = self._next_id
        self._next_id += 1
        out.node_id = nid
        out._tape_id = self._id
        self._nodes.append((nid, backward_fn))

    def backward(self, loss: Tensor) -> "GradientMap":
        """Reverse-mode gradients of a scalar loss w.r.t. every leaf.

        Returns a map from leaf node-id to gradient Tensor; leaves the loss
        never touched map to zeros. Raises ShapeError for a non-scalar loss
        and StateError if the loss is not on this tape.
        """
        if loss.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape_id != self._id or loss.node_id is None:
            raise StateError("loss tensor is not recorded on this tape")

        adjoints: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for out_id, backward_fn in reversed(self._nodes):
            g = adjoints.get(out_id)
            if g is None:
                continue
            for input_id, contribution in backward_fn(g):
                acc = adjoints.get(input_id)
                if acc is None:
                    adjoints[input_id] = np.array(contribution, dtype=np.float64)
                else:
                    acc += contribution
        entries = {
            nid: Tensor(adjoints[nid]) if nid in adjoints else Tensor(np.zeros(shape))
            for nid, shape in self._leaf_shapes.items()
        }
        return GradientMap(self._id, entries)


class GradientMap(dict):
    """Map from leaf node-id to gradient Tensor, bound to one tape."""

    def __init__(self, tape_id: int, entries: dict[int, Tensor]):
        super().__init__(entries)
        self._tape_id = tape_id

    def for_param(self, t: Tensor) -> Tensor | None:
        """Gradient for a tensor, or None if it never joined the tape."""
        if t._tape_id != self._tape_id or t.node_id is None:
            return None
        return self.get(t.node_id)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{op} produced a non-finite value")
    return arr


# ----------------------------------------------------------------------
# elementwise primitives
# ----------------------------------------------------------------------

def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    if a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are neither equal "
                     "nor scalar-broadcastable")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Collapse a broadcast gradient back onto a (possibly scalar) operand."""
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum(), dtype=np.float64)


def _binary(a, b, op_name, forward, grad_a, grad_b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    _binary_shapes(a, b, op_name)
    out = Tensor(forward(a.data, b.data))
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)
        ib = tape._bind(b)
        ad, bd = a.data, b.data
        a_shape, b_shape = a.shape, b.shape

        def backward(g):
            return (
                (ia, _reduce_to(grad_a(g, ad, bd), a_shape)),
                (ib, _reduce_to(grad_b(g, ad, bd), b_shape)),
            )

        tape._record(out, backward)
    return out


def add(a, b) -> Tensor:
    return _binary(a, b, "add", lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, "sub", lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, "mul", lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def _unary(a, op_name, forward, grad, check_finite=False) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out_data = forward(a.data)
    if check_finite:
        _check_finite(out_data, op_name)
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)
        ad = a.data
        od = out.data

        def backward(g):
            return ((ia, grad(g, ad, od)),)

        tape._record(out, backward)
    return out


def neg(a) -> Tensor:
    return _unary(a, "neg", lambda x: -x, lambda g, x, o: -g)


def exp(a) -> Tensor:
    return _unary(a, "exp", np.exp, lambda g, x, o: g * o, check_finite=True)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log of a value <= 0")
    return _unary(a, "log", np.log, lambda g, x, o: g / x, check_finite=True)


def sigmoid(a) -> Tensor:
    def fwd(x):
        # split form avoids overflow in exp for large |x|
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    return _unary(a, "sigmoid", fwd, lambda g, x, o: g * o * (1.0 - o))


def relu(a) -> Tensor:
    return _unary(a, "relu", lambda x: np.maximum(x, 0.0),
                  lambda g, x, o: g * (x > 0.0))


def tanh(a) -> Tensor:
    return _unary(a, "tanh", np.tanh, lambda g, x, o: g * (1.0 - o * o))


def pow_scalar(a, exponent: float) -> Tensor:
    exponent = float(exponent)
    a = _as_tensor(a)
    if exponent != round(exponent) and np.any(a.data < 0.0):
        raise DomainError(f"negative base with fractional exponent {exponent}")
    return _unary(
        a, "pow",
        lambda x: np.power(x, exponent),
        lambda g, x, o: g * exponent * np.power(x, exponent - 1.0) if exponent != 0.0
        else np.zeros_like(x),
        check_finite=True,
    )


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only where the input was strictly inside."""
    return _unary(a, "clamp", lambda x: np.clip(x, lo, hi),
                  lambda g, x, o: g * ((x > lo) & (x < hi)))


def clamped_sqrt(a) -> Tensor:
    """sqrt(max(x, 0)) with subgradient 0 at and below the clamp."""

    def fwd(x):
        return np.sqrt(np.maximum(x, 0.0))

    def grad(g, x, o):
        safe = np.where(x > 0.0, x, 1.0)
        return g * np.where(x > 0.0, 0.5 / np.sqrt(safe), 0.0)

    return _unary(a, "clamped_sqrt", fwd, grad)


# ----------------------------------------------------------------------
# matrix and structural primitives
# ----------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = Tensor(a.data @ b.data)
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)
        ib = tape._bind(b)
        ad, bd = a.data, b.data

        def backward(g):
            return ((ia, g @ bd.T), (ib, ad.T @ g))

        tape._record(out, backward)
    return out


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got shape {a.shape}")
    out = Tensor(a.data.T)
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)

        def backward(g):
            return ((ia, g.T),)

        tape._record(out, backward)
    return out


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}")
    out = Tensor(a.data.reshape(shape))
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)
        orig = a.shape

        def backward(g):
            return ((ia, g.reshape(orig)),)

        tape._record(out, backward)
    return out


def _reduce(a, axis, op_name, forward, grad) -> Tensor:
    a = _as_tensor(a)
    if a.size == 0:
        raise EmptyInputError(f"{op_name} of an empty tensor")
    if axis is not None and not (-a.ndim <= axis < a.ndim):
        raise ShapeError(f"axis {axis} out of range for rank {a.ndim}")
    out = Tensor(forward(a.data, axis))
    tape = _ACTIVE_TAPE
    if tape is not None:
        ia = tape._bind(a)
        in_shape = a.shape

        def backward(g):
            return ((ia, grad(g, in_shape, axis)),)

        tape._record(out, backward)
    return out


def _spread(g: np.ndarray, shape: tuple[int, ...], axis: int | None) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).astype(np.float64)
    g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).astype(np.float64)


def reduce_sum(a, axis: int | None = None) -> Tensor:
    return _reduce(a, axis, "sum",
                   lambda x, ax: np.sum(x, axis=ax),
                   lambda g, shape, ax: _spread(g, shape, ax))


def reduce_mean(a, axis: int | None = None) -> Tensor:
    def grad(g, shape, ax):
        n = int(np.prod(shape)) if ax is None else shape[ax]
        return _spread(g, shape, ax) / n

    return _reduce(a, axis, "mean",
                   lambda x, ax: np.mean(x, axis=ax), grad)


def gradient_reverse(a, lam: float) -> Tensor:
    """Identity forward; backward multiplies the incoming gradient by -lam."""
    lam = float(lam)
    if lam <= 0.0:
        raise ConfigError(f"gradient reversal scale must be positive, got {lam}")
    if _ACTIVE_TAPE is None:
        raise StateError("gradient_reverse requires an active tape")
    a = _as_tensor(a)
    out = Tensor(a.data)
    tape = _ACTIVE_TAPE
    ia = tape._bind(a)

    def backward(g):
        return ((ia, -lam * g),)

    tape._record(out, backward)
    return out


# ----------------------------------------------------------------------
# optimizer
# ----------------------------------------------------------------------

def sgd_step(params: Sequence[Tensor], grads: Sequence[Tensor | None],
             learning_rate: float) -> Sequence[Tensor]:
    """In-place SGD update p <- p - lr * g.

    Parameters with a None gradient are left untouched. `.data` buffers are
    replaced, not mutated, so tensors already recorded on a tape keep the
    values the tape saw.
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params but {len(grads)} grads")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"param {i}: grad shape {g.shape} != param shape {p.shape}")
        if not np.isfinite(g.data).all():
            raise NumericError(f"non-finite gradient for parameter {i}; iteration aborted")
        p.data = p.data - learning_rate * g.data
    return params


def grads_for(gradient_map: "GradientMap", params: Iterable[Tensor]) -> list[Tensor | None]:
    """Align a backward() gradient map with a parameter list."""
    return [gradient_map.for_param(p) for p in params]
