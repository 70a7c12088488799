"""Minimal reverse-mode automatic differentiation on double-precision numpy arrays.

Every operation records its inputs and a backward closure on the output
tensor; calling ``backward()`` on a scalar walks the recorded graph once in
reverse topological order and accumulates gradients additively into the
leaves that require them. Execution is single-threaded and deterministic:
parents are kept as ordered tuples, never sets.
"""

from __future__ import annotations

import contextlib

import numpy as np


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf."""


class ShapeError(ValueError):
    """Operand shapes are invalid for the requested operation."""


_grad_enabled = True
_kink_margins: list | None = None


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def track_kink_margins():
    """Record how close relu/clamp inputs come to their kinks.

    Central finite differences are only meaningful at points where the
    function is smooth within the step; the recorded margins let callers
    verify that before differencing.
    """
    global _kink_margins
    prev = _kink_margins
    margins: list = []
    _kink_margins = margins
    try:
        yield margins
    finally:
        _kink_margins = prev


def _note_kink_margin(distance: np.ndarray):
    if _kink_margins is not None and distance.size:
        _kink_margins.append(float(distance.min()))


def _check_finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    return data


def _reduce_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Undo numpy broadcasting: sum grad down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """N-dimensional float64 array, optionally tracked by the autodiff tape."""

    __slots__ = ("data", "requires_grad", "_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, "tensor construction")
        self.requires_grad = requires_grad
        self._grad = None
        self._parents = ()
        self._backward_fn = None

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def grad(self) -> np.ndarray | None:
        if not self.requires_grad:
            raise RuntimeError("queried grad of a tensor that does not require grad")
        return self._grad

    def zero_grad(self):
        self._grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray):
        if self._grad is None:
            # backward closures hand over freshly computed arrays; only views
            # (e.g. broadcast results) need defensive copies
            if grad.base is not None or not grad.flags.writeable:
                grad = grad.copy()
            self._grad = grad
        else:
            self._grad = self._grad + grad

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward_fn, op: str,
              check: bool = True) -> "Tensor":
        # pure data-movement ops pass check=False: their inputs were already
        # verified finite and no arithmetic happens
        if check:
            _check_finite(data, op)
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.requires_grad = track
        out._grad = None
        out._parents = parents if track else ()
        out._backward_fn = backward_fn if track else None
        return out

    # -- backward ---------------------------------------------------------

    def backward(self):
        """Reverse-mode sweep from a scalar loss.

        Visits each recorded node exactly once, in reverse topological
        order, and accumulates gradients additively into every
        requires_grad leaf below it.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor detached from any differentiable graph")

        # Iterative DFS; parents are ordered tuples so the walk is deterministic.
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))

        self._grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node._grad)

    # -- primitives -------------------------------------------------------

    def _binary_shapes(self, other, op):
        try:
            np.broadcast_shapes(self.data.shape, other.data.shape)
        except ValueError:
            raise ShapeError(
                f"{op}: incompatible shapes {self.data.shape} and {other.data.shape}"
            ) from None

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        self._binary_shapes(other, "add")
        a, b = self, other

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(g, b.data.shape))

        return Tensor._make(self.data + other.data, (a, b), backward_fn, "add")

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(-g)

        return Tensor._make(-self.data, (a,), backward_fn, "neg", check=False)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        self._binary_shapes(other, "mul")
        a, b = self, other

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(g * a.data, b.data.shape))

        return Tensor._make(self.data * other.data, (a, b), backward_fn, "mul")

    __rmul__ = __mul__

    def matmul(self, other: "Tensor") -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2 or self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(
                f"matmul: incompatible shapes {self.data.shape} and {other.data.shape}"
            )
        a, b = self, other

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)

        return Tensor._make(self.data @ other.data, (a, b), backward_fn, "matmul")

    __matmul__ = matmul

    def relu(self) -> "Tensor":
        a = self
        mask = self.data > 0
        _note_kink_margin(np.abs(self.data))

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g * mask)

        return Tensor._make(np.where(mask, self.data, 0.0), (a,), backward_fn, "relu", check=False)

    def sin(self) -> "Tensor":
        a = self

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g * np.cos(a.data))

        return Tensor._make(np.sin(self.data), (a,), backward_fn, "sin")

    def exp(self) -> "Tensor":
        a = self
        out_data = np.exp(self.data)

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g * out_data)

        return Tensor._make(out_data, (a,), backward_fn, "exp")

    def sqrt(self) -> "Tensor":
        a = self
        with np.errstate(invalid="ignore"):
            out_data = np.sqrt(self.data)

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g * (0.5 / out_data))

        return Tensor._make(_check_finite(out_data, "sqrt"), (a,), backward_fn, "sqrt")

    def clamp(self, lo: float, hi: float) -> "Tensor":
        a = self
        mask = (self.data >= lo) & (self.data <= hi)
        _note_kink_margin(np.minimum(np.abs(self.data - lo), np.abs(self.data - hi)))

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g * mask)

        return Tensor._make(np.clip(self.data, lo, hi), (a,), backward_fn, "clamp", check=False)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old_shape = self.data.shape

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g.reshape(old_shape))

        return Tensor._make(self.data.reshape(shape), (a,), backward_fn, "reshape", check=False)

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ShapeError(f"transpose: expected 2-d tensor, got shape {self.data.shape}")
        a = self

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(g.T)

        return Tensor._make(self.data.T.copy(), (a,), backward_fn, "transpose", check=False)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def sum(self) -> "Tensor":
        a = self

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(np.broadcast_to(g, a.data.shape))

        return Tensor._make(np.asarray(self.data.sum()), (a,), backward_fn, "sum")

    def mean(self) -> "Tensor":
        a = self
        n = self.data.size

        def backward_fn(g):
            if a.requires_grad:
                a._accumulate(np.broadcast_to(g / n, a.data.shape))

        return Tensor._make(np.asarray(self.data.mean()), (a,), backward_fn, "mean")

    def take_columns(self, idx: np.ndarray) -> "Tensor":
        """Gather columns of a (R, N) tensor at integer indices -> (R, len(idx))."""
        if self.data.ndim != 2:
            raise ShapeError(f"take_columns: expected 2-d tensor, got shape {self.data.shape}")
        idx = np.asarray(idx, dtype=np.intp)
        a = self

        def backward_fn(g):
            if a.requires_grad:
                acc = np.zeros_like(a.data)
                np.add.at(acc, (slice(None), idx), g)
                a._accumulate(acc)

        return Tensor._make(self.data[:, idx], (a,), backward_fn, "take_columns", check=False)

    def unfold3x3(self) -> "Tensor":
        """Stack the 3x3 neighborhood of a (C, H, W) map into (9C, H, W).

        Block n holds the neighbor at raster offset n (top-left to
        bottom-right); out-of-border neighbors are zero.
        """
        if self.data.ndim != 3:
            raise ShapeError(f"unfold3x3: expected (C, H, W) tensor, got shape {self.data.shape}")
        c, h, w = self.data.shape
        padded = np.zeros((c, h + 2, w + 2))
        padded[:, 1:-1, 1:-1] = self.data
        out = np.empty((9, c, h, w))
        for n in range(9):
            dy, dx = n // 3 - 1, n % 3 - 1
            np.copyto(out[n], padded[:, 1 + dy:1 + dy + h, 1 + dx:1 + dx + w])
        a = self

        def backward_fn(g):
            if a.requires_grad:
                g = g.reshape(9, c, h, w)
                gpad = np.zeros((c, h + 2, w + 2))
                for n in range(9):
                    dy, dx = n // 3 - 1, n % 3 - 1
                    gpad[:, 1 + dy:1 + dy + h, 1 + dx:1 + dx + w] += g[n]
                a._accumulate(gpad[:, 1:-1, 1:-1].copy())

        return Tensor._make(out.reshape(9 * c, h, w), (a,), backward_fn, "unfold3x3",
                            check=False)


def concat(tensors: list, axis: int = -1) -> Tensor:
    """Concatenate tensors along an axis, splitting the gradient back."""
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty tensor list")
    nd = tensors[0].data.ndim
    axis = axis % nd if nd else 0
    for t in tensors[1:]:
        a, b = list(tensors[0].data.shape), list(t.data.shape)
        a[axis] = b[axis] = 0
        if a != b:
            raise ShapeError(
                f"concat: incompatible shapes {tensors[0].data.shape} and {t.data.shape}"
            )
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(piece)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tuple(tensors), backward_fn, "concat", check=False)


def finite_difference_check(fn, x: Tensor, eps: float = 1e-5) -> float:
    """Compare analytic gradients of a scalar-valued fn against central differences.

    Returns the max over components of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = fn(probe)
    if out.data.size != 1:
        raise ShapeError(f"finite_difference_check: fn returned shape {out.data.shape}")
    _check_finite(out.data, "finite_difference_check fn")
    out.backward()
    analytic = probe.grad
    if analytic is None:
        analytic = np.zeros_like(probe.data)

    numeric = np.zeros_like(probe.data)
    flat = probe.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = fn(probe).item()
            flat[i] = orig - eps
            f_minus = fn(probe).item()
            flat[i] = orig
            num_flat[i] = (f_plus - f_minus) / (2.0 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))
