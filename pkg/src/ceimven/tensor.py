"""Dense float32 tensors with reverse-mode automatic differentiation.

Values are stored row-major in numpy arrays. Default storage is float32;
reductions and matrix products accumulate in float64 before casting back.
`grad_check` promotes its input to float64 so the central-difference
oracle is not drowned by single-precision rounding.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import ShapeError

DEFAULT_DTYPE = np.float32


def _validate_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ValueError(f"non-positive dimension in shape {shape}")
    return shape


class Tensor:
    """N-dimensional array plus an optional reverse-mode gradient buffer.

    A tensor produced by an op on gradient-requiring inputs carries a
    backward closure and links to its parents; `backward()` walks that
    graph. Data is immutable by convention once the tensor enters a
    graph; only `grad` buffers (and optimizer-owned parameters between
    steps) are mutated.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._parents: tuple[Tensor, ...] = ()

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- gradient bookkeeping -------------------------------------------

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate_grad(self, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=self.data.dtype)
        if g.shape != self.data.shape:
            g = g.reshape(self.data.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Propagate d(self)/d(leaf) into every reachable `grad` buffer.

        Requires a scalar produced through taped ops. Repeated calls
        accumulate; call `zero_grad` on leaves between steps to reset.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise RuntimeError("loss tensor was created outside the tape (requires_grad is False)")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        # seed and per-node upstream buffers, keyed by identity
        upstream: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = upstream.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate_grad(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in upstream:
                    upstream[key] = upstream[key] + pg
                else:
                    upstream[key] = np.asarray(pg)

    # -- operators -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, shape)

    def transpose2d(self) -> "Tensor":
        return transpose2d(self)

    def sum(self) -> "Tensor":
        return tsum(self)

    def mean(self) -> "Tensor":
        return tmean(self)


# -- construction ---------------------------------------------------------


def zeros(shape: Sequence[int], requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(_validate_shape(shape), dtype=DEFAULT_DTYPE), requires_grad, name)


def ones(shape: Sequence[int], requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    return Tensor(np.ones(_validate_shape(shape), dtype=DEFAULT_DTYPE), requires_grad, name)


def constant(shape: Sequence[int], value: float, requires_grad: bool = False,
             name: Optional[str] = None) -> Tensor:
    return Tensor(np.full(_validate_shape(shape), value, dtype=DEFAULT_DTYPE), requires_grad, name)


def uniform(shape: Sequence[int], lo: float, hi: float, seed: int,
            requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    shape = _validate_shape(shape)
    rng = np.random.default_rng(seed)
    data = rng.uniform(lo, hi, size=shape).astype(DEFAULT_DTYPE)
    return Tensor(data, requires_grad, name)


def kaiming(shape: Sequence[int], fan_in: int, seed: int,
            requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    """Normal init with std sqrt(2/fan_in) for rectifier networks."""
    shape = _validate_shape(shape)
    if fan_in < 1:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    rng = np.random.default_rng(seed)
    std = np.sqrt(2.0 / fan_in)
    data = (rng.standard_normal(size=shape) * std).astype(DEFAULT_DTYPE)
    return Tensor(data, requires_grad, name)


def from_array(data, shape: Optional[Sequence[int]] = None,
               requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    """Wrap explicit values; validates length against `shape` when given."""
    arr = np.asarray(data, dtype=DEFAULT_DTYPE)
    if shape is not None:
        shape = _validate_shape(shape)
        if arr.size != int(np.prod(shape)):
            raise ShapeError(f"explicit data has {arr.size} elements, shape {shape} needs "
                             f"{int(np.prod(shape))}")
        arr = arr.reshape(shape)
    return Tensor(arr, requires_grad, name)


# -- op plumbing ----------------------------------------------------------


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result_dtype(*tensors: Tensor):
    return np.result_type(*(t.data.dtype for t in tensors))


def _from_op(data: np.ndarray, parents: Iterable[Tensor],
             backward: Callable[[np.ndarray], list[tuple[Tensor, np.ndarray]]]) -> Tensor:
    parents = tuple(parents)
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gs, ts) in enumerate(zip(g.shape, shape)):
        if ts == 1 and gs != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise and linear ops --------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "add")
    out = a.data + b.data

    def backward(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))]

    return _from_op(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "sub")
    out = a.data - b.data

    def backward(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))]

    return _from_op(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "mul")
    out = a.data * b.data

    def backward(g):
        return [(a, _unbroadcast(g * b.data, a.shape)),
                (b, _unbroadcast(g * a.data, b.shape))]

    return _from_op(out, (a, b), backward)


def scalar_mul(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    out = a.data * c

    def backward(g):
        return [(a, g * c)]

    return _from_op(out, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform to [m,k]x[k,n]")
    dtype = _result_dtype(a, b)
    out = (a.data.astype(np.float64) @ b.data.astype(np.float64)).astype(dtype)

    def backward(g):
        g64 = g.astype(np.float64)
        ga = (g64 @ b.data.astype(np.float64).T).astype(a.data.dtype)
        gb = (a.data.astype(np.float64).T @ g64).astype(b.data.dtype)
        return [(a, ga), (b, gb)]

    return _from_op(out, (a, b), backward)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}")
    out = a.data.reshape(shape)

    def backward(g):
        return [(a, g.reshape(a.shape))]

    return _from_op(out, (a,), backward)


def transpose2d(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose2d: expected a 2-d tensor, got shape {a.shape}")
    out = a.data.T.copy()

    def backward(g):
        return [(a, g.T)]

    return _from_op(out, (a,), backward)


def tsum(a) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(np.sum(a.data, dtype=np.float64), dtype=a.data.dtype)

    def backward(g):
        return [(a, np.broadcast_to(g, a.shape))]

    return _from_op(out, (a,), backward)


def tmean(a) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(np.mean(a.data, dtype=np.float64), dtype=a.data.dtype)
    n = a.data.size

    def backward(g):
        return [(a, np.broadcast_to(g / n, a.shape))]

    return _from_op(out, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    out = np.log(a.data)

    def backward(g):
        return [(a, g / a.data)]

    return _from_op(out, (a,), backward)


# -- gradient checking ------------------------------------------------------


def grad_check(fn: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3) -> float:
    """Max relative error between the taped gradient of `fn` and central
    finite differences, with forward passes run in float64.

    `fn` must be deterministic and return a scalar tensor. Error per
    element is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    base = x.data.astype(np.float64)

    probe = Tensor(base.copy(), requires_grad=True)
    out = fn(probe)
    if out.data.size != 1:
        raise ShapeError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    out.backward()
    analytic = probe.grad.reshape(-1).astype(np.float64)

    def value_at(arr: np.ndarray) -> float:
        return float(fn(Tensor(arr)).data.reshape(-1)[0])

    numeric = np.zeros(base.size, dtype=np.float64)
    flat = base.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = value_at(base)
        flat[i] = orig - eps
        down = value_at(base)
        flat[i] = orig
        numeric[i] = (up - down) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
