"""Dense tensor math with reverse-mode automatic differentiation.

Small on purpose: the op set is exactly what a BERT-style encoder and its
embedding-alignment training need. Arrays are float32 by default; float64
is supported so gradients can be checked against central finite
differences. Every primitive validates that its output is finite, so NaN
or Inf surfaces at the op that produced it instead of three modules later.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "GradTape",
    "ShapeError",
    "NonFiniteError",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "softmax",
    "layer_norm",
    "gelu",
    "embedding",
    "reshape",
    "transpose",
    "tensor_sum",
    "tensor_mean",
    "rows_norm",
    "exp",
    "log",
    "backward",
    "gradcheck",
]


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class NonFiniteError(FloatingPointError):
    """A primitive produced NaN or Inf."""


_FLOAT_DTYPES = (np.float32, np.float64)


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced a non-finite value")


class Tensor:
    """Row-major dense float array, optionally tracked for gradients.

    ``requires_grad`` marks leaves the next ``backward`` should produce
    gradients for. Intermediates created under an active tape inherit the
    flag from their inputs.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float32):
        if dtype not in _FLOAT_DTYPES:
            raise TypeError("dtype must be float32 or float64")
        arr = np.asarray(data, dtype=dtype)
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item() requires a single-element tensor")
        return float(self.data.reshape(())[()])

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, dtype=dtype)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad, dtype=self.data.dtype.type)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


_ACTIVE_TAPE: "GradTape | None" = None


class GradTape:
    """Ordered record of primitive applications for one training step.

    Append order is a valid topological order because every output tensor
    is created after its inputs, so the backward pass simply walks the
    records in reverse. Gradients accumulate additively when a tensor
    feeds several operations.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a GradTape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None

    def __len__(self) -> int:
        return len(self._records)


def _record(out: Tensor, inputs: tuple, backward_fn) -> Tensor:
    """Attach ``out`` to the active tape when any Tensor input is tracked."""
    tape = _ACTIVE_TAPE
    if tape is None:
        return out
    tensor_inputs = tuple(t for t in inputs if isinstance(t, Tensor))
    if any(t.requires_grad for t in tensor_inputs):
        out.requires_grad = True
        tape._records.append((out, tensor_inputs, backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every requires_grad tensor reachable from ``loss``.

    ``loss`` must be a scalar produced under the currently active tape.
    The tape is cleared afterwards; ``.grad`` values are replaced, not
    accumulated across calls.
    """
    tape = _ACTIVE_TAPE
    if tape is None:
        raise RuntimeError("backward requires an active GradTape")
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    recorded_outputs = {id(out) for out, _, _ in tape._records}
    if id(loss) not in recorded_outputs:
        raise RuntimeError("loss was not produced under the active tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    by_id: dict[int, Tensor] = {id(loss): loss}
    for out, inputs, backward_fn in reversed(tape._records):
        gout = grads.pop(id(out), None)
        if gout is None:
            continue
        out.grad = gout
        for inp, ginp in zip(inputs, backward_fn(gout)):
            if ginp is None or not inp.requires_grad:
                continue
            key = id(inp)
            by_id[key] = inp
            if key in grads:
                grads[key] = grads[key] + ginp
            else:
                grads[key] = ginp
    for key, g in grads.items():
        by_id[key].grad = g
    tape._records.clear()


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary_check(a: Tensor, b: Tensor, op: str) -> None:
    if a.dtype != b.dtype:
        raise TypeError(f"{op}: mixed dtypes {a.dtype} and {b.dtype}")
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; broadcasting limited to bias-add style alignment."""
    _binary_check(a, b, "add")
    out = Tensor(a.data + b.data, dtype=a.dtype.type)
    _check_finite(out.data, "add")

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "sub")
    out = Tensor(a.data - b.data, dtype=a.dtype.type)
    _check_finite(out.data, "sub")

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "mul")
    out = Tensor(a.data * b.data, dtype=a.dtype.type)
    _check_finite(out.data, "mul")

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), bwd)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    out = Tensor(x.data * c, dtype=x.dtype.type)
    _check_finite(out.data, "scale")

    def bwd(g):
        return (g * c,)

    return _record(out, (x,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.

    Supports ``[..., m, k] @ [k, n]`` (shared projection) and batched
    ``[..., m, k] @ [..., k, n]`` with identical leading dimensions. No
    leading-dimension broadcasting.
    """
    if a.dtype != b.dtype:
        raise TypeError(f"matmul: mixed dtypes {a.dtype} and {b.dtype}")
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: leading dimensions disagree, {a.shape} @ {b.shape}")
    out = Tensor(np.matmul(a.data, b.data), dtype=a.dtype.type)
    _check_finite(out.data, "matmul")

    if b.ndim == 2:

        def bwd(g):
            ga = np.matmul(g, b.data.T)
            k = a.shape[-1]
            gb = np.matmul(a.data.reshape(-1, k).T, g.reshape(-1, b.shape[-1]))
            return ga, gb

    else:

        def bwd(g):
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            return ga, gb

    return _record(out, (a, b), bwd)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max subtraction before exponentiation)."""
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax: axis {axis} out of bounds for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p, dtype=x.dtype.type)
    _check_finite(out.data, "softmax")

    def bwd(g):
        dot = (g * p).sum(axis=axis, keepdims=True)
        return (p * (g - dot),)

    return _record(out, (x,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma/beta must have shape ({d},), got {gamma.shape} and {beta.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(xhat * gamma.data + beta.data, dtype=x.dtype.type)
    _check_finite(out.data, "layer_norm")

    def bwd(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv_std * (dxhat - m1 - xhat * m2)
        axes = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        return gx, ggamma, gbeta

    return _record(out, (x, gamma, beta), bwd)


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact-erf GELU, x * Phi(x), not the tanh approximation."""
    phi = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = Tensor(x.data * phi, dtype=x.dtype.type)
    _check_finite(out.data, "gelu")

    def bwd(g):
        density = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
        return (g * (phi + x.data * density),)

    return _record(out, (x,), bwd)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table``; gradients scatter-add back into it."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range for table of {table.shape[0]} rows")
    out = Tensor(table.data[ids], dtype=table.dtype.type)

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _record(out, (table,), bwd)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape), dtype=x.dtype.type)

    def bwd(g):
        return (g.reshape(x.shape),)

    return _record(out, (x,), bwd)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.transpose(axes), dtype=x.dtype.type)
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        return (g.transpose(inverse),)

    return _record(out, (x,), bwd)


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), dtype=x.dtype.type)
    _check_finite(out.data, "sum")

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _record(out, (x,), bwd)


def tensor_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims), dtype=x.dtype.type)
    _check_finite(out.data, "mean")

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / count, x.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _record(out, (x,), bwd)


def rows_norm(x: Tensor) -> Tensor:
    """Euclidean norm of each row of a 2-D tensor.

    The value at a zero row is exactly 0; its backward uses the
    subgradient 0 (denominator clamped) so training never divides by zero.
    """
    if x.ndim != 2:
        raise ShapeError(f"rows_norm expects a 2-D tensor, got shape {x.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1))
    out = Tensor(norms, dtype=x.dtype.type)
    _check_finite(out.data, "rows_norm")

    def bwd(g):
        tiny = np.finfo(x.data.dtype).tiny
        denom = np.maximum(norms, tiny)
        return (g[:, None] * x.data / denom[:, None],)

    return _record(out, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data), dtype=x.dtype.type)
    _check_finite(out.data, "exp")

    def bwd(g):
        return (g * out.data,)

    return _record(out, (x,), bwd)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="raise", invalid="raise"):
        try:
            data = np.log(x.data)
        except FloatingPointError as e:
            raise NonFiniteError("log of a non-positive value") from e
    out = Tensor(data, dtype=x.dtype.type)

    def bwd(g):
        return (g / x.data,)

    return _record(out, (x,), bwd)


def gradcheck(
    fn,
    tensors: list[Tensor],
    h: float = 1e-5,
    rtol: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Compare tape gradients of ``fn(tensors)`` against central differences.

    ``fn`` must build a scalar loss from the given float64 tensors using
    ops from this module only. The finite-difference side never touches
    the tape, so it is an independent oracle for the backward formulas.
    When ``max_coords`` is set, that many coordinates per tensor are
    sampled instead of sweeping all of them. Relative error uses
    ``|a - n| / max(|a|, |n|, 1e-3)``; returns the max over checked
    coordinates and raises AssertionError if it reaches ``rtol``.
    """
    for t in tensors:
        if t.dtype != np.float64:
            raise TypeError("gradcheck requires float64 tensors")
        t.requires_grad = True

    with GradTape():
        loss = fn(tensors)
        backward(loss)
    analytic = [t.grad.copy() for t in tensors]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for ti, t in enumerate(tensors):
        flat = t.data.reshape(-1)
        n_coords = flat.size
        if max_coords is not None and n_coords > max_coords:
            coords = rng.choice(n_coords, size=max_coords, replace=False)
        else:
            coords = np.arange(n_coords)
        for ci in coords:
            orig = flat[ci]
            flat[ci] = orig + h
            up = fn(tensors).item()
            flat[ci] = orig - h
            down = fn(tensors).item()
            flat[ci] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[ti].reshape(-1)[ci]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
            worst = max(worst, err)
            if err >= rtol:
                raise AssertionError(
                    f"gradient mismatch at tensor {ti} coord {ci}: "
                    f"analytic {a:.10g} vs numeric {numeric:.10g} (rel err {err:.3g})"
                )
    return worst
