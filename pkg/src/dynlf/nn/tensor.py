"""Tensors and the reverse-mode tape.

Operations only record themselves while a :class:`Tape` is active and at least
one input requires a gradient; outside a tape every op is a plain numpy call.

    with Tape() as tape:
        loss = ops.l1_mean(model(x), y)
    grads = tape.backward(loss)
"""
from __future__ import annotations

import numpy as np

_active: list["Tape"] = []
_debug = False


def set_debug(flag: bool) -> None:
    """When on, every recorded op checks its output for NaN/Inf."""
    global _debug
    _debug = bool(flag)


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64) if not isinstance(data, np.ndarray) \
            or data.dtype.kind != "f" else data
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar, defined in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __getitem__(self, key):
        from . import ops
        return ops.getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def current_tape() -> "Tape | None":
    return _active[-1] if _active else None


class Tape:
    """Ordered record of differentiable ops.

    Records are appended as ops run, so the list is already topologically
    sorted; :meth:`backward` walks it once in reverse.
    """

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. every tensor on the tape.

        Leaf tensors with ``requires_grad`` also get ``.grad`` set.
        """
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for out, inputs, rule in reversed(self.records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            in_grads = rule(g)
            for x, gx in zip(inputs, in_grads):
                if gx is None or not x.requires_grad:
                    continue
                key = id(x)
                if key in grads:
                    grads[key] = grads[key] + gx
                else:
                    grads[key] = gx
                leaves.setdefault(key, x)
        result = {}
        for key, x in leaves.items():
            if key in grads:
                x.grad = grads[key]
                result[x] = grads[key]
        return result


def record(data: np.ndarray, inputs: tuple[Tensor, ...], rule) -> Tensor:
    """Wrap an op result, recording ``rule`` (grad_out -> grads_in) when needed."""
    tape = current_tape()
    needs = tape is not None and any(x.requires_grad for x in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        if _debug and not np.all(np.isfinite(data)):
            raise NonFiniteError(f"non-finite values after op {getattr(rule, '__qualname__', rule)}")
        tape.records.append((out, inputs, rule))
    return out
