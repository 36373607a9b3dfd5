"""Reverse-mode tape and second-order forward jets.

Two differentiation mechanisms cooperate here:

* ``Tape``/``Var`` — a reverse-mode computation graph over scalar values.
  Node values may be Python floats or numpy arrays of a common shape, in
  which case every operation is elementwise and the tape differentiates a
  whole batch of independent scalar graphs in one sweep. One reverse pass
  yields the partial of the root with respect to every marked leaf.

* ``Jet2`` — a (value, first, second directional derivative) triple
  propagated forward through elementwise operations by exact chain rules.
  Components may be floats, numpy arrays, or ``Var`` nodes; in the latter
  case the jet algebra is recorded on the tape, so a single reverse sweep
  afterwards differentiates an expression that itself contains input
  derivatives.

The supported primitive set is deliberately small: add, sub, mul, scale,
affine, square, tanh, sin, cos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericFault, UsageError

_JET_OPS = ("add", "sub", "mul", "scale", "tanh", "sin", "cos", "square", "affine")


def _is_finite(value) -> bool:
    if isinstance(value, np.ndarray):
        return bool(np.all(np.isfinite(value)))
    return math.isfinite(value)


@dataclass
class Node:
    """One recorded operation: value plus local partials to its parents."""

    op: str
    parents: tuple  # ((parent_id, local_partial), ...)
    value: object  # float or ndarray


class Tape:
    """Append-only record of a forward pass, replayed once in reverse.

    Single-owner: a tape must not be shared between concurrent workers.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.input_marks: list[int] = []
        self.last_sweep_visits = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, mark: bool = False) -> int:
        """Append a leaf (no parents). Marked leaves are differentiation targets."""
        nid = self.record("leaf", (), value, ())
        if mark:
            self.input_marks.append(nid)
        return nid

    def record(self, op: str, inputs: Sequence[int], value, partials: Sequence) -> int:
        """Append a node computing `value` from `inputs` with the given local partials."""
        nid = len(self.nodes)
        for i in inputs:
            if not 0 <= i < nid:
                raise UsageError(f"record: input id {i} is not on the tape")
        if not _is_finite(value):
            raise NumericFault(f"record: non-finite value in op '{op}'")
        for p in partials:
            if not _is_finite(p):
                raise NumericFault(f"record: non-finite partial in op '{op}'")
        self.nodes.append(Node(op, tuple(zip(inputs, partials)), value))
        return nid

    def value(self, nid: int):
        return self.nodes[nid].value

    def backward(self, root: int, seed=1.0) -> list:
        """Adjoints of every marked leaf with respect to the node `root`.

        A single reverse sweep touching each node at most once; with the
        default seed the result is d(root)/d(leaf) per marked leaf, in the
        order the leaves were marked.
        """
        if not 0 <= root < len(self.nodes):
            raise UsageError(f"backward: root id {root} is not on the tape")
        adjoint: list = [0.0] * (root + 1)
        adjoint[root] = seed
        visits = 0
        for nid in range(root, -1, -1):
            visits += 1
            a = adjoint[nid]
            if isinstance(a, float) and a == 0.0:
                continue
            for pid, partial in self.nodes[nid].parents:
                adjoint[pid] = adjoint[pid] + a * partial
        self.last_sweep_visits = visits
        return [adjoint[m] if m <= root else 0.0 for m in self.input_marks]


class Var:
    """Handle to a tape node with operator sugar for building graphs.

    Mixed operands (floats or ndarrays) are treated as constants: they do
    not create nodes and receive no adjoint.
    """

    __slots__ = ("tape", "id", "value")

    # Keep numpy from broadcasting over Var operands; binary ops with
    # ndarrays must resolve to the reflected methods below.
    __array_ufunc__ = None

    def __init__(self, tape: Tape, nid: int):
        self.tape = tape
        self.id = nid
        self.value = tape.value(nid)

    @classmethod
    def leaf(cls, tape: Tape, value, mark: bool = False) -> "Var":
        return cls(tape, tape.leaf(value, mark=mark))

    def _wrap(self, nid: int) -> "Var":
        return Var(self.tape, nid)

    def __add__(self, other):
        if isinstance(other, Var):
            nid = self.tape.record(
                "add", (self.id, other.id), self.value + other.value, (1.0, 1.0)
            )
        else:
            nid = self.tape.record("affine", (self.id,), self.value + other, (1.0,))
        return self._wrap(nid)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            nid = self.tape.record(
                "sub", (self.id, other.id), self.value - other.value, (1.0, -1.0)
            )
        else:
            nid = self.tape.record("affine", (self.id,), self.value - other, (1.0,))
        return self._wrap(nid)

    def __rsub__(self, other):
        nid = self.tape.record("affine", (self.id,), other - self.value, (-1.0,))
        return self._wrap(nid)

    def __mul__(self, other):
        if isinstance(other, Var):
            nid = self.tape.record(
                "mul",
                (self.id, other.id),
                self.value * other.value,
                (other.value, self.value),
            )
        else:
            nid = self.tape.record("scale", (self.id,), self.value * other, (other,))
        return self._wrap(nid)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def square(self) -> "Var":
        nid = self.tape.record(
            "square", (self.id,), self.value * self.value, (2.0 * self.value,)
        )
        return self._wrap(nid)

    def tanh(self) -> "Var":
        t = np.tanh(self.value)
        nid = self.tape.record("tanh", (self.id,), t, (1.0 - t * t,))
        return self._wrap(nid)

    def sin(self) -> "Var":
        nid = self.tape.record("sin", (self.id,), np.sin(self.value), (np.cos(self.value),))
        return self._wrap(nid)

    def cos(self) -> "Var":
        nid = self.tape.record("cos", (self.id,), np.cos(self.value), (-np.sin(self.value),))
        return self._wrap(nid)


# Elementwise helpers that accept Var, ndarray, or float components.


def _tanh(x):
    return x.tanh() if isinstance(x, Var) else np.tanh(x)


def _sin(x):
    return x.sin() if isinstance(x, Var) else np.sin(x)


def _cos(x):
    return x.cos() if isinstance(x, Var) else np.cos(x)


def _square(x):
    return x.square() if isinstance(x, Var) else x * x


@dataclass
class Jet2:
    """Value with first and second directional derivatives along one direction.

    The algebra below is the exact second-order chain rule; for g(f):
    d2 = g''(f.v) * f.d1**2 + g'(f.v) * f.d2.
    """

    v: object
    d1: object
    d2: object

    __array_ufunc__ = None  # ndarray <op> Jet2 must defer to the reflected ops

    @classmethod
    def constant(cls, value) -> "Jet2":
        return cls(value, 0.0, 0.0)

    @classmethod
    def seed(cls, value) -> "Jet2":
        """Coordinate jet: the identity direction (v, 1, 0)."""
        return cls(value, 1.0, 0.0)

    def __add__(self, other):
        o = other if isinstance(other, Jet2) else Jet2.constant(other)
        return Jet2(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = other if isinstance(other, Jet2) else Jet2.constant(other)
        return Jet2(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        o = other if isinstance(other, Jet2) else Jet2.constant(other)
        return o.__sub__(self)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(
                self.v * other.v,
                self.d1 * other.v + self.v * other.d1,
                self.d2 * other.v + 2.0 * (self.d1 * other.d1) + self.v * other.d2,
            )
        return self.scale(other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c) -> "Jet2":
        return Jet2(self.v * c, self.d1 * c, self.d2 * c)

    def affine(self, a, b) -> "Jet2":
        return Jet2(self.v * a + b, self.d1 * a, self.d2 * a)

    def square(self) -> "Jet2":
        return Jet2(
            _square(self.v),
            2.0 * (self.v * self.d1),
            2.0 * (self.d1 * self.d1) + 2.0 * (self.v * self.d2),
        )

    def tanh(self) -> "Jet2":
        s = _tanh(self.v)
        s1 = 1.0 - _square(s)  # tanh'
        s2 = -2.0 * (s * s1)  # tanh''
        return Jet2(s, s1 * self.d1, s2 * _square(self.d1) + s1 * self.d2)

    def sin(self) -> "Jet2":
        s, c = _sin(self.v), _cos(self.v)
        return Jet2(s, c * self.d1, -1.0 * (s * _square(self.d1)) + c * self.d2)

    def cos(self) -> "Jet2":
        s, c = _sin(self.v), _cos(self.v)
        return Jet2(c, -1.0 * (s * self.d1), -1.0 * (c * _square(self.d1)) - s * self.d2)


def jet_apply(op: str, inputs: Sequence) -> Jet2:
    """Apply a primitive operation to jets.

    `inputs` holds Jet2 operands; plain numbers are coerced to constant
    jets. For `scale` the second input is the constant factor; for
    `affine` the trailing two inputs are the constant (a, b) in a*x + b.
    """
    if op not in _JET_OPS:
        raise UsageError(f"jet_apply: unsupported op '{op}'")
    jets = [x if isinstance(x, Jet2) else Jet2.constant(x) for x in inputs]
    if op == "add":
        return jets[0] + jets[1]
    if op == "sub":
        return jets[0] - jets[1]
    if op == "mul":
        return jets[0] * jets[1]
    if op == "scale":
        return jets[0].scale(inputs[1])
    if op == "affine":
        return jets[0].affine(inputs[1], inputs[2])
    return getattr(jets[0], op)()


def gradient_check(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    h: float,
) -> float:
    """Max relative disagreement between `grad` and central finite differences.

    Returns max over coordinates of |analytic - fd| / max(1, |analytic|).
    """
    if not h > 0:
        raise UsageError("gradient_check: step h must be positive")
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(grad(theta), dtype=float)
    if analytic.shape != theta.shape:
        raise UsageError("gradient_check: gradient shape does not match theta")
    worst = 0.0
    for k in range(theta.size):
        probe = theta.copy().ravel()
        probe[k] += h
        f_plus = f(probe.reshape(theta.shape))
        probe[k] -= 2.0 * h
        f_minus = f(probe.reshape(theta.shape))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericFault(f"gradient_check: non-finite f at coordinate {k}")
        fd = (f_plus - f_minus) / (2.0 * h)
        a = analytic.ravel()[k]
        worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst
