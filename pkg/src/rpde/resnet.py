"""Feed-forward fully-connected deep residual network surrogate.

The network maps an input row (time, space, random parameters) to a scalar.
Hidden layers all share one width; shortcut connections join consecutive
odd hidden layers (span r=2): the first block wraps hidden layers 2 and 3
with a shortcut from hidden layer 1, the next wraps 4 and 5, and so on.
Inside a block the activation is applied after the shortcut addition:

    y_i = act( act(y_{i-2} W_{i-1} + b_{i-1}) W_i + b_i + y_{i-2} )

The input layer, a possible trailing even hidden layer, and the affine
output layer sit outside blocks. Widths never change between hidden
layers, so no shortcut projection is required.

Evaluation is batch-vectorized and can carry second-order directional
jets: the state is a (components, batch, width) stack whose component 0 is
the value and whose remaining components are first/second directional
derivatives with respect to seeded input coordinates. ``backward`` runs
the hand-derived adjoint of that jet propagation and returns the gradient
of any scalar built from the output jets with respect to every parameter.
A scalar tape reference implementation (``forward_jets_tape``) computes
the same quantities one point at a time for cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .autodiff import Jet2, Tape, Var
from .errors import UsageError

ACTIVATIONS = ("tanh",)


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_width: int
    hidden_layers: int
    block_size: int = 2
    activation: str = "tanh"
    output_dim: int = 1

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_width < 1 or self.hidden_layers < 1:
            raise UsageError("network dimensions must be positive")
        if self.block_size != 2:
            raise UsageError("only shortcut span 2 is supported")
        if self.activation not in ACTIVATIONS:
            raise UsageError(f"unsupported activation '{self.activation}'")
        if self.output_dim != 1:
            raise UsageError("the surrogate is scalar-valued")


def layer_dims(config: NetworkConfig) -> list[tuple[int, int]]:
    """(fan_in, fan_out) of every affine layer, input to output."""
    w = config.hidden_width
    dims = [(config.input_dim, w)]
    dims += [(w, w)] * (config.hidden_layers - 1)
    dims.append((w, config.output_dim))
    return dims


def param_count(config: NetworkConfig) -> int:
    return sum(fi * fo + fo for fi, fo in layer_dims(config))


@dataclass
class NetworkParams:
    """All weights and biases, with a fixed flat layout.

    Flat order: for each affine layer from input to output, the weight
    matrix in row-major order followed by the bias vector.
    """

    config: NetworkConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, config: NetworkConfig, flat: np.ndarray) -> "NetworkParams":
        flat = np.asarray(flat, dtype=float)
        if flat.size != param_count(config):
            raise UsageError(
                f"flat parameter vector has {flat.size} entries, "
                f"expected {param_count(config)}"
            )
        weights, biases, k = [], [], 0
        for fi, fo in layer_dims(config):
            weights.append(flat[k : k + fi * fo].reshape(fi, fo).copy())
            k += fi * fo
            biases.append(flat[k : k + fo].copy())
            k += fo
        return cls(config, weights, biases)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.config,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


def init_params(config: NetworkConfig, seed: int) -> NetworkParams:
    """Glorot-style uniform weights, zero biases; deterministic in `seed`."""
    gen = rng.stream(seed, rng.STREAM_NET_INIT)
    weights, biases = [], []
    for fi, fo in layer_dims(config):
        bound = np.sqrt(6.0 / (fi + fo))
        weights.append(gen.uniform(-bound, bound, size=(fi, fo)))
        biases.append(np.zeros(fo))
    return NetworkParams(config, weights, biases)


@dataclass(frozen=True)
class Direction:
    """A seeded input coordinate; `second` requests the second derivative."""

    index: int
    second: bool = False


@dataclass
class SurrogateOutput:
    """Network output jets for one batch: value plus per-direction d1/d2."""

    value: np.ndarray  # (batch,)
    d1: dict[int, np.ndarray]  # direction index -> (batch,)
    d2: dict[int, np.ndarray]  # only for directions with second=True
    cache: "_Cache | None" = None

    def jet(self, direction: int) -> Jet2:
        return Jet2(self.value, self.d1[direction], self.d2.get(direction, 0.0))


@dataclass
class _Cache:
    """Forward records needed by the adjoint sweep."""

    config: NetworkConfig
    directions: tuple[Direction, ...]
    d1_comp: dict[int, int]
    d2_comp: dict[int, int]
    n_comp: int
    batch: int
    stages: list = field(default_factory=list)


def _seed_state(x: np.ndarray, directions: Sequence[Direction]):
    b, dim = x.shape
    d1_comp, d2_comp = {}, {}
    c = 1
    for d in directions:
        if not 0 <= d.index < dim:
            raise UsageError(f"direction index {d.index} out of range for input_dim {dim}")
        if d.index in d1_comp:
            raise UsageError(f"duplicate direction index {d.index}")
        d1_comp[d.index] = c
        c += 1
        if d.second:
            d2_comp[d.index] = c
            c += 1
    state = np.zeros((c, b, dim))
    state[0] = x
    for idx, comp in d1_comp.items():
        state[comp, :, idx] = 1.0
    return state, d1_comp, d2_comp


def forward_jets(
    params: NetworkParams,
    x: np.ndarray,
    directions: Sequence[Direction] = (),
    want_cache: bool = False,
) -> SurrogateOutput:
    """Evaluate the network on a batch, propagating directional jets.

    x: (batch, input_dim). The value component of the result is identical
    whatever directions are requested.
    """
    cfg = params.config
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise UsageError(f"input must be (batch, {cfg.input_dim})")
    directions = tuple(directions)
    state, d1_comp, d2_comp = _seed_state(x, directions)
    cache = _Cache(cfg, directions, d1_comp, d2_comp, state.shape[0], x.shape[0])
    stages = cache.stages

    def affine(s, li):
        out = s @ params.weights[li]
        out[0] += params.biases[li]
        stages.append(("affine", li, s))
        return out

    def act(z):
        out = np.empty_like(z)
        s = np.tanh(z[0])
        s1 = 1.0 - s * s
        out[0] = s
        for idx, c1 in d1_comp.items():
            out[c1] = s1 * z[c1]
            c2 = d2_comp.get(idx)
            if c2 is not None:
                out[c2] = (-2.0 * s * s1) * z[c1] ** 2 + s1 * z[c2]
        stages.append(("tanh", z, out))
        return out

    def residual(s, src_stage):
        # Shortcut sources are tanh stages; element 2 is their output state.
        stages.append(("res", src_stage))
        return s + stages[src_stage][2]

    li = 0
    state = act(affine(state, li))  # hidden layer 1, outside any block
    li += 1
    shortcut = len(stages) - 1
    h = 1
    while h + 2 <= cfg.hidden_layers:
        state = act(affine(state, li))
        li += 1
        state = affine(state, li)
        li += 1
        state = act(residual(state, shortcut))
        shortcut = len(stages) - 1
        h += 2
    if h < cfg.hidden_layers:  # trailing even hidden layer, outside blocks
        state = act(affine(state, li))
        li += 1
    state = affine(state, li)

    return SurrogateOutput(
        value=state[0, :, 0].copy(),
        d1={idx: state[c, :, 0].copy() for idx, c in d1_comp.items()},
        d2={idx: state[c, :, 0].copy() for idx, c in d2_comp.items()},
        cache=cache if want_cache else None,
    )


def backward(
    params: NetworkParams,
    cache: _Cache,
    value_adj: np.ndarray | float = 0.0,
    d1_adj: dict[int, np.ndarray] | None = None,
    d2_adj: dict[int, np.ndarray] | None = None,
) -> np.ndarray:
    """Parameter gradient of sum_b [adjoints . output jets], flat layout.

    The adjoints are the partials of some scalar objective with respect to
    the output value / d1 / d2 arrays of the cached forward pass; the
    return value is the chained gradient with respect to every parameter.
    """
    cfg = cache.config
    dims = layer_dims(cfg)
    w_grads = [np.zeros((fi, fo)) for fi, fo in dims]
    b_grads = [np.zeros(fo) for _, fo in dims]

    adj = np.zeros((cache.n_comp, cache.batch, cfg.output_dim))
    adj[0, :, 0] = value_adj
    for idx, a in (d1_adj or {}).items():
        adj[cache.d1_comp[idx], :, 0] = a
    for idx, a in (d2_adj or {}).items():
        adj[cache.d2_comp[idx], :, 0] = a

    pending: dict[int, np.ndarray] = {}
    stages = cache.stages
    for si in range(len(stages) - 1, -1, -1):
        extra = pending.pop(si, None)
        if extra is not None:
            adj = adj + extra
        rec = stages[si]
        kind = rec[0]
        if kind == "affine":
            _, li, s_in = rec
            w_grads[li] += np.einsum("cbi,cbo->io", s_in, adj)
            b_grads[li] += adj[0].sum(axis=0)
            adj = adj @ params.weights[li].T
        elif kind == "tanh":
            _, z, out = rec
            s = out[0]
            s1 = 1.0 - s * s
            s2 = -2.0 * s * s1
            new = np.empty_like(adj)
            acc_v = adj[0] * s1
            for idx, c1 in cache.d1_comp.items():
                c2 = cache.d2_comp.get(idx)
                acc_v = acc_v + adj[c1] * (s2 * z[c1])
                if c2 is not None:
                    s3 = -2.0 * s1 * s1 - 2.0 * s * s2
                    acc_v = acc_v + adj[c2] * (s3 * z[c1] ** 2 + s2 * z[c2])
                    new[c1] = adj[c1] * s1 + adj[c2] * (2.0 * s2 * z[c1])
                    new[c2] = adj[c2] * s1
                else:
                    new[c1] = adj[c1] * s1
            new[0] = acc_v
            adj = new
        else:  # residual shortcut: adjoint flows to both summands
            pending[rec[1]] = pending.get(rec[1], 0.0) + adj

    flat = []
    for wg, bg in zip(w_grads, b_grads):
        flat.append(wg.ravel())
        flat.append(bg)
    return np.concatenate(flat)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray | float:
    """Plain value evaluation; accepts one point or a batch."""
    single = np.asarray(x).ndim == 1
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    value = forward_jets(params, xb).value
    return float(value[0]) if single else value


def forward_jet(params: NetworkParams, x: np.ndarray, direction: int) -> Jet2:
    """Jet of the output along one input coordinate at a single point."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    out = forward_jets(params, xb, (Direction(direction, second=True),))
    return Jet2(float(out.value[0]), float(out.d1[direction][0]), float(out.d2[direction][0]))


class _TapeUnit:
    """Per-unit state of the tape reference pass: value plus direction jets."""

    __slots__ = ("v", "dirs")

    def __init__(self, v: Var, dirs: list):
        self.v = v
        self.dirs = dirs  # [(d1: Var|float, d2: Var|float|None), ...]


def params_to_tape(params: NetworkParams, tape: Tape):
    """Mark every parameter as a tape leaf, in flat layout order."""
    w_vars, b_vars = [], []
    for w, b in zip(params.weights, params.biases):
        w_vars.append(
            [[Var.leaf(tape, float(w[i, j]), mark=True) for j in range(w.shape[1])] for i in range(w.shape[0])]
        )
        b_vars.append([Var.leaf(tape, float(bj), mark=True) for bj in b])
    return w_vars, b_vars


def forward_jets_tape(
    params: NetworkParams,
    x: Sequence[float],
    directions: Sequence[Direction],
    tape: Tape,
    leaves=None,
) -> SurrogateOutput:
    """Scalar-tape reference for one input point.

    Records the entire jet arithmetic on `tape`, so a reverse sweep from
    any scalar built on the outputs yields reference parameter gradients.
    Slow; intended for cross-validation of the vectorized engine.
    """
    cfg = params.config
    x = [float(v) for v in x]
    if len(x) != cfg.input_dim:
        raise UsageError(f"input must have length {cfg.input_dim}")
    directions = tuple(directions)
    w_vars, b_vars = leaves if leaves is not None else params_to_tape(params, tape)

    units = [
        _TapeUnit(
            Var.leaf(tape, xi),
            [(1.0 if d.index == i else 0.0, 0.0 if d.second else None) for d in directions],
        )
        for i, xi in enumerate(x)
    ]

    def affine(ins, li):
        fo = len(b_vars[li])
        outs = []
        for j in range(fo):
            v = b_vars[li][j]
            d = [(0.0, 0.0 if dk.second else None) for dk in directions]
            for i, unit in enumerate(ins):
                wij = w_vars[li][i][j]
                v = v + unit.v * wij
                for k in range(len(directions)):
                    d1, d2 = d[k]
                    u1, u2 = unit.dirs[k]
                    d1 = d1 + u1 * wij
                    if d2 is not None:
                        d2 = d2 + u2 * wij
                    d[k] = (d1, d2)
            outs.append(_TapeUnit(v, d))
        return outs

    def act(ins):
        outs = []
        for unit in ins:
            s = unit.v.tanh()
            s1 = 1.0 - s.square()
            s2 = -2.0 * (s * s1)
            d = []
            for d1, d2 in unit.dirs:
                nd1 = s1 * d1
                nd2 = None if d2 is None else s2 * _sq(d1) + s1 * d2
                d.append((nd1, nd2))
            outs.append(_TapeUnit(s, d))
        return outs

    def residual(ins, saved):
        outs = []
        for a, b in zip(ins, saved):
            d = []
            for (a1, a2), (b1, b2) in zip(a.dirs, b.dirs):
                d.append((a1 + b1, None if a2 is None else a2 + b2))
            outs.append(_TapeUnit(a.v + b.v, d))
        return outs

    li = 0
    units = act(affine(units, li))
    li += 1
    saved = units
    h = 1
    while h + 2 <= cfg.hidden_layers:
        units = act(affine(units, li))
        li += 1
        units = affine(units, li)
        li += 1
        units = act(residual(units, saved))
        saved = units
        h += 2
    if h < cfg.hidden_layers:
        units = act(affine(units, li))
        li += 1
    out = affine(units, li)[0]

    return SurrogateOutput(
        value=out.v,
        d1={d.index: out.dirs[k][0] for k, d in enumerate(directions)},
        d2={d.index: out.dirs[k][1] for k, d in enumerate(directions) if d.second},
        cache=None,
    )


def _sq(x):
    return x.square() if isinstance(x, Var) else x * x
