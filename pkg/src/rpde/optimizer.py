"""Adam optimizer over the flat parameter vector.

Canonical bias-corrected form. Defaults follow the training setup used
for the benchmark problems: lr 1e-5, beta1 0.9, beta2 0.999, eps 1e-15;
desk-scale presets override the learning rate through run configuration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFault, UsageError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-15

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise UsageError("Adam betas must lie in [0, 1)")
        if self.lr <= 0.0 or self.eps <= 0.0:
            raise UsageError("Adam lr and eps must be positive")


@dataclass
class AdamState:
    config: AdamConfig
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int, config: AdamConfig) -> "AdamState":
        return cls(config, np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray) -> None:
    """One in-place Adam update of `theta` and `state`.

    Rejects non-finite gradients before touching any state, so a failed
    step leaves both arguments unchanged.
    """
    if grad.shape != theta.shape or grad.shape != state.m.shape:
        raise UsageError("gradient size does not match parameters")
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericFault(f"non-finite gradient entry at parameter index {bad}")
    c = state.config
    state.step += 1
    state.m *= c.beta1
    state.m += (1.0 - c.beta1) * grad
    state.v *= c.beta2
    state.v += (1.0 - c.beta2) * grad**2
    m_hat = state.m / (1.0 - c.beta1**state.step)
    v_hat = state.v / (1.0 - c.beta2**state.step)
    theta -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)


_HEADER = struct.Struct("<qq")  # step, n


def state_to_bytes(state: AdamState) -> bytes:
    """Exact little-endian serialization of the mutable state."""
    return (
        _HEADER.pack(state.step, state.m.size)
        + state.m.astype("<f8").tobytes()
        + state.v.astype("<f8").tobytes()
    )


def state_from_bytes(data: bytes, config: AdamConfig) -> AdamState:
    step, n = _HEADER.unpack_from(data)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * n:
        raise UsageError("Adam state blob has the wrong length")
    return AdamState(config, body[:n].copy(), body[n:].copy(), step=step)
