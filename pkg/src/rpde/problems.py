"""Benchmark problem definitions.

Four tags are shipped:

* ``diffusion-smooth``    transient 1D diffusion, smooth random diffusivity,
                          hard constraints, strong-form loss (d=100).
* ``diffusion-nonsmooth`` same PDE with the rougher cos^2 field (d=50).
* ``heat-square``         steady 2D conduction on [-1,1]^2 with random
                          conductivity, hard trial, variational loss (d=50).
* ``heat-hole``           the same conduction problem on the plate with a
                          centred hole of radius 0.3, soft constraints with
                          boundary weight 1000, variational loss (d=30).

All random parameters are i.i.d. U[0,1]. Both heat problems can also be
built in strong form (which uses the closed-form conductivity gradient),
and the diffusion problems in soft mode, for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Jet2
from .constraints import PenaltyWeights, TrialForm
from .errors import ConfigError, UsageError
from .sampler import DomainSpec

TAGS = ("diffusion-smooth", "diffusion-nonsmooth", "heat-square", "heat-hole")


# ----------------------------------------------------------------------
# Random coefficient fields


@dataclass(frozen=True)
class RandomField1D:
    """base + sum_j (amp/j) * mode(pi/2 * j * x) * p_j with mode cos or cos^2."""

    base: float
    amp: float
    squared: bool
    d: int

    def __call__(self, x: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Field value and exact x-derivative at x (n,), p (n, d)."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        j = np.arange(1, self.d + 1)
        arg = 0.5 * np.pi * np.outer(x, j)
        if self.squared:
            modes = np.cos(arg) ** 2
            dmodes = -0.5 * np.pi * j * np.sin(2.0 * arg)
        else:
            modes = np.cos(arg)
            dmodes = -0.5 * np.pi * j * np.sin(arg)
        w = (self.amp / j) * p
        a = self.base + np.einsum("nj,nj->n", modes, w)
        a_x = np.einsum("nj,nj->n", dmodes, w)
        return a, a_x


@dataclass(frozen=True)
class Conductivity2D:
    """1 + sum_j (1/j) * cos^2(pi/4 * j^1.5 * x * y) * p_j."""

    d: int

    def __call__(self, x, y, p) -> np.ndarray:
        k, _, _ = self.with_grad(x, y, p, need_grad=False)
        return k

    def with_grad(self, x, y, p, need_grad: bool = True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        j = np.arange(1, self.d + 1)
        freq = 0.25 * np.pi * j**1.5
        arg = np.outer(x * y, freq)
        w = p / j
        k = 1.0 + np.einsum("nj,nj->n", np.cos(arg) ** 2, w)
        if not need_grad:
            return k, None, None
        # d/dx cos^2(f*x*y) = -sin(2*f*x*y) * f * y
        s = np.sin(2.0 * arg) * freq
        k_x = -np.einsum("nj,nj->n", s, w) * y
        k_y = -np.einsum("nj,nj->n", s, w) * x
        return k, k_x, k_y


def smooth_diffusion_coeff(x, p):
    """Smooth diffusivity field (d from p's width): value and x-derivative."""
    p = np.atleast_2d(p)
    return RandomField1D(0.26, 0.05, False, p.shape[1])(np.atleast_1d(x), p)


def nonsmooth_diffusion_coeff(x, p):
    """cos^2-mode diffusivity field: value and x-derivative."""
    p = np.atleast_2d(p)
    return RandomField1D(0.2, 0.1, True, p.shape[1])(np.atleast_1d(x), p)


def conductivity(x, y, p):
    """Random thermal conductivity at (x, y)."""
    p = np.atleast_2d(p)
    return Conductivity2D(p.shape[1])(np.atleast_1d(x), np.atleast_1d(y), p)


def heat_forcing(tag: str, x, y) -> np.ndarray:
    """Internal heat source: 100*|xy| on the full square, constant 2 on the plate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if tag == "heat-square":
        return 100.0 * np.abs(x * y)
    if tag == "heat-hole":
        return np.full(np.broadcast(x, y).shape, 2.0)
    raise UsageError(f"no heat forcing for tag '{tag}'")


def diffusion_initial(x) -> np.ndarray:
    """Initial temperature profile 10*(x - x^2); vanishes at both ends."""
    x = np.asarray(x, dtype=float)
    return 10.0 * (x - x * x)


# ----------------------------------------------------------------------
# Hard trial forms


def _parabola(xj: Jet2) -> Jet2:
    return xj - xj.square()


def diffusion_trial() -> TrialForm:
    """u = 10(x - x^2) + t(x - x^2) * net: exact IC at t=0, zero at x in {0,1}."""
    return TrialForm(
        offset=lambda c: _parabola(c["x"]).scale(10.0),
        multiplier=lambda c: c["t"] * _parabola(c["x"]),
    )


def heat_square_trial() -> TrialForm:
    """u = (1 - x^2)(1 - y^2) * net: zero on every edge of the square."""
    return TrialForm(
        offset=lambda c: Jet2.constant(0.0),
        multiplier=lambda c: (1.0 - c["x"].square()) * (1.0 - c["y"].square()),
    )


# ----------------------------------------------------------------------
# Problem assembly


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable bundle of everything a loss evaluation needs."""

    tag: str
    kind: str  # "diffusion" (1D, coefficient a) or "heat" (2D, coefficient k)
    domain: DomainSpec
    d: int
    loss_mode: str  # "strong" | "variational"
    constraint: str  # "hard" | "soft"
    field: object
    trial: TrialForm | None = None
    penalty: PenaltyWeights | None = None
    c: float = 0.0  # constant forcing of the diffusion problems
    forcing: Callable | None = None  # f(x, y) for the heat problems
    has_ic: bool = False

    def __post_init__(self):
        if self.loss_mode not in ("strong", "variational"):
            raise ConfigError(f"unknown loss mode '{self.loss_mode}'")
        if self.constraint not in ("hard", "soft"):
            raise ConfigError(f"unknown constraint mode '{self.constraint}'")
        if self.loss_mode == "variational" and self.transient:
            raise ConfigError("variational loss requires a steady problem")
        if self.constraint == "hard" and self.trial is None:
            raise ConfigError(f"no hard trial form available for '{self.tag}'")
        if self.constraint == "soft" and self.penalty is None:
            raise ConfigError("soft constraints need penalty weights")

    @property
    def transient(self) -> bool:
        return self.domain.time_horizon is not None

    @property
    def coord_names(self) -> tuple[str, ...]:
        space = ("x",) if self.domain.spatial_dim == 1 else ("x", "y")
        return (("t",) if self.transient else ()) + space

    @property
    def input_dim(self) -> int:
        return len(self.coord_names) + self.d

    def coord_index(self, name: str) -> int:
        return self.coord_names.index(name)

    def net_input(self, t: np.ndarray | None, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        cols = []
        if self.transient:
            cols.append(np.asarray(t, dtype=float).reshape(-1, 1))
        cols.append(np.atleast_2d(x))
        cols.append(np.atleast_2d(p))
        return np.concatenate(cols, axis=1)

    def forcing_at(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "diffusion":
            return np.full(x.shape[0], self.c)
        return self.forcing(x[:, 0], x[:, 1])

    def ic_at(self, x: np.ndarray) -> np.ndarray:
        if not self.has_ic:
            raise UsageError(f"problem '{self.tag}' has no initial condition")
        return diffusion_initial(np.atleast_2d(x)[:, 0])

    def bc_value(self) -> float:
        return 0.0  # all benchmark problems use zero Dirichlet data


_DEFAULTS = {
    "diffusion-smooth": dict(d=100, constraint="hard", loss="strong"),
    "diffusion-nonsmooth": dict(d=50, constraint="hard", loss="strong"),
    "heat-square": dict(d=50, constraint="hard", loss="variational"),
    "heat-hole": dict(d=30, constraint="soft", loss="variational"),
}


def build_problem(
    tag: str,
    d: int | None = None,
    constraint: str | None = None,
    loss: str | None = None,
    lam_ic: float = 1.0,
    lam_bc: float | None = None,
) -> ProblemSpec:
    """Benchmark problem with published defaults; overrides for desk-scale runs."""
    if tag not in _DEFAULTS:
        raise ConfigError(f"unknown problem tag '{tag}' (expected one of {TAGS})")
    base = _DEFAULTS[tag]
    d = base["d"] if d is None else int(d)
    constraint = constraint or base["constraint"]
    loss = loss or base["loss"]
    if d < 1:
        raise ConfigError("stochastic dimension d must be >= 1")

    if tag.startswith("diffusion"):
        dom = DomainSpec("interval", time_horizon=1.0)
        field = (
            RandomField1D(0.26, 0.05, False, d)
            if tag == "diffusion-smooth"
            else RandomField1D(0.2, 0.1, True, d)
        )
        penalty = PenaltyWeights(lam_ic, 1.0 if lam_bc is None else lam_bc)
        return ProblemSpec(
            tag=tag,
            kind="diffusion",
            domain=dom,
            d=d,
            loss_mode=loss,
            constraint=constraint,
            field=field,
            trial=diffusion_trial(),
            penalty=penalty if constraint == "soft" else None,
            c=3.0,
            has_ic=True,
        )

    geometry = "square" if tag == "heat-square" else "square-with-hole"
    dom = DomainSpec(geometry, hole_radius=0.3 if geometry == "square-with-hole" else 0.0)
    default_lam_bc = 1000.0 if tag == "heat-hole" else 1.0
    penalty = PenaltyWeights(0.0, default_lam_bc if lam_bc is None else lam_bc)
    return ProblemSpec(
        tag=tag,
        kind="heat",
        domain=dom,
        d=d,
        loss_mode=loss,
        constraint=constraint,
        field=Conductivity2D(d),
        trial=heat_square_trial() if tag == "heat-square" else None,
        penalty=penalty if constraint == "soft" else None,
        forcing=lambda x, y, _tag=tag: heat_forcing(_tag, x, y),
    )
