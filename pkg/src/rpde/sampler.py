"""Mini-batch point sampling over space, time, boundary, and parameters.

Geometries: the unit interval [0, 1], the square [-1, 1]^2, and the square
with a centred circular hole. Interior points in the hole domain come from
rejection sampling; boundary points are distributed proportionally to arc
length over all boundary pieces. Every draw goes through the counter-based
streams in :mod:`rpde.rng`, so batches are a pure function of
(seed, iteration).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError

GEOMETRIES = ("interval", "square", "square-with-hole")

_MIN_ACCEPTANCE = 0.1


@dataclass(frozen=True)
class DomainSpec:
    geometry: str
    time_horizon: float | None = None  # None for steady problems
    hole_radius: float = 0.0

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"unknown geometry '{self.geometry}'")
        if self.time_horizon is not None and not self.time_horizon > 0.0:
            raise ConfigError("time horizon must be positive")
        if self.geometry == "square-with-hole":
            if not 0.0 < self.hole_radius < 1.0:
                raise ConfigError("hole radius must lie in (0, half side)")
            if self.acceptance_rate < _MIN_ACCEPTANCE:
                raise ConfigError("degenerate geometry: rejection acceptance below 10%")
        elif self.hole_radius != 0.0:
            raise ConfigError("hole radius only applies to square-with-hole")

    @property
    def spatial_dim(self) -> int:
        return 1 if self.geometry == "interval" else 2

    @property
    def volume(self) -> float:
        """Measure of the spatial domain (length or area)."""
        if self.geometry == "interval":
            return 1.0
        if self.geometry == "square":
            return 4.0
        return 4.0 - np.pi * self.hole_radius**2

    @property
    def acceptance_rate(self) -> float:
        """Expected acceptance of square-box rejection sampling."""
        return self.volume / 4.0 if self.spatial_dim == 2 else 1.0

    def contains(self, x: np.ndarray, strict: bool = False) -> np.ndarray:
        """Membership mask for points (n, spatial_dim); strict excludes ∂D."""
        x = np.atleast_2d(x)
        if self.geometry == "interval":
            inside = (x[:, 0] > 0) & (x[:, 0] < 1) if strict else (x[:, 0] >= 0) & (x[:, 0] <= 1)
            return inside
        box = np.all((np.abs(x) < 1.0) if strict else (np.abs(x) <= 1.0), axis=1)
        if self.geometry == "square":
            return box
        r2 = x[:, 0] ** 2 + x[:, 1] ** 2
        hole = r2 > self.hole_radius**2 if strict else r2 >= self.hole_radius**2
        return box & hole


def sample_params(n: int, d: int, dist: str, gen: np.random.Generator) -> np.ndarray:
    """n i.i.d. random-parameter vectors; only U[0,1]^d is shipped."""
    if dist != "uniform01":
        raise UsageError(f"unknown parameter distribution '{dist}'")
    if n < 1 or d < 0:
        raise UsageError("need n >= 1 and d >= 0")
    return gen.uniform(0.0, 1.0, size=(n, d))


def sample_interior(n: int, dom: DomainSpec, gen: np.random.Generator) -> tuple:
    """(t, x): t ~ U[0,T] or None; x uniform on the spatial domain, (n, D)."""
    if n < 1:
        raise UsageError("need n >= 1")
    t = gen.uniform(0.0, dom.time_horizon, size=n) if dom.time_horizon is not None else None
    if dom.geometry == "interval":
        return t, gen.uniform(0.0, 1.0, size=(n, 1))
    if dom.geometry == "square":
        return t, gen.uniform(-1.0, 1.0, size=(n, 2))
    # Rejection from the bounding square. Acceptance is validated at
    # construction; the loop bound only guards against broken geometry.
    out = np.empty((n, 2))
    have = 0
    attempts = 0
    while have < n:
        if attempts > 64:
            raise ConfigError("degenerate geometry: rejection acceptance below 10%")
        cand = gen.uniform(-1.0, 1.0, size=(max(n - have, 16), 2))
        keep = cand[cand[:, 0] ** 2 + cand[:, 1] ** 2 > dom.hole_radius**2]
        take = min(len(keep), n - have)
        out[have : have + take] = keep[:take]
        have += take
        attempts += 1
    return t, out


def sample_boundary(n: int, dom: DomainSpec, gen: np.random.Generator) -> np.ndarray:
    """Points on ∂D with density proportional to arc length, (n, D)."""
    if n < 1:
        raise UsageError("need n >= 1")
    if dom.geometry == "interval":
        return gen.integers(0, 2, size=(n, 1)).astype(float)
    side_len = 8.0  # perimeter of [-1, 1]^2
    if dom.geometry == "square":
        return _square_edge(n, gen)
    circle_len = 2.0 * np.pi * dom.hole_radius
    on_circle = gen.uniform(0.0, side_len + circle_len, size=n) >= side_len
    pts = _square_edge(n, gen)
    theta = gen.uniform(0.0, 2.0 * np.pi, size=n)
    circ = dom.hole_radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pts[on_circle] = circ[on_circle]
    return pts


def _square_edge(n: int, gen: np.random.Generator) -> np.ndarray:
    side = gen.integers(0, 4, size=n)
    pos = gen.uniform(-1.0, 1.0, size=n)
    pts = np.empty((n, 2))
    vertical = side < 2
    pts[vertical, 0] = np.where(side[vertical] == 0, -1.0, 1.0)
    pts[vertical, 1] = pos[vertical]
    pts[~vertical, 0] = pos[~vertical]
    pts[~vertical, 1] = np.where(side[~vertical] == 2, -1.0, 1.0)
    return pts


@dataclass
class SampleBatch:
    """One iteration's points: interior always, boundary/initial in soft mode.

    The boundary and initial rows reuse the interior batch's times and
    parameter draws; only the spatial coordinate is replaced (projected to
    ∂D, or the time set to zero).
    """

    t: np.ndarray | None  # (n,) or None for steady problems
    x: np.ndarray  # (n, D)
    p: np.ndarray  # (n, d)
    x_boundary: np.ndarray | None = None  # (n, D), soft mode only
    x_initial: np.ndarray | None = None  # (n, D), soft mode with an IC

    @property
    def size(self) -> int:
        return self.x.shape[0]


def sample_batch(
    n: int,
    dom: DomainSpec,
    d: int,
    gen: np.random.Generator,
    soft: bool = False,
    with_ic: bool = False,
) -> SampleBatch:
    """Draw one training batch; draw order is fixed for reproducibility."""
    t, x = sample_interior(n, dom, gen)
    p = sample_params(n, d, "uniform01", gen)
    xb = sample_boundary(n, dom, gen) if soft else None
    xi = x.copy() if soft and with_ic else None
    return SampleBatch(t=t, x=x, p=p, x_boundary=xb, x_initial=xi)
