"""Mini-batch loss assembly for both formulations.

Strong form: the loss is the batch mean of the squared pointwise PDE
residual; in soft mode, weighted squared initial/boundary residuals are
added. Variational form: the loss is the Monte Carlo estimate of the
energy functional, i.e. domain volume times the batch mean of the
first-order integrand (the strong loss needs no volume factor -- it only
rescales the gradient -- but the functional's minimizer is the target, so
the variational estimate keeps it; loss magnitudes of the two modes are
not comparable).

Residual expressions are built from network output jets wrapped in tape
variables, so one reverse sweep through the expression followed by the
network adjoint yields the exact parameter gradient of the batch loss.

``first_variation_check`` and the Euler-Lagrange rule table verify, by
quadrature, that a candidate energy integrand actually has the weak form
as its first variation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import resnet
from .autodiff import Jet2, Tape, Var
from .constraints import hard_wrap
from .errors import NumericFault, UsageError
from .problems import ProblemSpec
from .sampler import SampleBatch

# ----------------------------------------------------------------------
# Pointwise residuals / integrands


def diffusion_residual(u: Mapping[str, Jet2], a, a_x, c):
    """u_t - (a_x*u_x + a*u_xx) - c, the 1D flux-form diffusion residual."""
    flux = u["x"].d1 * a_x + u["x"].d2 * a
    if "t" in u:
        return u["t"].d1 - flux - c
    return -1.0 * flux - c


def heat_strong_residual(u: Mapping[str, Jet2], k, k_x, k_y, f):
    """-(div k grad u) - f expanded with the closed-form conductivity gradient."""
    div = u["x"].d1 * k_x + u["x"].d2 * k + u["y"].d1 * k_y + u["y"].d2 * k
    return -1.0 * div - f


def heat_variational_integrand(u: Mapping[str, Jet2], k, f):
    """(k/2)(u_x^2 + u_y^2) - f*u, the conduction energy density."""
    quad = u["x"].d1.square() + u["y"].d1.square()
    return quad * (0.5 * k) - u["x"].v * f


def poisson1d_integrand(u: Mapping[str, Jet2], a, c):
    """(a/2) u_x^2 - c*u, the 1D analogue used for cross-checks."""
    return u["x"].d1.square() * (0.5 * a) - u["x"].v * c


# ----------------------------------------------------------------------
# Batch losses


def interior_directions(problem: ProblemSpec) -> tuple[tuple[str, bool], ...]:
    """Seeded coordinates and whether each needs a second derivative."""
    if problem.loss_mode == "variational":
        names = problem.coord_names[-problem.domain.spatial_dim :]
        return tuple((n, False) for n in names)
    dirs = [("x", True)]
    if problem.domain.spatial_dim == 2:
        dirs.append(("y", True))
    if problem.transient:
        dirs.insert(0, ("t", False))
    return tuple(dirs)


def _coordinate_jets(problem: ProblemSpec, t, x, seed_name: str) -> dict[str, Jet2]:
    jets = {}
    for name in problem.coord_names:
        if name == "t":
            values = np.asarray(t, dtype=float)
        else:
            values = np.atleast_2d(x)[:, 0 if name == "x" else 1]
        d1 = 1.0 if name == seed_name else 0.0
        jets[name] = Jet2(values, d1, 0.0)
    return jets


@dataclass
class _InteriorEval:
    u: dict[str, Jet2]  # trial-wrapped (hard) or raw (soft) jets per direction
    out: resnet.SurrogateOutput
    leaf_order: list  # ("value"|"d1"|"d2", direction input index)


def _interior_forward(problem: ProblemSpec, params, batch: SampleBatch, tape: Tape) -> _InteriorEval:
    dirs = interior_directions(problem)
    dir_index = {name: problem.coord_index(name) for name, _ in dirs}
    X = problem.net_input(batch.t, batch.x, batch.p)
    out = resnet.forward_jets(
        params,
        X,
        tuple(resnet.Direction(dir_index[n], s) for n, s in dirs),
        want_cache=True,
    )
    value = Var.leaf(tape, out.value, mark=True)
    leaf_order: list = [("value", None)]
    net_jets: dict[str, Jet2] = {}
    for name, second in dirs:
        i = dir_index[name]
        d1 = Var.leaf(tape, out.d1[i], mark=True)
        leaf_order.append(("d1", i))
        d2 = 0.0
        if second:
            d2 = Var.leaf(tape, out.d2[i], mark=True)
            leaf_order.append(("d2", i))
        net_jets[name] = Jet2(value, d1, d2)
    u = {}
    for name, _ in dirs:
        if problem.constraint == "hard":
            coords = _coordinate_jets(problem, batch.t, batch.x, seed_name=name)
            u[name] = hard_wrap(problem.trial, net_jets[name], coords)
        else:
            u[name] = net_jets[name]
    return _InteriorEval(u, out, leaf_order)


def _interior_residual(problem: ProblemSpec, batch: SampleBatch, u: Mapping[str, Jet2]):
    x = batch.x
    if problem.kind == "diffusion":
        a, a_x = problem.field(x[:, 0], batch.p)
        return diffusion_residual(u, a, a_x, problem.c)
    k, k_x, k_y = problem.field.with_grad(x[:, 0], x[:, 1], batch.p)
    return heat_strong_residual(u, k, k_x, k_y, problem.forcing_at(x))


def _interior_integrand(problem: ProblemSpec, batch: SampleBatch, u: Mapping[str, Jet2]):
    x = batch.x
    if problem.kind == "diffusion":
        a, _ = problem.field(x[:, 0], batch.p)
        return poisson1d_integrand(u, a, problem.c)
    k = problem.field(x[:, 0], x[:, 1], batch.p)
    return heat_variational_integrand(u, k, problem.forcing_at(x))


def _check_finite(values: np.ndarray, batch: SampleBatch, what: str):
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        b = int(bad[0])
        coords = f"x={batch.x[b]}" + (f", t={batch.t[b]}" if batch.t is not None else "")
        raise NumericFault(f"non-finite {what} at batch sample {b} ({coords})")


def _route_adjoints(adjoints: list, leaf_order: list):
    value_adj, d1_adj, d2_adj = 0.0, {}, {}
    for adj, (kind, idx) in zip(adjoints, leaf_order):
        if kind == "value":
            value_adj = adj
        elif kind == "d1":
            d1_adj[idx] = adj
        else:
            d2_adj[idx] = adj
    return value_adj, d1_adj, d2_adj


def _penalty_loss_grad(problem: ProblemSpec, params, batch: SampleBatch):
    """Soft IC/BC penalty value and its parameter gradient (raw network)."""
    n = batch.size
    w = problem.penalty
    loss = 0.0
    grad = np.zeros(resnet.param_count(params.config))
    if batch.x_initial is not None and w.lam_ic > 0.0:
        X = problem.net_input(np.zeros(n), batch.x_initial, batch.p)
        out = resnet.forward_jets(params, X, want_cache=True)
        r = out.value - problem.ic_at(batch.x_initial)
        loss += w.lam_ic * float(np.mean(r**2))
        grad += resnet.backward(params, out.cache, value_adj=2.0 * w.lam_ic * r / n)
    if batch.x_boundary is not None and w.lam_bc > 0.0:
        X = problem.net_input(batch.t, batch.x_boundary, batch.p)
        out = resnet.forward_jets(params, X, want_cache=True)
        r = out.value - problem.bc_value()
        loss += w.lam_bc * float(np.mean(r**2))
        grad += resnet.backward(params, out.cache, value_adj=2.0 * w.lam_bc * r / n)
    return loss, grad


def strong_batch_loss(problem: ProblemSpec, params, batch: SampleBatch):
    """Mean squared PDE residual over the batch (+ penalties in soft mode).

    Returns (loss, flat parameter gradient).
    """
    if batch.size < 1:
        raise UsageError("empty batch")
    tape = Tape()
    ev = _interior_forward(problem, params, batch, tape)
    r = _interior_residual(problem, batch, ev.u)
    _check_finite(r.value, batch, "residual")
    sq = r.square()
    loss = float(np.mean(sq.value))
    seed = np.full(batch.size, 1.0 / batch.size)
    grad = resnet.backward(
        params, ev.out.cache, *_route_adjoints(tape.backward(sq.id, seed), ev.leaf_order)
    )
    if problem.constraint == "soft":
        ploss, pgrad = _penalty_loss_grad(problem, params, batch)
        loss += ploss
        grad += pgrad
    return loss, grad


def variational_batch_loss(problem: ProblemSpec, params, batch: SampleBatch):
    """Volume-scaled batch mean of the energy integrand (+ soft penalties).

    Returns (loss, flat parameter gradient).
    """
    if batch.size < 1:
        raise UsageError("empty batch")
    if problem.transient:
        raise UsageError("variational loss is implemented for steady problems only")
    tape = Tape()
    ev = _interior_forward(problem, params, batch, tape)
    integrand = _interior_integrand(problem, batch, ev.u)
    _check_finite(integrand.value, batch, "integrand")
    volume = problem.domain.volume
    loss = volume * float(np.mean(integrand.value))
    seed = np.full(batch.size, volume / batch.size)
    grad = resnet.backward(
        params,
        ev.out.cache,
        *_route_adjoints(tape.backward(integrand.id, seed), ev.leaf_order),
    )
    if problem.constraint == "soft":
        ploss, pgrad = _penalty_loss_grad(problem, params, batch)
        loss += ploss
        grad += pgrad
    return loss, grad


def batch_loss(problem: ProblemSpec, params, batch: SampleBatch):
    """Dispatch on the problem's loss mode."""
    if problem.loss_mode == "strong":
        return strong_batch_loss(problem, params, batch)
    return variational_batch_loss(problem, params, batch)


def surrogate_values(problem: ProblemSpec, params, t, x, p) -> np.ndarray:
    """Constrained surrogate values u(t, x, p) for a batch of points."""
    X = problem.net_input(t, x, p)
    net = resnet.forward_jets(params, X).value
    if problem.constraint != "hard":
        return net
    coords = _coordinate_jets(problem, t, x, seed_name="")
    return problem.trial.offset(coords).v + problem.trial.multiplier(coords).v * net


# ----------------------------------------------------------------------
# First-variation verification (energy integrand vs weak form)


@dataclass(frozen=True)
class SmoothField2D:
    """Closed-form scalar field on [-1,1]^2 with analytic derivatives."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], tuple]  # (d/dx, d/dy)
    laplacian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class VariationalIntegrandSpec:
    """Pointwise energy density F(x, y, u, grad u) with first-order terms only."""

    density: Callable  # (x, y, u, ux, uy) -> array


def _midpoint_grid(n: int):
    h = 2.0 / n
    c = -1.0 + h * (np.arange(n) + 0.5)
    xg, yg = np.meshgrid(c, c, indexing="ij")
    return xg, yg, h


def first_variation_check(
    integrand: VariationalIntegrandSpec,
    weak_form: Callable,
    u: SmoothField2D,
    v: SmoothField2D,
    n: int,
    eps: float,
) -> float:
    """|forward-difference variation of the functional - weak-form quadrature|.

    The functional side sees only grid samples of the fields (gradients by
    central differences on the midpoint lattice), while `weak_form`
    consumes analytic gradients:
        weak_form(x, y, u_val, (ux, uy), v_val, (vx, vy)) -> array.
    The result decays like O(eps) + O(h^2); it cannot vanish identically,
    so a small value certifies that the integrand's first variation is the
    weak form.
    """
    if eps <= 0.0 or n < 4:
        raise UsageError("need eps > 0 and at least a 4x4 quadrature grid")
    xg, yg, h = _midpoint_grid(n)
    uv = u.value(xg, yg)
    vv = v.value(xg, yg)

    def functional(field):
        gx, gy = np.gradient(field, h, edge_order=2)
        return float(np.sum(integrand.density(xg, yg, field, gx, gy))) * h * h

    dir_deriv = (functional(uv + eps * vv) - functional(uv)) / eps
    weak = float(np.sum(weak_form(xg, yg, uv, u.grad(xg, yg), vv, v.grad(xg, yg)))) * h * h
    return abs(dir_deriv - weak)


# Reversal rules linking energy-density terms to their first-variation and
# Euler-Lagrange counterparts; consumed by verification fixtures.


@dataclass(frozen=True)
class EulerLagrangeRule:
    name: str
    density: Callable  # (u, ux, uy) -> array
    weak: Callable  # (u, ux, uy, v, vx, vy) -> array
    strong: Callable  # (u, lap_u) -> array, the EL operator applied to u


def el_rule_grad_squared() -> EulerLagrangeRule:
    return EulerLagrangeRule(
        name="grad_squared",
        density=lambda u, ux, uy: ux**2 + uy**2,
        weak=lambda u, ux, uy, v, vx, vy: 2.0 * (ux * vx + uy * vy),
        strong=lambda u, lap: -2.0 * lap,
    )


def el_rule_power(p: float) -> EulerLagrangeRule:
    if p < 2:
        raise UsageError("power rule requires p >= 2")
    return EulerLagrangeRule(
        name=f"abs_power_{p}",
        density=lambda u, ux, uy: np.abs(u) ** p,
        weak=lambda u, ux, uy, v, vx, vy: p * np.abs(u) ** (p - 2) * u * v,
        strong=lambda u, lap: p * np.abs(u) ** (p - 2) * u,
    )


def el_rule_composition(g: Callable, g_prime: Callable, name: str = "g(u)") -> EulerLagrangeRule:
    return EulerLagrangeRule(
        name=name,
        density=lambda u, ux, uy: g(u),
        weak=lambda u, ux, uy, v, vx, vy: g_prime(u) * v,
        strong=lambda u, lap: g_prime(u),
    )
