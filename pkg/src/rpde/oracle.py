"""Monte Carlo finite-difference reference solver.

Ground truth for validating trained surrogates: ensembles of deterministic
finite-difference solves over draws of the random parameter vector.

* 1D transient diffusion: implicit Euler in time, conservative flux form
  in space with the diffusivity evaluated at cell faces, direct
  tridiagonal (sparse LU) solves.
* 2D conduction: 5-point variable-coefficient stencil with arithmetic
  face averaging of the conductivity, Jacobi-preconditioned conjugate
  gradients to relative tolerance 1e-12. The hole boundary is staircase
  approximated: nodes inside the hole are removed and their outside
  neighbours pinned to the Dirichlet value (first-order treatment, so
  validation probes should sit away from the rim).

Ensemble members draw their parameters from a counter-based stream keyed
by the member index, so results are identical however the members are
distributed over worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import rng
from .errors import NumericFault, UsageError
from .problems import ProblemSpec, build_problem

_RESIDUAL_TOL = 1e-10


def _check_residual(a_matvec, u, b, context: str):
    r = np.linalg.norm(a_matvec(u) - b)
    scale = max(np.linalg.norm(b), 1e-300)
    if not np.isfinite(r) or r / scale > _RESIDUAL_TOL:
        raise NumericFault(f"{context}: linear solve residual {r / scale:.2e}")


# ----------------------------------------------------------------------
# 1D diffusion


def _face_diffusivity(field, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    faces = 0.5 * (x[:-1] + x[1:])
    a, _ = field(faces, np.broadcast_to(p, (faces.size, p.size)))
    return a


def _steady_matrix(a_face: np.ndarray, h: float) -> sp.csc_matrix:
    lo, hi = a_face[:-1], a_face[1:]  # faces below/above each interior node
    main = (lo + hi) / h**2
    off = -hi[:-1] / h**2
    return sp.diags([off, main, off], offsets=(-1, 0, 1), format="csc")


def fd_steady_diffusion_1d(field, p: np.ndarray, c: float, nx: int):
    """Solve -(a u')' = c on [0,1], u(0)=u(1)=0, on nx uniform nodes."""
    if nx < 3:
        raise UsageError("need nx >= 3")
    x = np.linspace(0.0, 1.0, nx)
    h = x[1] - x[0]
    a_face = _face_diffusivity(field, x, np.asarray(p, dtype=float))
    A = _steady_matrix(a_face, h)
    b = np.full(nx - 2, float(c))
    u_in = spla.splu(A).solve(b)
    _check_residual(lambda v: A @ v, u_in, b, "steady diffusion")
    u = np.zeros(nx)
    u[1:-1] = u_in
    return x, u


def fd_diffusion_1d(field, p: np.ndarray, c: float, nx: int, nt: int, T: float = 1.0):
    """Implicit-Euler space-time solution of u_t - (a u')' = c.

    Dirichlet zero at both ends, initial profile 10(x - x^2). Returns
    (x nodes, t levels, U of shape (nt+1, nx)).
    """
    if nx < 3 or nt < 1:
        raise UsageError("need nx >= 3 and nt >= 1")
    x = np.linspace(0.0, 1.0, nx)
    t = np.linspace(0.0, T, nt + 1)
    h = x[1] - x[0]
    dt = T / nt
    a_face = _face_diffusivity(field, x, np.asarray(p, dtype=float))
    A = _steady_matrix(a_face, h)
    system = (sp.identity(nx - 2, format="csc") + dt * A).tocsc()
    solver = spla.splu(system)
    U = np.zeros((nt + 1, nx))
    U[0] = 10.0 * (x - x * x)
    u = U[0, 1:-1].copy()
    for m in range(nt):
        b = u + dt * c
        u = solver.solve(b)
        _check_residual(lambda v: system @ v, u, b, f"diffusion step {m}")
        U[m + 1, 1:-1] = u
    return x, t, U


# ----------------------------------------------------------------------
# 2D conduction


@dataclass
class Grid2D:
    """Uniform node grid on [-1,1]^2 with an optional staircase hole."""

    n: int  # intervals per side; h = 2/n
    hole_radius: float = 0.0

    def __post_init__(self):
        if self.n < 4:
            raise UsageError("need at least 4 intervals per side")
        self.h = 2.0 / self.n
        c = np.linspace(-1.0, 1.0, self.n + 1)
        self.xg, self.yg = np.meshgrid(c, c, indexing="ij")
        inside_hole = self.xg**2 + self.yg**2 < self.hole_radius**2
        pinned = np.zeros_like(inside_hole)
        pinned[0, :] = pinned[-1, :] = pinned[:, 0] = pinned[:, -1] = True
        if self.hole_radius > 0.0:
            rim = np.zeros_like(inside_hole)
            rim[1:, :] |= inside_hole[:-1, :]
            rim[:-1, :] |= inside_hole[1:, :]
            rim[:, 1:] |= inside_hole[:, :-1]
            rim[:, :-1] |= inside_hole[:, 1:]
            pinned |= rim & ~inside_hole
        self.inside_hole = inside_hole
        self.pinned = pinned & ~inside_hole
        self.unknown = ~inside_hole & ~pinned
        self.index = -np.ones(inside_hole.shape, dtype=int)
        self.index[self.unknown] = np.arange(int(self.unknown.sum()))

    @property
    def n_unknowns(self) -> int:
        return int(self.unknown.sum())

    def node_of(self, x: float, y: float) -> tuple[int, int]:
        i = round((x + 1.0) / self.h)
        j = round((y + 1.0) / self.h)
        if not (0 <= i <= self.n and 0 <= j <= self.n):
            raise UsageError(f"probe ({x}, {y}) outside the grid")
        if abs(self.xg[i, j] - x) > 1e-9 or abs(self.yg[i, j] - y) > 1e-9:
            raise UsageError(f"probe ({x}, {y}) does not lie on the oracle grid")
        if self.inside_hole[i, j]:
            raise UsageError(f"probe ({x}, {y}) lies inside the hole")
        return i, j


def fd_poisson_2d(field, p: np.ndarray, forcing, grid: Grid2D) -> np.ndarray:
    """Solve -div(k grad u) = f with zero Dirichlet data on `grid`.

    `field(x, y, p)` gives nodal conductivity; `forcing(x, y)` the source.
    Returns nodal values with zeros on pinned/hole nodes.
    """
    p = np.asarray(p, dtype=float)
    k = field(
        grid.xg.ravel(), grid.yg.ravel(), np.broadcast_to(p, (grid.xg.size, p.size))
    ).reshape(grid.xg.shape)
    f = np.asarray(forcing(grid.xg, grid.yg), dtype=float)
    h2 = grid.h**2
    kxf = 0.5 * (k[:-1, :] + k[1:, :])  # faces between (i,j) and (i+1,j)
    kyf = 0.5 * (k[:, :-1] + k[:, 1:])

    iu, ju = np.nonzero(grid.unknown)
    me = grid.index[iu, ju]
    nn = grid.n_unknowns
    face = {
        (1, 0): kxf[iu, ju],
        (-1, 0): kxf[iu - 1, ju],
        (0, 1): kyf[iu, ju],
        (0, -1): kyf[iu, ju - 1],
    }
    rows = [me]
    cols = [me]
    vals = [sum(face.values()) / h2]
    for (di, dj), kf in face.items():
        nb_unknown = grid.unknown[iu + di, ju + dj]
        rows.append(me[nb_unknown])
        cols.append(grid.index[iu + di, ju + dj][nb_unknown])
        vals.append(-kf[nb_unknown] / h2)
        # pinned and hole-rim neighbours hold u = 0: no RHS contribution
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nn, nn),
    )
    b = f[iu, ju]

    diag = A.diagonal()
    precond = spla.LinearOperator((nn, nn), matvec=lambda v: v / diag)
    u_in, info = _cg(A, b, precond)
    if info != 0:
        raise NumericFault(f"conjugate gradient failed to converge (info={info})")
    _check_residual(lambda v: A @ v, u_in, b, "conduction solve")
    u = np.zeros_like(grid.xg)
    u[grid.unknown] = u_in
    return u


def _cg(A, b, M):
    if not np.any(b):
        return np.zeros_like(b), 0
    try:
        return spla.cg(A, b, rtol=1e-12, atol=0.0, M=M, maxiter=20000)
    except TypeError:  # older scipy uses `tol`
        return spla.cg(A, b, tol=1e-12, atol=0.0, M=M, maxiter=20000)


# ----------------------------------------------------------------------
# Ensembles


@dataclass
class EnsembleRun:
    """Per-member parameter draws and probe values for one oracle run."""

    seed: int
    probes: np.ndarray  # (n_probes, n_coords)
    p: np.ndarray  # (M, d)
    values: np.ndarray  # (M, n_probes)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def member_params(problem: ProblemSpec, seed: int, member: int) -> np.ndarray:
    gen = rng.stream(seed, rng.STREAM_ORACLE, counter=member)
    return gen.uniform(0.0, 1.0, size=problem.d)


def _diffusion_probe_values(problem, p, probes, nx, nt):
    x, t, U = fd_diffusion_1d(problem.field, p, problem.c, nx, nt, problem.domain.time_horizon)
    vals = np.empty(len(probes))
    for q, (tq, xq) in enumerate(probes):
        mi = int(round(tq / (t[1] - t[0])))
        ni = int(round(xq / (x[1] - x[0])))
        if abs(t[mi] - tq) > 1e-9 or abs(x[ni] - xq) > 1e-9:
            raise UsageError(f"probe (t={tq}, x={xq}) does not lie on the oracle grid")
        vals[q] = U[mi, ni]
    return vals


def _heat_probe_values(problem, p, probes, grid: Grid2D):
    u = fd_poisson_2d(problem.field, p, problem.forcing, grid)
    vals = np.empty(len(probes))
    for q, (xq, yq) in enumerate(probes):
        i, j = grid.node_of(xq, yq)
        vals[q] = u[i, j]
    return vals


def solve_member(problem: ProblemSpec, p: np.ndarray, probes, nx=201, nt=200, n2d=64):
    """One deterministic solve; probe values in probe order."""
    if problem.kind == "diffusion":
        return _diffusion_probe_values(problem, p, probes, nx, nt)
    grid = Grid2D(n2d, hole_radius=problem.domain.hole_radius)
    return _heat_probe_values(problem, p, probes, grid)


def _pool_member(args):
    tag, d, seed, member, probes, nx, nt, n2d = args
    problem = build_problem(tag, d=d)
    p = member_params(problem, seed, member)
    return member, p, solve_member(problem, p, probes, nx=nx, nt=nt, n2d=n2d)


def mc_ensemble(
    problem: ProblemSpec,
    probes,
    m: int,
    seed: int,
    threads: int = 1,
    nx: int = 201,
    nt: int = 200,
    n2d: int = 64,
) -> EnsembleRun:
    """M independent draws and solves; reproducible from (problem, seed)."""
    if m < 1:
        raise UsageError("need at least one ensemble member")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    p_all = np.empty((m, problem.d))
    values = np.empty((m, probes.shape[0]))
    from .problems import TAGS

    if threads > 1 and problem.tag in TAGS:
        args = [(problem.tag, problem.d, seed, i, probes, nx, nt, n2d) for i in range(m)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for member, p, vals in pool.map(_pool_member, args, chunksize=max(1, m // (8 * threads))):
                p_all[member] = p
                values[member] = vals
    else:
        for i in range(m):
            try:
                p_all[i] = member_params(problem, seed, i)
                values[i] = solve_member(problem, p_all[i], probes, nx=nx, nt=nt, n2d=n2d)
            except NumericFault as exc:
                raise NumericFault(f"ensemble member {i}: {exc}") from exc
    return EnsembleRun(seed=seed, probes=probes, p=p_all, values=values)
