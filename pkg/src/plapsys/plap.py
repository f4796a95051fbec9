"""Scalar p-Poisson Dirichlet solves by energy minimization.

Solves the discrete problem: minimize

    J(u) = sum_e (1/p) |grad u|^p area_e + sum_e mean_e(f u) area_e

over P1 fields attaining the boundary data h, whose stationarity condition
is the vertex-quadrature weak form of Delta_p u = f (sign convention:
f = Delta_p u, so f = Delta u when p = 2).

The minimizer is computed by damped Newton on the regularized energy with
|grad u|^(p-2) evaluated as (|grad u|^2 + reg^2)^((p-2)/2).  The Newton
system (positive definite for p > 1) is solved by diagonally preconditioned
conjugate gradients; if the linear solve fails or produces an ascent
direction, the step falls back to steepest descent.  Steps are accepted by
Armijo backtracking (sufficient decrease 1e-4, halving, at most 40 trials).
The initial iterate is the discrete 2-harmonic extension of h; for p >= 4
or p <= 1.3 the problem is first solved at p = 2 and continued from there.

Convergence means the euclidean norm of the energy gradient restricted to
interior nodes is <= tol.  Non-convergence is reported, never papered over:
the report carries converged=False and the last iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, cg, spsolve

from .field import Grid, ScalarField

ARMIJO_DECREASE = 1e-4
ARMIJO_FACTOR = 0.5
ARMIJO_MAX_TRIALS = 40
CG_RTOL = 1e-10
DEFAULT_REG = 1e-8
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class PPoissonProblem:
    """Data for one scalar solve: grid, exponent p > 1, source f, boundary h.

    h is stored as a full nodal field; only its boundary values are read.
    """

    grid: Grid
    p: float
    f: ScalarField
    h: ScalarField

    def __post_init__(self):
        if self.p <= 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.f.grid is not self.grid or self.h.grid is not self.grid:
            raise ValueError("f and h must live on the problem grid")


@dataclass
class SolveReport:
    solution: ScalarField
    iterations: int
    energy: float
    gradient_norm: float
    reg: float
    tol: float
    converged: bool
    energy_history: list[float]


def _element_grads(grid: Grid, u: np.ndarray):
    """Per-element gradient G (E, d) and its squared norm (E,)."""
    G = np.einsum("ev,evd->ed", u[grid.elements], grid.grad_phi)
    return G, np.einsum("ed,ed->e", G, G)


def energy(u: ScalarField, p: float, f: ScalarField) -> float:
    """Discrete energy (1/p) sum |grad u|^p area + sum mean(f u) area."""
    grid = u.grid
    _, G2 = _element_grads(grid, u.values)
    grad_term = np.sum(G2 ** (p / 2.0)) * grid.element_measure / p
    fu = (f.values * u.values)[grid.elements].mean(axis=1)
    return float(grad_term + np.sum(fu) * grid.element_measure)


def _energy_reg(grid: Grid, u: np.ndarray, p: float, f: np.ndarray, reg: float) -> float:
    _, G2 = _element_grads(grid, u)
    grad_term = np.sum((G2 + reg * reg) ** (p / 2.0)) * grid.element_measure / p
    return float(grad_term + np.dot(grid.lumped * f, u))


def flux_vector(grid: Grid, u: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Nodal vector t_i = sum_e area W_e (G_e . grad phi_i), given element weights."""
    G, _ = _element_grads(grid, u)
    contrib = np.einsum("ed,evd->ev", G, grid.grad_phi) * weights[:, None]
    out = np.zeros(grid.n_nodes)
    np.add.at(out, grid.elements, contrib * grid.element_measure)
    return out


def residual_vector(grid: Grid, u: np.ndarray, p: float, f: np.ndarray, reg: float) -> np.ndarray:
    """Gradient of the regularized energy at u, over all nodes."""
    _, G2 = _element_grads(grid, u)
    W = (G2 + reg * reg) ** ((p - 2.0) / 2.0)
    return flux_vector(grid, u, W) + grid.lumped * f


def _assemble_matrix(grid: Grid, W: np.ndarray, Wp: np.ndarray, G: np.ndarray) -> csr_matrix:
    """Full-node matrix sum_e area [W gphi_a.gphi_b + Wp (G.gphi_a)(G.gphi_b)]."""
    gp = grid.grad_phi
    dot_ab = np.einsum("ead,ebd->eab", gp, gp)
    Ke = W[:, None, None] * dot_ab
    if Wp is not None:
        t = np.einsum("ed,ead->ea", G, gp)
        Ke = Ke + Wp[:, None, None] * (t[:, :, None] * t[:, None, :])
    Ke = Ke * grid.element_measure
    m = grid.elements.shape[1]
    rows = np.repeat(grid.elements, m, axis=1).ravel()
    cols = np.tile(grid.elements, (1, m)).ravel()
    return csr_matrix((Ke.ravel(), (rows, cols)), shape=(grid.n_nodes, grid.n_nodes))


def stiffness_matrix(grid: Grid) -> csr_matrix:
    """P1 Laplace stiffness (the p = 2 case, no regularization needed)."""
    ones = np.ones(grid.n_elements)
    return _assemble_matrix(grid, ones, None, None)


def harmonic_extension(grid: Grid, h: ScalarField) -> ScalarField:
    """Discrete 2-harmonic extension of the boundary values of h."""
    A = stiffness_matrix(grid)
    I, B = grid.interior, grid.boundary
    u = np.zeros(grid.n_nodes)
    u[B] = h.values[B]
    rhs = -A[np.ix_(I, B)] @ u[B]
    u[I] = spsolve(A[np.ix_(I, I)].tocsc(), rhs)
    return ScalarField(grid, u)


def _newton_system(grid: Grid, u: np.ndarray, p: float, reg: float) -> csr_matrix:
    G, G2 = _element_grads(grid, u)
    base = G2 + reg * reg
    W = base ** ((p - 2.0) / 2.0)
    Wp = (p - 2.0) * base ** ((p - 4.0) / 2.0)
    return _assemble_matrix(grid, W, Wp, G)


def solve_p_poisson(
    prob: PPoissonProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    reg: float = DEFAULT_REG,
) -> SolveReport:
    """Minimize the regularized energy; see the module docstring for the scheme."""
    grid, p = prob.grid, prob.p
    fv = prob.f.values
    I = grid.interior

    if (p >= 4.0 or p <= 1.3) and p != 2.0:
        base = solve_p_poisson(replace(prob, p=2.0), tol=tol, max_iter=max_iter, reg=reg)
        u = base.solution.values.copy()
    else:
        u = harmonic_extension(grid, prob.h).values.copy()
    u[grid.boundary] = prob.h.values[grid.boundary]

    history = [_energy_reg(grid, u, p, fv, reg)]
    iterations = 0
    converged = False
    while True:
        g = residual_vector(grid, u, p, fv, reg)[I]
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        H = _newton_system(grid, u, p, reg)[np.ix_(I, I)]
        diag = H.diagonal()
        M = LinearOperator(H.shape, matvec=lambda z: z / diag)
        delta, info = cg(H, -g, rtol=CG_RTOL, atol=0.0, M=M)
        slope = float(g @ delta)
        if info != 0 or slope >= 0.0 or not np.isfinite(delta).all():
            delta = -g
            slope = -gnorm * gnorm

        step, new_u, new_energy = _armijo(grid, u, p, fv, reg, I, delta, slope, history[-1])
        if step is None and not np.array_equal(delta, -g):
            delta = -g
            slope = -gnorm * gnorm
            step, new_u, new_energy = _armijo(
                grid, u, p, fv, reg, I, delta, slope, history[-1]
            )
        if step is None:
            break  # stalled: no acceptable decrease in either direction
        u = new_u
        history.append(new_energy)
        iterations += 1

    sol = ScalarField(grid, u)
    return SolveReport(
        solution=sol,
        iterations=iterations,
        energy=energy(sol, p, prob.f),
        gradient_norm=gnorm,
        reg=reg,
        tol=tol,
        converged=converged,
        energy_history=history,
    )


def _armijo(grid, u, p, fv, reg, I, delta, slope, current):
    t = 1.0
    for _ in range(ARMIJO_MAX_TRIALS):
        trial = u.copy()
        trial[I] += t * delta
        val = _energy_reg(grid, trial, p, fv, reg)
        if val <= current + ARMIJO_DECREASE * t * slope:
            return t, trial, val
        t *= ARMIJO_FACTOR
    return None, None, None
