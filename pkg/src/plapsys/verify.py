"""Weak-form classification, the shift test, and convergence studies.

A pair (u, v) is probed against the coupled system

    -Delta_p u + phi(x, u, v) = 0,   -Delta_p v + psi(x, u, v) = 0

through the discrete weak residuals against every interior nodal hat eta_i:

    R1(eta_i) = sum_e |grad u|^(p-2) grad u . grad eta_i area_e
              + sum_e mean_e(phi(., u, v) eta_i) area_e

and the psi analogue R2.  Verdicts: solution when every |R| <= tol,
supersolution when every R >= -tol, subsolution when every R <= tol,
neither otherwise.  The test functions are exactly the interior hat basis
(nonnegative, spanning the discrete zero-boundary space).

The shift test realizes the comparison statement that adding a constant
alpha > 0 to u and beta >= 0 to v preserves supersolutions when the
coupling is monotone in both state arguments: the gradient term is
untouched by constant shifts and monotonicity can only increase the
reaction term.  Monotonicity is a gated precondition checked by sampling
on the ranges the shift actually visits; a precondition failure is
reported distinctly from a shift-test failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import Coupling, SampleSpec, check_monotone, nemytskii
from .field import Grid, ScalarField, lq_norm
from .plap import PPoissonProblem, flux_vector, solve_p_poisson

DEFAULT_CLASS_TOL = 1e-6


def _raw_weights(G2: np.ndarray, p: float) -> np.ndarray:
    """|grad u|^(p-2) per element, with the continuous extension 0 at grad u = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        W = G2 ** ((p - 2.0) / 2.0)
    return np.where(G2 > 0.0, W, 0.0)


def _equation_residual(u: ScalarField, reaction: ScalarField, p: float) -> np.ndarray:
    """Full-node residual vector of one equation; rows at interior nodes are
    the weak residuals against the corresponding hats."""
    grid = u.grid
    G = np.einsum("ev,evd->ed", u.values[grid.elements], grid.grad_phi)
    G2 = np.einsum("ed,ed->e", G, G)
    W = _raw_weights(G2, p)
    return flux_vector(grid, u.values, W) + grid.lumped * reaction.values


def system_residuals(
    u: ScalarField, v: ScalarField, c: Coupling, p: float
) -> tuple[np.ndarray, np.ndarray]:
    """Interior-hat weak residuals (R1, R2) of the coupled system at (u, v)."""
    phi_f, psi_f = nemytskii(c, u, v)
    I = u.grid.interior
    R1 = _equation_residual(u, phi_f, p)[I]
    R2 = _equation_residual(v, psi_f, p)[I]
    return R1, R2


def residual_functional(
    u: ScalarField, v: ScalarField, c: Coupling, p: float, eta: ScalarField
) -> tuple[float, float]:
    """(R1(eta), R2(eta)) for a test field eta vanishing on the boundary."""
    grid = u.grid
    B = grid.boundary
    if np.any(eta.values[B] != 0.0):
        raise ValueError("test function must vanish on the boundary")
    R1, R2 = system_residuals(u, v, c, p)
    w = eta.values[grid.interior]
    return float(R1 @ w), float(R2 @ w)


@dataclass
class Classification:
    """Weak-form verdict for a candidate pair, with the per-hat residuals."""

    verdict: str  # 'solution' | 'supersolution' | 'subsolution' | 'neither'
    tol: float
    hat_nodes: np.ndarray  # global node index of each interior hat
    R1: np.ndarray
    R2: np.ndarray

    @property
    def max_abs_residual(self) -> float:
        return float(max(np.abs(self.R1).max(), np.abs(self.R2).max()))

    def offending_hats(self) -> list[int]:
        """Hats breaking the 'solution' verdict at the stored tolerance."""
        bad = (np.abs(self.R1) > self.tol) | (np.abs(self.R2) > self.tol)
        return [int(n) for n in self.hat_nodes[bad]]

    def csv_lines(self) -> list[str]:
        lines = ["hat_index,R1,R2"]
        for n, r1, r2 in zip(self.hat_nodes, self.R1, self.R2):
            lines.append(f"{n},{r1:.17g},{r2:.17g}")
        return lines


def weak_residuals(
    u: ScalarField,
    v: ScalarField,
    c: Coupling,
    p: float,
    tol: float = DEFAULT_CLASS_TOL,
) -> Classification:
    """Classify (u, v) as solution / supersolution / subsolution / neither."""
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    R1, R2 = system_residuals(u, v, c, p)
    lo = min(R1.min(), R2.min())
    hi = max(R1.max(), R2.max())
    if max(abs(lo), abs(hi)) <= tol:
        verdict = "solution"
    elif lo >= -tol:
        verdict = "supersolution"
    elif hi <= tol:
        verdict = "subsolution"
    else:
        verdict = "neither"
    return Classification(verdict, tol, u.grid.interior.copy(), R1, R2)


@dataclass
class ShiftReport:
    """Outcome of the constant-shift comparison test.

    precondition_ok gates the result: when False, `reason` says which
    precondition failed (classification or monotonicity) and `passed` is
    None rather than a verdict on the test itself.
    """

    alpha: float
    beta: float
    base_verdict: str
    precondition_ok: bool
    reason: str
    shifted_verdicts: list[tuple[str, str]]  # (direction, verdict)
    passed: bool | None


def _shifted(w: ScalarField, delta: float) -> ScalarField:
    return ScalarField(w.grid, w.values + delta)


def shift_test(
    u: ScalarField,
    v: ScalarField,
    c: Coupling,
    p: float,
    alpha: float,
    beta: float,
    tol: float = DEFAULT_CLASS_TOL,
    nu: int = 41,
) -> ShiftReport:
    """Check that (u + alpha, v + beta) stays a supersolution (alpha > 0,
    beta >= 0), or (u - alpha, v - beta) a subsolution for subsolution input."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if beta < 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    base = weak_residuals(u, v, c, p, tol)
    if base.verdict == "supersolution":
        directions = ["up"]
    elif base.verdict == "subsolution":
        directions = ["down"]
    elif base.verdict == "solution":
        directions = ["up", "down"]
    else:
        return ShiftReport(
            alpha, beta, base.verdict, False,
            "input pair classifies as neither super- nor subsolution",
            [], None,
        )

    # monotonicity gate on the range of states the shift visits
    umin, umax = float(u.values.min()), float(u.values.max())
    vmin, vmax = float(v.values.min()), float(v.values.max())
    spec = SampleSpec(
        points=SampleSpec.for_box(u.grid.box).points,
        u_range=(umin - alpha, umax + alpha),
        v_range=(vmin - beta, vmax + beta),
        nu=nu,
        nv=nu,
    )
    mono = check_monotone(c, spec)
    if not mono.monotone_pass:
        return ShiftReport(
            alpha, beta, base.verdict, False,
            f"coupling is not monotone on the sampled range "
            f"({len(mono.monotone_violations)} violating pairs)",
            [], None,
        )

    results = []
    ok = True
    for direction in directions:
        if direction == "up":
            shifted = weak_residuals(_shifted(u, alpha), _shifted(v, beta), c, p, tol)
            keep = shifted.verdict in ("supersolution", "solution")
        else:
            shifted = weak_residuals(_shifted(u, -alpha), _shifted(v, -beta), c, p, tol)
            keep = shifted.verdict in ("subsolution", "solution")
        results.append((direction, shifted.verdict))
        ok = ok and keep
    return ShiftReport(alpha, beta, base.verdict, True, "", results, ok)


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class StudyRow:
    n: int
    error_max: float
    error_l2: float
    order: float  # pairwise order vs the previous row; nan on the first row


@dataclass
class StudyReport:
    case: str
    rows: list[StudyRow]
    fitted_order: float  # least-squares slope over all rows; nan when exact
    exact: bool

    def csv_lines(self) -> list[str]:
        lines = ["n,error_max,error_l2,order"]
        for row in self.rows:
            lines.append(
                f"{row.n},{row.error_max:.17g},{row.error_l2:.17g},{row.order:.17g}"
            )
        return lines


EXACTNESS_FLOOR = 1e-8


def _case_sinsin(n: int):
    from .field import from_callable

    grid = Grid(2, (0.0, 1.0, 0.0, 1.0), n)
    f = from_callable(grid, lambda x, y: -2.0 * math.pi**2 * np.sin(math.pi * x) * np.sin(math.pi * y))
    h = from_callable(grid, lambda x, y: np.zeros_like(x))
    exact = from_callable(grid, lambda x, y: np.sin(math.pi * x) * np.sin(math.pi * y))
    return PPoissonProblem(grid, 2.0, f, h), exact


def _case_affine(n: int):
    from .field import from_callable

    grid = Grid(2, (0.0, 1.0, 0.0, 1.0), n)
    f = from_callable(grid, lambda x, y: np.zeros_like(x))
    h = from_callable(grid, lambda x, y: 2.0 * x + 3.0 * y)
    return PPoissonProblem(grid, 2.5, f, h), h


def _case_p3_1d(n: int):
    from .field import from_callable

    grid = Grid(1, (0.0, 1.0), n)
    f = from_callable(grid, lambda x: np.ones_like(x))
    h = from_callable(grid, lambda x: np.zeros_like(x))
    # |u'|^(p-2) u' = x - 1/2 integrated with zero boundary values, p = 3
    pp = 1.5  # p/(p-1)
    exact = from_callable(
        grid, lambda x: (1.0 / pp) * (np.abs(x - 0.5) ** pp - 0.5**pp)
    )
    return PPoissonProblem(grid, 3.0, f, h), exact


STUDY_CASES = {
    "sinsin": _case_sinsin,
    "affine": _case_affine,
    "p3-1d": _case_p3_1d,
}


def convergence_study(
    case: str, resolutions: list[int], solver_tol: float = 1e-8
) -> StudyReport:
    """Solve the named manufactured problem at each resolution and fit the
    observed convergence order of the max nodal error against n."""
    if case not in STUDY_CASES:
        raise ValueError(f"unknown study case {case!r}; have {sorted(STUDY_CASES)}")
    if len(resolutions) < 3:
        raise ValueError("need at least 3 resolutions")
    if any(a >= b for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("resolutions must be strictly increasing")
    build = STUDY_CASES[case]
    rows = []
    for n in resolutions:
        prob, exact = build(n)
        rep = solve_p_poisson(prob, tol=solver_tol)
        if not rep.converged:
            raise RuntimeError(
                f"study case {case!r} did not converge at n={n} "
                f"(gradient norm {rep.gradient_norm:.3e})"
            )
        diff = rep.solution.values - exact.values
        e_max = float(np.abs(diff).max())
        e_l2 = lq_norm(ScalarField(prob.grid, diff), 2.0)
        if rows and rows[-1].error_max > 0 and e_max > 0:
            order = math.log(rows[-1].error_max / e_max) / math.log(n / rows[-1].n)
        else:
            order = math.nan
        rows.append(StudyRow(n, e_max, e_l2, order))

    exact_flag = all(r.error_max <= EXACTNESS_FLOOR for r in rows)
    if exact_flag:
        fitted = math.nan
    else:
        ln = np.log([r.n for r in rows])
        le = np.log([max(r.error_max, 1e-300) for r in rows])
        fitted = float(-np.polyfit(ln, le, 1)[0])
    return StudyReport(case, rows, fitted, exact_flag)
