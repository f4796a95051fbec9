"""Coupling terms phi(x, u, v), psi(x, u, v) and their structural checks.

A Coupling bundles the two reaction expressions with the growth constants
(a1, a2, b1, b2) and the exponent p they refer to:

    |phi(x, u, v)| <= a1 |u|^(p-1) + a2 |v|^(p-1)
    |psi(x, u, v)| <= b1 |v|^(p-1) + b2 |u|^(p-1)

check_growth probes this bound and check_monotone probes coordinatewise
monotonicity of both functions on a bounded sample lattice; both report
violations instead of trusting declared constants.

The homogeneous transform shifts the arguments by boundary lifts h, k:
phit(x, u, v) = phi(x, u + h(x), v + k(x)).  Splitting the shifted growth
bound with the elementary inequality
|a+b|^q <= (1+eps)^(q-ish)|a|^q + (1+1/eps)^(q-ish)|b|^q gives, for any
eps > 0, the stored constants

    a_i' = a_i (1 + eps)^(p-1),   b_i' = b_i (1 + eps)^(p-1)
    c(x)  = (1 + 1/eps)^(p-1) (a1 |h(x)|^(p-1) + a2 |k(x)|^(p-1))
    c'(x) = (1 + 1/eps)^(p-1) (b1 |h(x)|^(p-1) + b2 |k(x)|^(p-1))

so that |phit| <= a1'|u|^(p-1) + a2'|v|^(p-1) + c(x), with the psi bound
using the primed b constants and c'(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .field import Grid, ScalarField


@dataclass(frozen=True)
class Coupling:
    """Reaction pair with declared growth constants for exponent p."""

    phi: ex.Expr
    psi: ex.Expr
    a1: float
    a2: float
    b1: float
    b2: float
    p: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
        if self.p <= 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")


def power_family(a1: float, a2: float, b1: float, b2: float, p: float) -> Coupling:
    """Built-in odd-power coupling attaining its growth bound with equality:

    phi = a1 odd_pow(u, p-1) + a2 odd_pow(v, p-1)
    psi = b1 odd_pow(v, p-1) + b2 odd_pow(u, p-1)
    """
    q = p - 1.0
    phi = ex.parse(f"{a1!r}*odd_pow(u,{q!r})+{a2!r}*odd_pow(v,{q!r})")
    psi = ex.parse(f"{b1!r}*odd_pow(v,{q!r})+{b2!r}*odd_pow(u,{q!r})")
    return Coupling(phi, psi, a1, a2, b1, b2, p)


def _bindings(grid: Grid, u: np.ndarray, v: np.ndarray) -> dict[str, np.ndarray]:
    out = {"x": grid.coords[:, 0], "u": u, "v": v}
    if grid.d == 2:
        out["y"] = grid.coords[:, 1]
    return out


def _eval_on_nodes(e: ex.Expr, grid: Grid, bindings: dict[str, np.ndarray]) -> np.ndarray:
    try:
        vals = ex.evaluate_arrays(e, bindings)
    except ex._IndexedDomainError as err:
        where = ", ".join(f"{c:.17g}" for c in grid.coords[err.index])
        raise ex.EvaluationDomainError(
            f"{err} at node {err.index} ({where})"
        ) from err
    return np.broadcast_to(vals, (grid.n_nodes,)).astype(float, copy=True)


def nemytskii(c: Coupling, u: ScalarField, v: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Nodewise (phi(x, u(x), v(x)), psi(x, u(x), v(x))).

    Evaluation-domain errors are reported with the offending node's index
    and coordinates.
    """
    grid = u.grid
    if v.grid is not grid:
        raise ValueError("u and v must share a grid")
    b = _bindings(grid, u.values, v.values)
    return (
        ScalarField(grid, _eval_on_nodes(c.phi, grid, b)),
        ScalarField(grid, _eval_on_nodes(c.psi, grid, b)),
    )


@dataclass(frozen=True)
class TransformedCoupling:
    """Coupling shifted by boundary lifts h, k, with the split-bound data."""

    base: Coupling
    h: ScalarField
    k: ScalarField
    eps: float

    def __post_init__(self):
        if self.eps <= 0.0 or not np.isfinite(self.eps):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if self.h.grid is not self.k.grid:
            raise ValueError("h and k must share a grid")

    @property
    def grid(self) -> Grid:
        return self.h.grid

    @property
    def a1_prime(self) -> float:
        return self.base.a1 * (1.0 + self.eps) ** (self.base.p - 1.0)

    @property
    def a2_prime(self) -> float:
        return self.base.a2 * (1.0 + self.eps) ** (self.base.p - 1.0)

    @property
    def b1_prime(self) -> float:
        return self.base.b1 * (1.0 + self.eps) ** (self.base.p - 1.0)

    @property
    def b2_prime(self) -> float:
        return self.base.b2 * (1.0 + self.eps) ** (self.base.p - 1.0)

    def c_field(self) -> ScalarField:
        q = self.base.p - 1.0
        factor = (1.0 + 1.0 / self.eps) ** q
        vals = factor * (
            self.base.a1 * np.abs(self.h.values) ** q
            + self.base.a2 * np.abs(self.k.values) ** q
        )
        return ScalarField(self.grid, vals)

    def c_prime_field(self) -> ScalarField:
        q = self.base.p - 1.0
        factor = (1.0 + 1.0 / self.eps) ** q
        vals = factor * (
            self.base.b1 * np.abs(self.h.values) ** q
            + self.base.b2 * np.abs(self.k.values) ** q
        )
        return ScalarField(self.grid, vals)

    def nemytskii(self, u: ScalarField, v: ScalarField) -> tuple[ScalarField, ScalarField]:
        """(phit, psit) at (u, v), i.e. the base pair at (u + h, v + k)."""
        grid = u.grid
        if grid is not self.grid or v.grid is not grid:
            raise ValueError("fields must live on the transform's grid")
        b = _bindings(grid, u.values + self.h.values, v.values + self.k.values)
        return (
            ScalarField(grid, _eval_on_nodes(self.base.phi, grid, b)),
            ScalarField(grid, _eval_on_nodes(self.base.psi, grid, b)),
        )


def transform(c: Coupling, h: ScalarField, k: ScalarField, eps: float) -> TransformedCoupling:
    return TransformedCoupling(c, h, k, eps)


@dataclass(frozen=True)
class SampleSpec:
    """Bounded lattice on which the hypothesis checks probe the coupling.

    `points` is an (m, 2) array of spatial sample coordinates (the second
    column is ignored on 1-D domains); the state lattices are nu and nv
    evenly spaced values spanning u_range and v_range.
    """

    points: np.ndarray
    u_range: tuple[float, float] = (-10.0, 10.0)
    v_range: tuple[float, float] = (-10.0, 10.0)
    nu: int = 41
    nv: int = 41

    @staticmethod
    def default() -> "SampleSpec":
        return SampleSpec.for_box((0.0, 1.0, 0.0, 1.0))

    @staticmethod
    def for_box(box: tuple[float, ...], m_per_axis: int = 8) -> "SampleSpec":
        """8 x 8 spatial lattice over the box (64 points)."""
        if len(box) == 2:
            x = np.linspace(box[0], box[1], m_per_axis * m_per_axis)
            pts = np.stack([x, np.zeros_like(x)], axis=1)
        else:
            x = np.linspace(box[0], box[1], m_per_axis)
            y = np.linspace(box[2], box[3], m_per_axis)
            X, Y = np.meshgrid(x, y)
            pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        return SampleSpec(points=pts)

    def lattices(self):
        uu = np.linspace(self.u_range[0], self.u_range[1], self.nu)
        vv = np.linspace(self.v_range[0], self.v_range[1], self.nv)
        return uu, vv


@dataclass
class HypothesisReport:
    """Outcome of a growth or monotonicity probe.

    monotone_violations rows are tuples
    (function, sweep variable, x, y, fixed other value, t, t_next, f(t), f(t_next)).
    """

    n_samples: int
    growth_max_violation: float | None = None
    growth_pass: bool | None = None
    monotone_violations: list = field(default_factory=list)
    monotone_pass: bool | None = None


GROWTH_TOL = 1e-12


def _sample_eval(e: ex.Expr, spec: SampleSpec):
    """Evaluate e on the (points, u-lattice, v-lattice) product, shape (m, nu, nv)."""
    uu, vv = spec.lattices()
    b = {
        "x": spec.points[:, 0][:, None, None],
        "y": spec.points[:, 1][:, None, None],
        "u": uu[None, :, None],
        "v": vv[None, None, :],
    }
    vals = ex.evaluate_arrays(e, b)
    return np.broadcast_to(vals, (len(spec.points), spec.nu, spec.nv))


def check_growth(c: Coupling, spec: SampleSpec | None = None) -> HypothesisReport:
    """Probe |phi| <= a1|u|^(p-1) + a2|v|^(p-1) and the psi analogue.

    Pass iff the worst excess over the declared bound is <= 1e-12.
    """
    spec = spec or SampleSpec.default()
    uu, vv = spec.lattices()
    q = c.p - 1.0
    pu = np.abs(uu) ** q
    pv = np.abs(vv) ** q
    phi = _sample_eval(c.phi, spec)
    psi = _sample_eval(c.psi, spec)
    exc_phi = np.abs(phi) - (c.a1 * pu[None, :, None] + c.a2 * pv[None, None, :])
    exc_psi = np.abs(psi) - (c.b1 * pv[None, None, :] + c.b2 * pu[None, :, None])
    worst = max(float(exc_phi.max()), float(exc_psi.max()), 0.0)
    return HypothesisReport(
        n_samples=phi.size + psi.size,
        growth_max_violation=worst,
        growth_pass=worst <= GROWTH_TOL,
    )


def check_monotone(c: Coupling, spec: SampleSpec | None = None) -> HypothesisReport:
    """Probe that phi and psi are non-decreasing in u and in v separately.

    Every adjacent sample pair that decreases is recorded.
    """
    spec = spec or SampleSpec.default()
    uu, vv = spec.lattices()
    violations = []
    for name, e in (("phi", c.phi), ("psi", c.psi)):
        vals = _sample_eval(e, spec)
        du = np.diff(vals, axis=1)
        for m, i, j in np.argwhere(du < 0.0):
            violations.append(
                (
                    name,
                    "u",
                    float(spec.points[m, 0]),
                    float(spec.points[m, 1]),
                    float(vv[j]),
                    float(uu[i]),
                    float(uu[i + 1]),
                    float(vals[m, i, j]),
                    float(vals[m, i + 1, j]),
                )
            )
        dv = np.diff(vals, axis=2)
        for m, i, j in np.argwhere(dv < 0.0):
            violations.append(
                (
                    name,
                    "v",
                    float(spec.points[m, 0]),
                    float(spec.points[m, 1]),
                    float(uu[i]),
                    float(vv[j]),
                    float(vv[j + 1]),
                    float(vals[m, i, j]),
                    float(vals[m, i, j + 1]),
                )
            )
    n = 2 * len(spec.points) * spec.nu * spec.nv
    return HypothesisReport(
        n_samples=n,
        monotone_violations=violations,
        monotone_pass=not violations,
    )
