"""Structured grids, nodal fields, gradients, and quadrature norms.

The domain is an axis-aligned box discretized by a uniform lattice with n
cells per axis.  In 2-D each cell is split into two triangles along the
diagonal from its lower-left to its upper-right corner; in 1-D the elements
are the cells themselves.  Nodes are ordered row-major from the (x0, y0)
corner: node (i, j) has index j*(n+1) + i.

Fields are piecewise-linear (P1): a ScalarField stores one value per node,
and all integral quantities use the vertex-averaged elementwise quadrature

    lq_norm(w, q) = (sum_e |mean of vertex values|^q * area_e)^(1/q).

Gradients of the P1 interpolant are constant per element and exact for
affine data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=a.dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform simplicial grid on a box, d = 1 or 2.

    Parameters
    ----------
    d : dimension, 1 or 2.
    box : (x0, x1) for d=1, (x0, x1, y0, y1) for d=2; strictly increasing
        per axis.
    n : cells per axis, >= 1.

    Derived arrays (all immutable): `coords` (n_nodes, d) node coordinates,
    `elements` (n_elements, d+1) vertex indices in counterclockwise order,
    `grad_phi` (n_elements, d+1, d) basis-function gradients, `interior`
    and `boundary` node index arrays, `lumped` (n_nodes,) vertex-quadrature
    node weights.
    """

    d: int
    box: tuple[float, ...]
    n: int
    coords: np.ndarray = field(init=False, repr=False, compare=False)
    elements: np.ndarray = field(init=False, repr=False, compare=False)
    grad_phi: np.ndarray = field(init=False, repr=False, compare=False)
    interior: np.ndarray = field(init=False, repr=False, compare=False)
    boundary: np.ndarray = field(init=False, repr=False, compare=False)
    lumped: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        box = tuple(float(b) for b in self.box)
        object.__setattr__(self, "box", box)
        if len(box) != 2 * self.d:
            raise ValueError(f"box must have {2 * self.d} entries for d={self.d}")
        if box[1] <= box[0] or (self.d == 2 and box[3] <= box[2]):
            raise ValueError("box sides must have positive length")
        if self.d == 1:
            self._build_1d()
        else:
            self._build_2d()

    def _build_1d(self):
        x0, x1 = self.box
        n = self.n
        x = np.linspace(x0, x1, n + 1)
        coords = x[:, None]
        idx = np.arange(n)
        elements = np.stack([idx, idx + 1], axis=1)
        hx = (x1 - x0) / n
        grad = np.empty((n, 2, 1))
        grad[:, 0, 0] = -1.0 / hx
        grad[:, 1, 0] = 1.0 / hx
        interior = np.arange(1, n)
        boundary = np.array([0, n])
        lumped = np.zeros(n + 1)
        np.add.at(lumped, elements, hx / 2.0)
        self._stash(coords, elements, grad, interior, boundary, lumped)

    def _build_2d(self):
        x0, x1, y0, y1 = self.box
        n = self.n
        x = np.linspace(x0, x1, n + 1)
        y = np.linspace(y0, y1, n + 1)
        X, Y = np.meshgrid(x, y)  # row-major: node (i, j) at flat j*(n+1)+i
        coords = np.stack([X.ravel(), Y.ravel()], axis=1)
        hx = (x1 - x0) / n
        hy = (y1 - y0) / n

        ci, cj = np.meshgrid(np.arange(n), np.arange(n))  # ci[j, i] = i, cj[j, i] = j
        ll = (cj * (n + 1) + ci).ravel()  # lower-left node of cell (i, j), j outer
        lower = np.stack([ll, ll + 1, ll + n + 2], axis=1)
        upper = np.stack([ll, ll + n + 2, ll + n + 1], axis=1)
        elements = np.empty((2 * n * n, 3), dtype=np.int64)
        elements[0::2] = lower
        elements[1::2] = upper

        glow = np.array(
            [[-1.0 / hx, 0.0], [1.0 / hx, -1.0 / hy], [0.0, 1.0 / hy]]
        )
        gup = np.array(
            [[0.0, -1.0 / hy], [1.0 / hx, 0.0], [-1.0 / hx, 1.0 / hy]]
        )
        grad = np.empty((2 * n * n, 3, 2))
        grad[0::2] = glow
        grad[1::2] = gup

        flat_i = np.tile(np.arange(n + 1), n + 1)
        flat_j = np.repeat(np.arange(n + 1), n + 1)
        on_boundary = (flat_i == 0) | (flat_i == n) | (flat_j == 0) | (flat_j == n)
        interior = np.flatnonzero(~on_boundary)
        boundary = np.flatnonzero(on_boundary)
        lumped = np.zeros((n + 1) ** 2)
        np.add.at(lumped, elements, hx * hy / 2.0 / 3.0)
        self._stash(coords, elements, grad, interior, boundary, lumped)

    def _stash(self, coords, elements, grad, interior, boundary, lumped):
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "elements", _readonly(elements))
        object.__setattr__(self, "grad_phi", _readonly(grad))
        object.__setattr__(self, "interior", _readonly(interior))
        object.__setattr__(self, "boundary", _readonly(boundary))
        object.__setattr__(self, "lumped", _readonly(lumped))

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** self.d

    @property
    def n_elements(self) -> int:
        return self.n if self.d == 1 else 2 * self.n * self.n

    @property
    def spacing(self) -> tuple[float, ...]:
        if self.d == 1:
            return ((self.box[1] - self.box[0]) / self.n,)
        return (
            (self.box[1] - self.box[0]) / self.n,
            (self.box[3] - self.box[2]) / self.n,
        )

    @property
    def measure(self) -> float:
        """Exact box measure (length or area)."""
        m = self.box[1] - self.box[0]
        if self.d == 2:
            m *= self.box[3] - self.box[2]
        return m

    @property
    def element_measure(self) -> float:
        """Measure of a single element (all elements are congruent)."""
        if self.d == 1:
            return (self.box[1] - self.box[0]) / self.n
        hx, hy = self.spacing
        return hx * hy / 2.0


@dataclass(frozen=True)
class ScalarField:
    """One float per grid node; immutable after construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"values must have shape ({self.grid.n_nodes},), got {v.shape}"
            )
        if not np.isfinite(v).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True)
class VectorField:
    """One d-vector per element (e.g. a P1 gradient); immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        want = (self.grid.n_elements, self.grid.d)
        if v.shape != want:
            raise ValueError(f"values must have shape {want}, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(v))


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.n_nodes, float(value)))


def from_callable(grid: Grid, fn) -> ScalarField:
    """Sample fn(x) (d=1) or fn(x, y) (d=2) at the nodes."""
    c = grid.coords
    vals = fn(c[:, 0]) if grid.d == 1 else fn(c[:, 0], c[:, 1])
    return ScalarField(grid, np.asarray(vals, dtype=float) + np.zeros(grid.n_nodes))


def gradient(u: ScalarField) -> VectorField:
    """Per-element gradient of the P1 interpolant; exact for affine data."""
    g = u.grid
    vals = u.values[g.elements]  # (E, d+1)
    out = np.einsum("ev,evd->ed", vals, g.grad_phi)
    return VectorField(g, out)


def element_means(w: ScalarField) -> np.ndarray:
    """Vertex average of w on each element."""
    return w.values[w.grid.elements].mean(axis=1)


def lq_norm(w: ScalarField, q: float) -> float:
    """Vertex-averaged elementwise quadrature norm of order q >= 1."""
    if q < 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    m = np.abs(element_means(w))
    return float((np.sum(m**q) * w.grid.element_measure) ** (1.0 / q))


def pair_norm(f: ScalarField, g: ScalarField, r: float) -> float:
    """max of the two lq norms; the product-space norm for source pairs."""
    return max(lq_norm(f, r), lq_norm(g, r))


def save_field(path, w: ScalarField) -> None:
    """Write the field as CSV (header x[,y],value), 17 significant digits, LF."""
    g = w.grid
    cols = ["x", "y"][: g.d] + ["value"]
    lines = [",".join(cols)]
    for row, v in zip(g.coords, w.values):
        parts = [f"{c:.17g}" for c in row] + [f"{v:.17g}"]
        lines.append(",".join(parts))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path, grid: Grid) -> ScalarField:
    """Read a field CSV written by save_field, validating the row count."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty field file")
    header = lines[0].split(",")
    want_cols = grid.d + 1
    if len(header) != want_cols:
        raise ValueError(
            f"{path}: expected {want_cols} columns for d={grid.d}, got {len(header)}"
        )
    rows = lines[1:]
    if len(rows) != grid.n_nodes:
        raise ValueError(
            f"{path}: row count {len(rows)} does not match grid with "
            f"{grid.n_nodes} nodes"
        )
    values = np.empty(grid.n_nodes)
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != want_cols:
            raise ValueError(f"{path}: malformed row {i + 2}")
        values[i] = float(parts[-1])
    return ScalarField(grid, values)
