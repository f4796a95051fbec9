"""Grid construction, P1 fields, norms, and CSV round trips."""

import math

import numpy as np
import pytest

from plapsys.field import (
    Grid,
    ScalarField,
    constant_field,
    element_means,
    from_callable,
    gradient,
    load_field,
    lq_norm,
    pair_norm,
    save_field,
)


def unit_square(n):
    return Grid(2, (0.0, 1.0, 0.0, 1.0), n)


def test_counts_2d():
    g = unit_square(4)
    assert g.n_nodes == 25
    assert len(g.interior) == 9
    assert len(g.boundary) == 16
    assert g.n_elements == 32
    assert g.measure == 1.0


def test_counts_1d():
    g = Grid(1, (0.0, 1.0), 10)
    assert g.n_nodes == 11
    assert len(g.interior) == 9
    assert g.n_elements == 10
    assert g.measure == 1.0


def test_measure_rectangle():
    g = Grid(2, (0.0, 1.0, 0.0, 2.0), 8)
    assert g.measure == 2.0
    assert g.element_measure == pytest.approx((1 / 8) * (2 / 8) / 2, rel=1e-15)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(3, (0.0, 1.0, 0.0, 1.0, 0.0, 1.0), 4)
    with pytest.raises(ValueError):
        Grid(2, (0.0, 1.0), 4)  # box length mismatch
    with pytest.raises(ValueError):
        Grid(2, (1.0, 0.0, 0.0, 1.0), 4)  # decreasing side
    with pytest.raises(ValueError):
        Grid(2, (0.0, 1.0, 0.0, 1.0), 0)


def test_interior_boundary_partition():
    g = unit_square(5)
    both = np.concatenate([g.interior, g.boundary])
    assert sorted(both) == list(range(g.n_nodes))
    x = g.coords[g.boundary, 0]
    y = g.coords[g.boundary, 1]
    on_edge = (x == 0) | (x == 1) | (y == 0) | (y == 1)
    assert on_edge.all()


def test_basis_gradients_sum_to_zero_exactly():
    # partition of unity: the three hat gradients cancel bitwise
    g = unit_square(7)
    assert np.all(g.grad_phi.sum(axis=1) == 0.0)


def test_lumped_weights():
    g = unit_square(8)
    h2 = (1 / 8) ** 2
    assert g.lumped[g.interior] == pytest.approx(h2, rel=1e-14)
    assert g.lumped.sum() == pytest.approx(g.measure, abs=1e-14)


def test_affine_gradient_exact():
    g = unit_square(6)
    u = from_callable(g, lambda x, y: 2 * x + 3 * y)
    gv = gradient(u)
    assert np.allclose(gv.values[:, 0], 2.0, atol=1e-13)
    assert np.allclose(gv.values[:, 1], 3.0, atol=1e-13)


def test_constant_gradient_zero():
    g = unit_square(5)
    u = constant_field(g, 4.2)
    assert np.all(gradient(u).values == 0.0)


def test_1d_quadratic_gradient_is_midpoint_slope():
    """For u = x^2 each element gradient is the chord slope 2*midpoint,
    and the L2 distance to the exact 2x is h/sqrt(3)."""
    n = 100
    g = Grid(1, (0.0, 1.0), n)
    u = from_callable(g, lambda x: x * x)
    gv = gradient(u).values[:, 0]
    h = 1.0 / n
    mids = (np.arange(n) + 0.5) * h
    assert gv == pytest.approx(2 * mids, rel=1e-12)
    # exact elementwise integral of (2*mid - 2x)^2 is h^3/3 per element
    dist = math.sqrt(n * h**3 / 3)
    assert dist == pytest.approx(h / math.sqrt(3), rel=1e-12)
    # first-order refinement: doubling n halves the distance
    n2 = 200
    assert (1.0 / n2) / math.sqrt(3) == pytest.approx(dist / 2, rel=1e-12)


def test_element_means_affine():
    g = unit_square(4)
    u = from_callable(g, lambda x, y: x + y)
    means = element_means(u)
    # mean of an affine function over a triangle is its centroid value
    cx = g.coords[g.elements, 0].mean(axis=1)
    cy = g.coords[g.elements, 1].mean(axis=1)
    assert means == pytest.approx(cx + cy, rel=1e-13)


def test_lq_norm_constants():
    g = unit_square(6)
    assert lq_norm(constant_field(g, 1.0), 2.0) == pytest.approx(1.0, rel=1e-14)
    assert lq_norm(constant_field(g, 0.0), 3.7) == 0.0


def test_lq_norm_1d_linear_closed_form():
    """w = x on [0,1]: sum of squared element midpoints gives 1/3 - h^2/12."""
    for n in (16, 64):
        g = Grid(1, (0.0, 1.0), n)
        w = from_callable(g, lambda x: x)
        h = 1.0 / n
        assert lq_norm(w, 2.0) == pytest.approx(math.sqrt(1 / 3 - h * h / 12), rel=1e-14)
    g = Grid(1, (0.0, 1.0), 256)
    assert abs(lq_norm(from_callable(g, lambda x: x), 2.0) - math.sqrt(1 / 3)) <= 1e-3


def test_lq_norm_rejects_q_below_one():
    g = unit_square(4)
    with pytest.raises(ValueError):
        lq_norm(constant_field(g, 1.0), 0.9)


def test_lq_norm_homogeneity_and_triangle():
    g = unit_square(8)
    rng = np.random.default_rng(3)
    for q in (1.0, 1.3, 2.0, 4.0):
        w = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
        z = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
        assert lq_norm(ScalarField(g, 2.5 * w.values), q) == pytest.approx(
            2.5 * lq_norm(w, q), rel=1e-13
        )
        s = ScalarField(g, w.values + z.values)
        assert lq_norm(s, q) <= lq_norm(w, q) + lq_norm(z, q) + 1e-13


def test_lq_norm_monotone_in_q_on_unit_measure():
    # Jensen: on a measure-1 box the L^q norms increase with q
    g = unit_square(8)
    rng = np.random.default_rng(5)
    w = ScalarField(g, rng.uniform(-2, 2, g.n_nodes))
    n1, n2, n4 = (lq_norm(w, q) for q in (1.0, 2.0, 4.0))
    assert n1 <= n2 + 1e-14
    assert n2 <= n4 + 1e-14


def test_pair_norm():
    g = unit_square(4)
    zero = constant_field(g, 0.0)
    one = constant_field(g, 1.0)
    two = constant_field(g, 2.0)
    w = from_callable(g, lambda x, y: x - y)
    assert pair_norm(zero, zero, 1.5) == 0.0
    assert pair_norm(w, zero, 2.0) == lq_norm(w, 2.0)
    assert pair_norm(one, two, 2.0) == pytest.approx(2.0, rel=1e-14)


def test_field_validation():
    g = unit_square(4)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(7))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.n_nodes, np.nan))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.n_nodes, np.inf))


def test_csv_round_trip_2d(tmp_path):
    g = unit_square(5)
    rng = np.random.default_rng(9)
    w = ScalarField(g, rng.uniform(-1e3, 1e3, g.n_nodes))
    path = tmp_path / "w.csv"
    save_field(path, w)
    back = load_field(path, g)
    assert np.array_equal(back.values, w.values)
    text = path.read_bytes()
    assert b"\r" not in text
    assert text.startswith(b"x,y,value\n")


def test_csv_round_trip_1d(tmp_path):
    g = Grid(1, (0.0, 2.0), 7)
    w = from_callable(g, lambda x: x**3 - 1)
    path = tmp_path / "w.csv"
    save_field(path, w)
    assert np.array_equal(load_field(path, g).values, w.values)
    assert path.read_bytes().startswith(b"x,value\n")


def test_csv_row_count_mismatch(tmp_path):
    g = unit_square(4)
    w = constant_field(g, 1.0)
    path = tmp_path / "w.csv"
    save_field(path, w)
    with pytest.raises(ValueError):
        load_field(path, unit_square(5))


def test_csv_column_mismatch(tmp_path):
    g = Grid(1, (0.0, 1.0), 4)
    w = constant_field(g, 1.0)
    path = tmp_path / "w.csv"
    save_field(path, w)
    with pytest.raises(ValueError):
        load_field(path, unit_square(2))  # 2-D grid, 1-D file
