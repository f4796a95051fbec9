"""Coupling terms, the homogeneous-shift transform, and hypothesis checks."""

import numpy as np
import pytest

import plapsys.expr as ex
from plapsys.coupling import (
    Coupling,
    SampleSpec,
    check_growth,
    check_monotone,
    nemytskii,
    power_family,
    transform,
)
from plapsys.field import Grid, ScalarField, constant_field, from_callable


def unit_square(n):
    return Grid(2, (0.0, 1.0, 0.0, 1.0), n)


def zero_coupling(p=2.0):
    return Coupling(ex.parse("0"), ex.parse("0"), 0.0, 0.0, 0.0, 0.0, p)


def test_coupling_validation():
    with pytest.raises(ValueError):
        Coupling(ex.parse("u"), ex.parse("v"), -1.0, 0.0, 0.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        Coupling(ex.parse("u"), ex.parse("v"), 0.0, 0.0, 0.0, 0.0, 1.0)


def test_nemytskii_zero():
    g = unit_square(4)
    u = from_callable(g, lambda x, y: x + y)
    v = from_callable(g, lambda x, y: x - y)
    pf, sf = nemytskii(zero_coupling(), u, v)
    assert np.all(pf.values == 0.0)
    assert np.all(sf.values == 0.0)


def test_nemytskii_identity_component():
    g = unit_square(4)
    c = Coupling(ex.parse("odd_pow(u,1)"), ex.parse("0"), 1.0, 0.0, 0.0, 0.0, 2.0)
    u = constant_field(g, 3.0)
    v = from_callable(g, lambda x, y: y)
    pf, _ = nemytskii(c, u, v)
    assert np.all(pf.values == 3.0)


def test_nemytskii_spatial_dependence():
    g = unit_square(4)
    c = Coupling(ex.parse("x*u+y"), ex.parse("0"), 1.0, 0.0, 0.0, 0.0, 2.0)
    u = constant_field(g, 2.0)
    v = constant_field(g, 0.0)
    pf, _ = nemytskii(c, u, v)
    want = 2.0 * g.coords[:, 0] + g.coords[:, 1]
    assert pf.values == pytest.approx(want, rel=1e-15)


def test_nemytskii_locality():
    """Output at a node depends only on that node's (x, u, v)."""
    g = unit_square(5)
    c = Coupling(ex.parse("odd_pow(u,2)+v"), ex.parse("u*v"), 1, 1, 1, 1, 3.0)
    rng = np.random.default_rng(6)
    u1 = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    v1 = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    changed = u1.values.copy()
    changed[0] += 5.0
    u2 = ScalarField(g, changed)
    a, _ = nemytskii(c, u1, v1)
    b, _ = nemytskii(c, u2, v1)
    assert np.array_equal(a.values[1:], b.values[1:])
    assert a.values[0] != b.values[0]


def test_domain_error_names_node():
    g = unit_square(3)
    c = Coupling(ex.parse("1/u"), ex.parse("0"), 1, 0, 0, 0, 2.0)
    u = constant_field(g, 0.0)
    with pytest.raises(ex.EvaluationDomainError) as err:
        nemytskii(c, u, u)
    assert "node" in str(err.value)


def test_transform_prime_constants():
    """a_i' = a_i (1+eps)^(p-1) for every epsilon and p combination."""
    g = unit_square(4)
    h = constant_field(g, 0.0)
    k = constant_field(g, 0.0)
    for eps in (0.5, 1.0, 2.0):
        for p in (1.5, 2.0, 3.0):
            c = Coupling(ex.parse("u"), ex.parse("v"), 1.0, 2.0, 3.0, 4.0, p)
            tc = transform(c, h, k, eps)
            factor = (1 + eps) ** (p - 1)
            assert tc.a1_prime == pytest.approx(1.0 * factor, abs=1e-14)
            assert tc.a2_prime == pytest.approx(2.0 * factor, abs=1e-14)
            assert tc.b1_prime == pytest.approx(3.0 * factor, abs=1e-14)
            assert tc.b2_prime == pytest.approx(4.0 * factor, abs=1e-14)
            assert np.all(tc.c_field().values == 0.0)
            assert np.all(tc.c_prime_field().values == 0.0)


def test_transform_example_value():
    g = unit_square(3)
    c = Coupling(ex.parse("u"), ex.parse("v"), 1.0, 0.0, 0.0, 0.0, 3.0)
    tc = transform(c, constant_field(g, 0.0), constant_field(g, 0.0), 1.0)
    assert tc.a1_prime == 4.0  # (1+1)^2


def test_transform_c_fields_formula():
    """c and c' against a direct evaluation of the shift-bound constants."""
    g = unit_square(5)
    h = from_callable(g, lambda x, y: 1 + x)
    k = from_callable(g, lambda x, y: 2 - y)
    a1, a2, b1, b2 = 0.7, 0.3, 1.1, 0.2
    for eps in (0.5, 1.0, 2.0):
        for p in (1.5, 2.0, 3.0):
            c = Coupling(ex.parse("u"), ex.parse("v"), a1, a2, b1, b2, p)
            tc = transform(c, h, k, eps)
            q = p - 1
            lead = (1 + 1 / eps) ** q
            want_c = lead * (a1 * np.abs(h.values) ** q + a2 * np.abs(k.values) ** q)
            want_cp = lead * (b1 * np.abs(h.values) ** q + b2 * np.abs(k.values) ** q)
            assert np.abs(tc.c_field().values - want_c).max() <= 1e-14
            assert np.abs(tc.c_prime_field().values - want_cp).max() <= 1e-14


def test_transform_all_zero():
    g = unit_square(3)
    c = zero_coupling(2.5)
    tc = transform(c, constant_field(g, 1.0), constant_field(g, 2.0), 1.0)
    assert tc.a1_prime == tc.a2_prime == tc.b1_prime == tc.b2_prime == 0.0
    assert np.all(tc.c_field().values == 0.0)
    assert np.all(tc.c_prime_field().values == 0.0)


def test_transformed_nemytskii_is_shift():
    """phi-tilde(x, u, v) = phi(x, u + h, v + k)."""
    g = unit_square(4)
    c = Coupling(ex.parse("odd_pow(u,2)+x*v"), ex.parse("u*v"), 1, 1, 1, 1, 3.0)
    h = from_callable(g, lambda x, y: x)
    k = from_callable(g, lambda x, y: y)
    tc = transform(c, h, k, 1.0)
    rng = np.random.default_rng(8)
    u = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    v = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    a1, a2 = tc.nemytskii(u, v)
    b1, b2 = nemytskii(c, ScalarField(g, u.values + h.values), ScalarField(g, v.values + k.values))
    assert np.array_equal(a1.values, b1.values)
    assert np.array_equal(a2.values, b2.values)


def test_transformed_at_zero_recovers_boundary_values():
    # phi-tilde(x, 0, .) = phi(x, h, .)
    g = unit_square(3)
    c = Coupling(ex.parse("odd_pow(u,1)"), ex.parse("0"), 1, 0, 0, 0, 2.0)
    tc = transform(c, constant_field(g, 1.0), constant_field(g, 0.0), 1.0)
    pf, _ = tc.nemytskii(constant_field(g, 0.0), constant_field(g, 0.0))
    assert np.all(pf.values == 1.0)


def test_transform_zero_shift_matches_base():
    g = unit_square(4)
    c = Coupling(ex.parse("odd_pow(u,1.5)+v"), ex.parse("u-v"), 1, 1, 1, 1, 2.5)
    tc = transform(c, constant_field(g, 0.0), constant_field(g, 0.0), 1.0)
    rng = np.random.default_rng(10)
    u = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    v = ScalarField(g, rng.uniform(-1, 1, g.n_nodes))
    a1, a2 = tc.nemytskii(u, v)
    b1, b2 = nemytskii(c, u, v)
    assert np.array_equal(a1.values, b1.values)
    assert np.array_equal(a2.values, b2.values)


def test_growth_equality_case_passes():
    c = Coupling(ex.parse("odd_pow(u,1)"), ex.parse("0"), 1.0, 0.0, 0.0, 0.0, 2.0)
    rep = check_growth(c)
    assert rep.growth_pass
    assert rep.growth_max_violation <= 1e-12


def test_growth_rejects_cubic():
    """phi = u^3 claimed linear: worst violation 1000 - 10 at u = 10."""
    c = Coupling(ex.parse("u*u*u"), ex.parse("0"), 1.0, 0.0, 0.0, 0.0, 2.0)
    rep = check_growth(c)
    assert not rep.growth_pass
    assert rep.growth_max_violation == pytest.approx(990.0, rel=1e-12)


def test_growth_zero_passes_any_constants():
    c = Coupling(ex.parse("0"), ex.parse("0"), 5.0, 1.0, 2.0, 3.0, 3.0)
    rep = check_growth(c)
    assert rep.growth_pass
    assert rep.growth_max_violation == 0.0


def test_monotone_passes_odd_powers():
    c = Coupling(
        ex.parse("odd_pow(u,2)+odd_pow(v,2)"), ex.parse("odd_pow(v,2)"), 1, 1, 1, 1, 3.0
    )
    rep = check_monotone(c)
    assert rep.monotone_pass
    assert rep.monotone_violations == []


def test_monotone_rejects_decreasing():
    """phi = -u decreases on every adjacent u-pair of the lattice."""
    c = Coupling(ex.parse("0-u"), ex.parse("0"), 1, 0, 0, 0, 2.0)
    spec = SampleSpec.default()
    rep = check_monotone(c, spec)
    assert not rep.monotone_pass
    expected = len(spec.points) * (spec.nu - 1) * spec.nv
    assert len(rep.monotone_violations) == expected
    name, var, *_ = rep.monotone_violations[0]
    assert (name, var) == ("phi", "u")


def test_monotone_rejects_sine():
    c = Coupling(ex.parse("sin(u)"), ex.parse("0"), 1, 0, 0, 0, 2.0)
    rep = check_monotone(c)
    assert not rep.monotone_pass
    assert len(rep.monotone_violations) > 0


def test_power_family_satisfies_own_hypotheses():
    for p in (1.5, 2.0, 3.0, 4.0):
        c = power_family(0.5, 0.25, 1.0, 0.75, p)
        assert check_growth(c).growth_pass
        assert check_monotone(c).monotone_pass


def test_power_family_values():
    g = unit_square(3)
    c = power_family(2.0, 0.0, 0.0, 1.0, 3.0)
    u = constant_field(g, -2.0)
    v = constant_field(g, 3.0)
    pf, sf = nemytskii(c, u, v)
    assert pf.values == pytest.approx(np.full(g.n_nodes, -8.0), rel=1e-14)
    assert sf.values == pytest.approx(np.full(g.n_nodes, -4.0), rel=1e-14)
