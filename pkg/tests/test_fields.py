import math

import numpy as np
import pytest

from eulerprim.fields import (
    FIELD_REGISTRY,
    Jet2,
    bump_integral,
    exp_profile,
    field_from_record,
    field_to_record,
    format_record,
    get_field,
    linear_combination,
    make_bump_mixture,
    make_bump_testfn,
    make_fourier_testfn,
    make_radial_field,
    parse_record,
    parse_testfn,
    rotate_field,
)
from eulerprim import fields

E1 = math.exp(-1.0)


def fd_jets(fld, x, y, step=1e-4):
    v = lambda a, b: fld.value(np.array(a), np.array(b))
    f1 = (v(x + step, y) - v(x - step, y)) / (2 * step)
    f2 = (v(x, y + step) - v(x, y - step)) / (2 * step)
    f11 = (v(x + step, y) - 2 * v(x, y) + v(x - step, y)) / step**2
    f22 = (v(x, y + step) - 2 * v(x, y) + v(x, y - step)) / step**2
    f12 = (v(x + step, y + step) - v(x + step, y - step) - v(x - step, y + step) + v(x - step, y - step)) / (4 * step**2)
    return f1, f2, f11, f12, f22


def test_radial_center_and_examples(radial):
    j = radial.jet_at((0.0, 0.0))
    assert j.value == 1.0 and j.grad == (0.0, 0.0)
    j = radial.jet_at((1.0, 0.0))
    assert j.grad[0] == pytest.approx(-2 * E1, rel=1e-14)
    assert j.hess[2] == pytest.approx(-2 * E1, rel=1e-14)


def test_single_bump_equals_radial(radial):
    one = get_field("single_bump")
    x = np.linspace(-2, 2, 7)
    for a, b in zip(one.jets(x, x[::-1]), radial.jets(x, x[::-1])):
        assert np.array_equal(a, b)


def test_two_bump_symmetric_saddle():
    fld = make_bump_mixture([(-1, 0), (1, 0)], [1, 1], [1, 1])
    j = fld.jet_at((0.0, 0.0))
    assert j.value == pytest.approx(2 * E1, rel=1e-15)
    assert j.grad == (0.0, 0.0)


@pytest.mark.parametrize("name", sorted(FIELD_REGISTRY))
def test_registry_jets_match_finite_differences(name):
    fld = get_field(name)
    rng = np.random.default_rng(0)
    x0, x1, y0, y1 = fld.bbox
    for _ in range(100):
        # stay where the field is not negligible, so relative errors are meaningful
        x, y = rng.uniform(0.3 * x0, 0.3 * x1), rng.uniform(0.3 * y0, 0.3 * y1)
        f, *an = fld.jets(x, y)
        an = [float(a) for a in an]
        fd = fd_jets(fld, x, y)
        scale = max(1e-3, max(abs(a) for a in an))
        for a, b in zip(an, fd):
            assert abs(a - float(b)) <= 1e-5 * scale


def test_jets_deterministic_and_finite(two_bump):
    a = two_bump.jet_at((0.3, -0.2))
    b = two_bump.jet_at((0.3, -0.2))
    assert a == b
    assert all(math.isfinite(v) for v in (a.value, *a.grad, *a.hess))


def test_bbox_tail():
    for name in FIELD_REGISTRY:
        fld = get_field(name)
        x0, x1, y0, y1 = fld.bbox
        t = np.linspace(x0, x1, 50)
        edge = np.concatenate([fld.value(t, np.full_like(t, y0)), fld.value(t, np.full_like(t, y1))])
        assert np.all(np.abs(edge) <= 1e-11)


def test_profile_cutoff():
    p = exp_profile()
    q = p.cutoff(1e-12)
    assert p.psi(q) <= 1e-12 * (1 + 1e-9) and p.psi(1.01 * q) < 1e-12 and p.psi(0.0) == 1.0


def test_jet_add_and_matrix():
    a = Jet2(1.0, (1.0, 2.0), (1.0, 0.5, 2.0))
    s = a + a
    assert s.value == 2.0 and s.hess == (2.0, 1.0, 4.0)
    assert np.array_equal(a.hessian_matrix(), a.hessian_matrix().T)


class TestBump:
    def test_midpoint_value(self):
        h = make_bump_testfn(0.2, 0.8, 3.0)
        assert h.h(0.5) == pytest.approx(3.0 * E1, rel=1e-15)

    def test_vanishes_at_and_outside_support(self):
        h = make_bump_testfn(0.2, 0.8)
        u = np.array([-1.0, 0.2, 0.8, 2.0])
        assert np.all(h.h(u) == 0) and np.all(h.dh(u) == 0)

    def test_integral_stable(self):
        a = bump_integral(0.2, 0.8)
        u = np.linspace(0.2, 0.8, 400001)
        trap = np.trapezoid(make_bump_testfn(0.2, 0.8).h(u), u)
        assert a > 0 and abs(a - trap) < 1e-10

    def test_n2_bound_dominates(self):
        h = make_bump_testfn(0.2, 0.8, 2.0)
        u = np.linspace(0.2, 0.8, 100001)
        sup = max(np.abs(h.h(u)).max(), np.abs(h.dh(u)).max(), np.abs(h.d2h(u)).max())
        assert h.n2_bound >= sup
        assert h.sup_h >= np.abs(h.h(u)).max() and h.sup_dh >= np.abs(h.dh(u)).max()

    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (0.8, 0.2), (0.0, 1.0), (-1.0, 1.0)])
    def test_bad_support_rejected(self, a, b):
        with pytest.raises(ValueError):
            make_bump_testfn(a, b)


def test_fourier_testfn():
    h0 = make_fourier_testfn(0.0)
    assert h0.h(2.5) == 1 and h0.dh(2.5) == 0
    assert make_fourier_testfn(1.0).h(math.pi) == pytest.approx(-1.0)
    u = np.linspace(-10, 10, 101)
    assert np.allclose(np.abs(make_fourier_testfn(3.7).h(u)), 1.0)
    assert make_fourier_testfn(1.0).fourier


def test_linear_combination():
    h1, h2 = make_bump_testfn(0.2, 0.5), make_bump_testfn(0.4, 0.9)
    c = linear_combination([(2.0, h1), (-1.0, h2)])
    u = np.linspace(0, 1, 11)
    assert np.allclose(c.h(u), 2 * h1.h(u) - h2.h(u))
    assert c.support == (0.2, 0.9)
    with pytest.raises(ValueError):
        linear_combination([(1.0, make_fourier_testfn(1.0))])


class TestRotation:
    def test_identity(self, two_bump):
        r = rotate_field(two_bump, 0)
        x = np.linspace(-1, 1, 5)
        for a, b in zip(r.jets(x, x), two_bump.jets(x, x)):
            assert np.array_equal(a, b)

    def test_four_quarter_turns_identity(self, two_bump):
        r = two_bump
        for _ in range(4):
            r = rotate_field(r, 1)
        x, y = np.array([0.3, -1.1]), np.array([0.7, 0.2])
        for a, b in zip(r.jets(x, y), two_bump.jets(x, y)):
            assert np.array_equal(a, b)

    def test_half_turn(self, two_bump):
        r = rotate_field(two_bump, 2)
        a = r.jet_at((1.0, 0.3))
        b = two_bump.jet_at((-1.0, -0.3))
        assert a.value == b.value
        assert a.grad == tuple(-g for g in b.grad)
        assert a.hess == b.hess

    def test_radial_invariant(self, radial):
        for k in (1, 2, 3):
            r = rotate_field(radial, k)
            assert r.jet_at((0.4, -0.9)).value == pytest.approx(radial.jet_at((0.4, -0.9)).value, rel=1e-15)


def test_records_roundtrip(two_bump, bump_h):
    rec = field_to_record(two_bump)
    back = field_from_record(parse_record(format_record(rec)))
    assert back.jet_at((0.2, 0.1)) == two_bump.jet_at((0.2, 0.1))
    h = fields.testfn_from_record(fields.testfn_to_record(bump_h))
    assert h.h(0.4) == bump_h.h(0.4)
    assert parse_testfn("fourier:2").fourier
    with pytest.raises(ValueError):
        parse_testfn("gauss:1")
    with pytest.raises(KeyError):
        get_field("nope")
