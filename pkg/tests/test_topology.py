import math

import numpy as np
import pytest

from eulerprim.fields import add_fields, get_field, make_affine_field, make_bump_mixture, rotate_field
from eulerprim.topology import (
    BinaryGrid,
    GridSpec,
    TopologyError,
    binarize,
    cubical_curve,
    ec_curve,
    euler_char_bicov,
    euler_char_cubical,
    euler_char_morse,
    find_critical_points,
    morse_count_stability,
    morse_counts,
    sample_values,
)

SADDLE = 2 * math.exp(-1.0)


@pytest.fixture(scope="module")
def bump():
    return get_field("single_bump")


@pytest.fixture(scope="module")
def two_bump_points(two_bump):
    return find_critical_points(two_bump)


class TestCubical:
    def test_single_pixel(self):
        assert euler_char_cubical(np.array([[1]])) == 1

    def test_ring(self):
        ring = np.ones((3, 3), bool)
        ring[1, 1] = False
        assert euler_char_cubical(ring) == 0

    def test_diagonal_pixels_share_a_vertex(self):
        assert euler_char_cubical(np.array([[1, 0], [0, 1]])) == 1

    def test_empty(self):
        assert euler_char_cubical(np.zeros((4, 4), bool)) == 0


class TestBinarize:
    def test_above_max_is_empty(self, bump):
        spec = GridSpec.covering(bump.bbox, 0.1)
        assert not binarize(bump, spec, 1.5).occupancy.any()

    def test_disc_radius(self, bump):
        h = 1.0 / 128
        spec = GridSpec.covering((-1.5, 1.5, -1.5, 1.5), h)
        occ = binarize(bump, spec, 0.5).occupancy
        r = math.sqrt(math.log(2.0))
        assert occ.sum() * h * h == pytest.approx(math.pi * r * r, rel=1e-2)

    def test_touching_boundary_raises(self, bump):
        spec = GridSpec.covering(bump.bbox, 0.1)
        with pytest.raises(TopologyError, match="compactly contained"):
            binarize(bump, spec, 0.0)

    def test_text_roundtrip(self, bump):
        g = binarize(bump, GridSpec.covering((-2, 2, -2, 2), 0.25), 0.3)
        back = BinaryGrid.from_text(g.to_text())
        assert np.array_equal(back.occupancy, g.occupancy) and back.spec == g.spec and back.level == g.level


def test_gridspec_covers(two_bump):
    spec = GridSpec.covering(two_bump.bbox, 0.05)
    assert spec.covers(two_bump.bbox)
    assert GridSpec.with_points(two_bump.bbox, 256).covers(two_bump.bbox)
    with pytest.raises(ValueError):
        GridSpec((0, 0), 0.0, 3, 3)


class TestBicov:
    def test_above_max(self, bump):
        assert euler_char_bicov(bump, GridSpec.covering(bump.bbox, 0.1), 1.5) == 0

    def test_radial_disc(self):
        fld = get_field("radial_exp")
        spec = GridSpec.covering(fld.bbox, 1.0 / 256)
        values = sample_values(fld, spec)
        assert euler_char_bicov(fld, spec, 0.5, values) == 1
        assert euler_char_cubical(binarize(fld, spec, 0.5, values)) == 1

    def test_two_components(self, two_bump):
        spec = GridSpec.covering(two_bump.bbox, 1.0 / 64)
        assert euler_char_bicov(two_bump, spec, 0.9) == 2


class TestCriticalPoints:
    def test_single_bump(self, bump):
        pts = find_critical_points(bump)
        assert len(pts) == 1
        assert pts[0].index == 0 and np.allclose(pts[0].location, (0, 0), atol=1e-10)

    def test_two_bump_inventory(self, two_bump, two_bump_points):
        assert sorted(p.index for p in two_bump_points) == [0, 0, 1]
        saddle = [p for p in two_bump_points if p.index == 1][0]
        assert np.allclose(saddle.location, (0, 0), atol=1e-9)
        assert saddle.value == pytest.approx(SADDLE, rel=1e-12)
        for p in two_bump_points:
            j = two_bump.jet_at(p.location)
            assert math.hypot(*j.grad) <= 1e-10
            assert abs(p.hess_det) > 1e-8

    def test_dense_grid_oracle(self, two_bump, two_bump_points):
        # local minima of |grad f| on a dense grid sit next to every Newton point
        xs = np.linspace(-2, 2, 401)
        f, f1, f2, *_ = two_bump.grid_jets(xs, xs)
        g = np.hypot(f1, f2)
        inner = g[1:-1, 1:-1]
        nb = np.stack([g[:-2, 1:-1], g[2:, 1:-1], g[1:-1, :-2], g[1:-1, 2:]])
        mins = np.argwhere((inner < nb.min(axis=0)) & (f[1:-1, 1:-1] > 0.1)) + 1
        found = {(round(xs[i], 2), round(xs[j], 2)) for i, j in mins}
        assert len(found) == 3
        for p in two_bump_points:
            assert min(math.dist(p.location, q) for q in found) < 0.02

    def test_coarse_seeds_miss_points(self, two_bump):
        # the seed lattice must bracket every basin; two seeds per side cannot
        assert len(find_critical_points(two_bump, seed_resolution=2)) < 3

    def test_degenerate_raises(self):
        with pytest.raises(TopologyError, match="degenerate"):
            find_critical_points(get_field("radial_ring"))


class TestMorse:
    def test_single_bump(self, bump):
        assert euler_char_morse(find_critical_points(bump), 0.5) == 1

    def test_two_bump_levels(self, two_bump_points):
        assert euler_char_morse(two_bump_points, 0.5) == 1
        assert euler_char_morse(two_bump_points, 0.9) == 2
        assert euler_char_morse(two_bump_points, 1.5) == 0

    def test_critical_level_raises(self, two_bump_points):
        with pytest.raises(TopologyError, match="critical level"):
            morse_counts(two_bump_points, SADDLE)

    def test_stability(self, two_bump):
        pert = make_affine_field(0.4, -0.7, 0.9, two_bump.bbox)
        a, b = morse_count_stability(two_bump, 0.5, pert, 0.0, min_value=0.1)
        assert a == b
        a, b = morse_count_stability(two_bump, 0.5, pert, 1e-4, min_value=0.1)
        assert a == b == (2, 1, 0)

    def test_large_perturbation_changes_triples(self, two_bump):
        # a strong tilt swallows one maximum together with the saddle
        pert = make_affine_field(0.0, 1.0, 0.0, two_bump.bbox)
        a, b = morse_count_stability(two_bump, 0.5, pert, 0.5, min_value=0.1)
        assert a == (2, 1, 0) and b != a


class TestAgreement:
    LEVELS = [0.1, 0.3, 0.5, 0.8, 0.95]

    @pytest.mark.parametrize("name", ["single_bump", "two_bump", "three_bump", "radial_exp"])
    def test_three_methods(self, name):
        fld = get_field(name)
        spec = GridSpec.covering(fld.bbox, 1.0 / 128)
        values = sample_values(fld, spec)
        pts = find_critical_points(fld)
        crit = [p.value for p in pts]
        levels = [u for u in self.LEVELS if min(abs(u - c) for c in crit) > 1e-2]
        curves = [ec_curve(fld, levels, m, spec=spec, values=values, points=pts) for m in ("cubical", "bicov", "morse")]
        assert np.array_equal(curves[0], curves[1]) and np.array_equal(curves[0], curves[2])

    def test_additivity(self):
        a = make_bump_mixture([(-6.0, 0.0)], [1.0], [1.0])
        b = make_bump_mixture([(6.0, 0.0)], [0.8], [1.0])
        both = make_bump_mixture([(-6.0, 0.0), (6.0, 0.0)], [1.0, 0.8], [1.0, 1.0])
        spec = GridSpec.covering(both.bbox, 1.0 / 32)
        levels = [0.1, 0.5, 0.9]
        total = cubical_curve(sample_values(both, spec), levels)
        parts = cubical_curve(sample_values(a, spec), levels) + cubical_curve(sample_values(b, spec), levels)
        assert np.array_equal(total, parts)

    def test_rotation_invariance(self):
        fld = get_field("three_bump")
        levels = [0.3, 0.6, 0.9]
        ref = ec_curve(fld, levels, "cubical", spec=GridSpec.covering(fld.bbox, 1.0 / 64))
        for k in (1, 2, 3):
            r = rotate_field(fld, k)
            assert np.array_equal(ec_curve(r, levels, "cubical", spec=GridSpec.covering(r.bbox, 1.0 / 64)), ref)

    def test_single_bump_sweep(self, bump):
        spec = GridSpec.covering(bump.bbox, 1.0 / 64)
        levels = np.linspace(0.05, 1.5, 30)
        curve = ec_curve(bump, levels, "cubical", spec=spec)
        assert np.array_equal(curve, (levels < 1.0).astype(int))


def test_perturbed_field_sum(two_bump):
    pert = make_affine_field(1.0, 0.0, 0.0, two_bump.bbox)
    s = add_fields(two_bump, pert, 0.25)
    assert s.jet_at((0.1, 0.2)).value == pytest.approx(two_bump.jet_at((0.1, 0.2)).value + 0.25)
