import math

import numpy as np
import pytest
from scipy import integrate

from eulerprim.euler_integral import (
    NotConvergedError,
    QuadratureSpec,
    coarea_check,
    continuity_gap_bound,
    continuity_moment_report,
    contour_length,
    euler_primitive_direct,
    euler_primitive_integral,
    euler_primitive_rotavg,
    gamma_density,
    gamma_terms,
    kac_rice_1d,
    quarter_planes,
    tent_profile,
    PROFILES_1D,
)
from eulerprim.fields import Jet2, TestFunction, bump_integral, get_field, linear_combination, make_bump_testfn, make_fourier_testfn
from eulerprim.shotnoise import make_model, sample_germs, shot_field
from eulerprim.topology import GridSpec

SADDLE = 2 * math.exp(-1.0)
ABOVE = make_bump_testfn(1.5, 2.0)


def flat(value=1.0, slope=0.0):
    """h = value, h' = slope near the evaluation point (support wide enough)."""
    return TestFunction(
        h=lambda u: np.full_like(np.asarray(u, float), value),
        dh=lambda u: np.full_like(np.asarray(u, float), slope),
        support=(-10.0, 10.0), n2_bound=max(abs(value), abs(slope)), sup_h=abs(value), sup_dh=abs(slope),
    )


class TestGamma:
    def test_outside_quarter_planes(self):
        assert gamma_density(Jet2(0.5, (1.0, 1.0), (2.0, 0.0, 3.0)), flat()) == 0

    def test_q1(self):
        jet = Jet2(0.5, (-1.0, -2.0), (2.0, 0.0, 7.0))
        assert gamma_density(jet, flat(1.0, 0.0)) == 2.0
        t1, t2 = gamma_terms(jet, flat())
        assert t1.q1_active and not t1.q2_active
        assert (t1.grad_term, t1.hess_term) == (0.0, 2.0)

    def test_q2(self):
        jet = Jet2(0.5, (-2.0, -1.0), (5.0, 0.0, -3.0))
        assert gamma_density(jet, flat(1.0, 1.0)) == -2.0

    def test_quarter_planes_disjoint(self):
        rng = np.random.default_rng(0)
        f1, f2 = rng.uniform(-1, 1, (2, 10000))
        q1, q2 = quarter_planes(f1, f2)
        assert not np.any(q1 & q2)
        # ties on the boundary belong to neither
        q1, q2 = quarter_planes(np.array([-1.0, 0.0]), np.array([-1.0, -1.0]))
        assert not q1.any() and not q2.any()


class TestPrimitive:
    def test_empty_excursions(self, two_bump):
        assert euler_primitive_integral(two_bump, ABOVE) == 0.0
        assert euler_primitive_direct(two_bump, ABOVE) == 0.0
        assert euler_primitive_rotavg(two_bump, ABOVE) == 0.0

    def test_radial_exactness(self, radial, bump_h):
        out = euler_primitive_integral(radial, bump_h, full_output=True)
        assert abs(out["value"] - bump_integral(0.2, 0.8)) <= 1e-3
        assert out["value"] > 0  # sign convention: chi = +1 on supp h

    def test_radial_direct(self, radial, bump_h):
        assert euler_primitive_direct(radial, bump_h, QuadratureSpec(512, 64)) == pytest.approx(bump_integral(0.2, 0.8), abs=1e-6)

    def test_two_bump_plateaus(self, two_bump, bump_h):
        # chi = 1 below the saddle value and 2 between saddle and peaks
        upper, _ = integrate.quad(bump_h.h, SADDLE, 0.8, epsabs=1e-14)
        expected = bump_integral(0.2, 0.8) + upper
        assert euler_primitive_direct(two_bump, bump_h, QuadratureSpec(512, 128)) == pytest.approx(expected, abs=5e-4)

    def test_identity_two_bump(self, two_bump, bump_h):
        i = euler_primitive_integral(two_bump, bump_h)
        d = euler_primitive_direct(two_bump, bump_h, QuadratureSpec(1024, 128))
        assert abs(i - d) <= 1e-2

    def test_identity_three_bump(self, bump_h):
        fld = get_field("three_bump")
        i = euler_primitive_integral(fld, bump_h)
        d = euler_primitive_direct(fld, bump_h, QuadratureSpec(1024, 128))
        assert abs(i - d) <= 1e-2

    @pytest.mark.parametrize("name", ["radial_exp", "two_bump"])
    def test_rotavg_agrees(self, name, bump_h):
        fld = get_field(name)
        q = QuadratureSpec(512, 128)
        assert abs(euler_primitive_rotavg(fld, bump_h, q) - euler_primitive_integral(fld, bump_h, q)) <= 2 * q.tol

    def test_linearity_same_nodes(self, two_bump):
        h1, h2 = make_bump_testfn(0.2, 0.6), make_bump_testfn(0.5, 0.95)
        comb = linear_combination([(2.0, h1), (-0.5, h2)])
        w = two_bump.bbox
        q = QuadratureSpec(256, 64)
        a = euler_primitive_integral(two_bump, comb, q, window=w, check=False)
        b = 2.0 * euler_primitive_integral(two_bump, h1, q, window=w, check=False) - 0.5 * euler_primitive_integral(two_bump, h2, q, window=w, check=False)
        assert a == pytest.approx(b, abs=1e-13)

    def test_worker_count_does_not_change_bits(self, two_bump, bump_h):
        q = QuadratureSpec(256, 64)
        a = euler_primitive_integral(two_bump, bump_h, q, check=False, workers=1)
        b = euler_primitive_integral(two_bump, bump_h, q, check=False, workers=3)
        assert a.hex() == b.hex()

    def test_not_converged(self, two_bump, bump_h):
        with pytest.raises(NotConvergedError):
            euler_primitive_integral(two_bump, bump_h, QuadratureSpec(64, 32, tol=1e-9))

    def test_fourier_integral_complex(self, radial):
        # radial: chi_f(h) = int_0^1 e^{iu} du; h does not vanish at f = 0 so the error is first order
        exact = (np.exp(1j) - 1) / 1j
        errs = []
        for n in (256, 512):
            v = euler_primitive_integral(radial, make_fourier_testfn(1.0), QuadratureSpec(n, 64), check=False)
            assert isinstance(v, complex)
            errs.append(abs(v - exact))
        assert errs[1] < 1.5e-2
        assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.1)

    def test_direct_rejects_fourier(self, radial):
        with pytest.raises(ValueError):
            euler_primitive_direct(radial, make_fourier_testfn(1.0))

    @pytest.mark.parametrize("kw", [{"spatial_resolution": 32}, {"level_count": 8}, {"rule": "simpson"}])
    def test_quadrature_spec_validation(self, kw):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)


class TestKacRice:
    def test_tent_exact(self, bump_h):
        kr = kac_rice_1d(tent_profile(), bump_h)
        assert kr.rhs == pytest.approx(2 * kr.lhs, rel=1e-12)
        assert kr.lhs == pytest.approx(bump_integral(0.2, 0.8), rel=1e-12)

    @pytest.mark.parametrize("name", sorted(PROFILES_1D))
    def test_smooth_profiles(self, name, bump_h):
        kr = kac_rice_1d(PROFILES_1D[name](), bump_h)
        assert abs(kr.rhs - 2 * kr.lhs) / kr.rhs <= 1e-3
        # every up-crossing pairs with a down-crossing
        assert kr.lhs == pytest.approx(kr.lhs_down, rel=1e-12)

    def test_above_max(self):
        kr = kac_rice_1d(tent_profile(), ABOVE)
        assert kr.lhs == 0 and kr.rhs == 0

    def test_boundary_condition(self):
        with pytest.raises(ValueError, match="boundary"):
            zero = TestFunction(h=np.zeros_like, dh=np.zeros_like, support=(-0.5, 0.5), n2_bound=0, sup_h=0, sup_dh=0)
            kac_rice_1d(tent_profile(), zero)


class TestCoarea:
    def test_circle_perimeter(self):
        fld = get_field("single_bump")
        h = 1.0 / 256
        spec = GridSpec.covering((-1.5, 1.5, -1.5, 1.5), h)
        values = fld.grid_values(spec.xs, spec.ys)
        assert contour_length(values, h, 0.5) == pytest.approx(2 * math.pi * math.sqrt(math.log(2)), rel=1e-4)

    def test_above_max(self, two_bump):
        assert coarea_check(two_bump, ABOVE) == (0.0, 0.0)

    @pytest.mark.parametrize("name", ["radial_exp", "two_bump"])
    def test_relative_gap(self, name, bump_h):
        lhs, rhs = coarea_check(get_field(name), bump_h, QuadratureSpec(512, 128))
        assert abs(lhs - rhs) / rhs <= 1e-2


class TestContinuity:
    def test_zero_perturbation(self, bump_h):
        # off the bump midpoint so that h'(f) does not vanish
        f = Jet2(0.4, (-1.0, -2.0), (0.3, 0.1, -0.2))
        actual, bound = continuity_gap_bound(f, Jet2(0.0, (0.0, 0.0), (0.0, 0.0, 0.0)), bump_h, 1)
        assert actual == 0.0 and bound >= 0.0

    def test_same_quarter_plane_gradient_terms(self, bump_h):
        # off the bump midpoint so that h'(f) does not vanish
        f = Jet2(0.4, (-1.0, -2.0), (0.3, 0.1, -0.2))
        g = Jet2(0.0, (-1e-3, 0.0), (0.0, 0.0, 0.0))
        actual, bound = continuity_gap_bound(f, g, bump_h, 1)
        assert 0 < actual <= bound
        assert actual < 1e-2

    def test_rejects_bad_index(self, bump_h):
        j = Jet2(0.5, (0.0, 0.0), (0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            continuity_gap_bound(j, j, bump_h, 3)


@pytest.fixture(scope="module")
def shot_sampler():
    model = make_model("gaussian")

    def sampler(rng):
        return shot_field(sample_germs(3.0, 0.5, model, int(rng.integers(2**62))))

    return sampler


class TestContinuityMoments:
    W = (-3.0, 3.0, -3.0, 3.0)

    def test_zero_perturbation(self, two_bump, bump_h, shot_sampler):
        r = continuity_moment_report(two_bump, shot_sampler, bump_h, 1, QuadratureSpec(64, 32), 4, 5, g_scale=0.0, window=self.W)
        assert r["lhs_q"] == 0.0

    def test_monotone_in_scale(self, two_bump, bump_h, shot_sampler):
        q = QuadratureSpec(128, 32)
        vals = [continuity_moment_report(two_bump, shot_sampler, bump_h, 1, q, 8, 5, g_scale=s, window=self.W)["lhs_q"] for s in (0.01, 0.005, 0.0025)]
        assert vals[0] >= vals[1] >= vals[2] > 0

    def test_fields_finite(self, two_bump, bump_h, shot_sampler):
        r = continuity_moment_report(two_bump, shot_sampler, bump_h, 2, QuadratureSpec(64, 32), 3, 1, g_scale=0.01, window=self.W)
        assert math.isfinite(r["lhs_q"]) and math.isfinite(r["rhs_without_Cq"]) and r["reps"] == 3
