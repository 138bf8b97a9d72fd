import math

import numpy as np
import pytest

from eulerprim.shotnoise import (
    ISOTROPY_FACTOR,
    TAIL,
    KERNELS,
    MODELS,
    CFQuad,
    GermSample,
    angular_constant,
    d4_psi,
    d4_psi_fd,
    d22_psi,
    d22_psi_fd,
    empirical_cf,
    kernel_moment,
    make_model,
    mc_gamma_at_origin,
    mc_summary,
    psi,
    radial_cf,
    sample_germs,
    shot_field,
)
from eulerprim.seeds import derive_seed

GAUSS = make_model("gaussian")
SMALL = CFQuad(r_panels=24, phi_nodes=32, amp_nodes=6)


def germ_sample(rows, model=GAUSS):
    rows = np.asarray(rows, float).reshape(-1, 5)
    return GermSample(0, 5.0, 1.0, rows[:, :2].copy(), rows[:, 2].astype(int), rows[:, 3].copy(), rows[:, 4].copy(), model)


class TestKernels:
    @pytest.mark.parametrize("name", sorted(KERNELS))
    def test_invariants_on_sample(self, name):
        k = KERNELS[name]()
        rng = np.random.default_rng(7)
        x, y = rng.uniform(-8, 8, (2, 10000))
        for m in (0.5, 1.0, 1.5):
            g, g1, g2, g11, g12, g22 = k.jets(x, y, m, 0.3)
            r = np.hypot(x, y)
            grad = np.hypot(g1, g2)
            assert np.all(g >= 0)
            assert np.all(grad <= k.grad_const_for(m) * g ** (k.grad_alpha / 2) + 1e-12)
            env = np.max(np.abs([g, g1, g2, g11, g12, g22]), axis=0)
            assert np.all(env * (1 + r) ** k.decay_gamma <= k.decay_const_for(m) * (1 + 1e-9))

    def test_gaussian_constants(self):
        k = KERNELS["gaussian"]()
        assert k.grad_const == pytest.approx(2 * math.sqrt(2) * math.exp(-0.5))
        assert k.grad_alpha == 1.5
        R = k.truncation_radius
        assert k.jets(np.array([R]), np.array([0.0]))[0][0] <= TAIL

    def test_truncation_tail(self):
        k = KERNELS["gaussian"]()
        R = k.truncation_radius_for(1.5)
        g = k.jets(np.array([R * 1.01]), np.array([0.0]), 1.5)[0]
        assert g[0] <= 1e-12

    def test_models(self):
        for name in MODELS:
            m = make_model(name)
            assert sum(m.weights) == pytest.approx(1.0)
        assert make_model("gaussian").radial
        assert not make_model("aniso_gaussian").radial
        assert make_model("aniso_gaussian").isotropic
        with pytest.raises(KeyError):
            make_model("nope")


class TestSampling:
    def test_deterministic(self):
        a = sample_germs(4.0, 1.0, GAUSS, 11)
        b = sample_germs(4.0, 1.0, GAUSS, 11)
        assert a.to_text() == b.to_text()
        assert a.to_text() != sample_germs(4.0, 1.0, GAUSS, 12).to_text()

    def test_positions_in_disc(self):
        s = sample_germs(3.0, 5.0, GAUSS, 1)
        assert np.all(np.hypot(*s.positions.T) <= 3.0)
        assert np.all((s.amplitudes >= 0.5) & (s.amplitudes <= 1.5))

    def test_poisson_mean(self):
        counts = np.array([len(sample_germs(10.0, 1.0, GAUSS, derive_seed(5, k))) for k in range(10000)])
        mean = 100 * math.pi
        assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean / counts.size)

    def test_small_intensity_mostly_empty(self):
        empty = sum(len(sample_germs(1.0, 1e-4, GAUSS, k)) == 0 for k in range(200))
        assert empty >= 195

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            sample_germs(0.0, 1.0, GAUSS, 1)
        with pytest.raises(ValueError):
            sample_germs(1.0, -1.0, GAUSS, 1)

    def test_text_roundtrip(self):
        s = sample_germs(3.0, 1.0, make_model("mixture"), 3)
        back = GermSample.from_text(s.to_text(), s.model)
        assert back.to_text() == s.to_text()
        np.testing.assert_array_equal(back.table(), s.table())


class TestShotField:
    def test_empty_sample_is_zero(self):
        fld = shot_field(germ_sample([]))
        jets = fld.jets(np.array([0.0, 1.0]), np.array([0.0, -2.0]))
        assert all(np.all(j == 0) for j in jets)

    def test_single_germ_is_kernel(self):
        fld = shot_field(germ_sample([0, 0, 0, 1.0, 0.0]))
        x = np.linspace(-2, 2, 9)
        got = fld.jets(x, 0.5 * x)
        want = GAUSS.kernels[0].jets(x, 0.5 * x, 1.0, 0.0)
        for a, b in zip(got, want):
            np.testing.assert_allclose(a, b, atol=1e-14)

    def test_two_germs_sum(self):
        model = make_model("aniso_gaussian")
        k = model.kernels[0]
        fld = shot_field(germ_sample([[0.3, -0.2, 0, 1.2, 0.4], [-0.5, 0.1, 0, 0.7, 2.0]], model))
        px, py = np.array([0.1]), np.array([0.2])
        got = fld.jets(px, py)
        a = k.jets(px - 0.3, py + 0.2, 1.2, 0.4)
        b = k.jets(px + 0.5, py - 0.1, 0.7, 2.0)
        for gj, aj, bj in zip(got, a, b):
            assert gj[0] == pytest.approx(aj[0] + bj[0], abs=1e-12)

    def test_grid_matches_probe(self):
        fld = shot_field(sample_germs(3.0, 1.0, GAUSS, 9))
        xs = np.linspace(-4, 4, 17)
        grid = fld.grid_jets(xs, xs)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        probe = fld.jets(X, Y)
        for a, b in zip(grid, probe):
            np.testing.assert_allclose(np.asarray(a).reshape(X.shape), b, atol=1e-12)


class TestCharacteristicFunction:
    @pytest.mark.parametrize("i", [1, 2])
    def test_at_zero(self, i):
        assert psi(i, 0.0, (0.0, 0.0), 0.0, GAUSS, SMALL, check=False) == 1.0

    def test_bounded(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-3, 3, 100)
        s = rng.uniform(-3, 3, (100, 2))
        v = rng.uniform(-3, 3, 100)
        for i in (1, 2):
            assert np.all(np.abs(psi(i, t, s, v, GAUSS, SMALL, check=False)) <= 1 + 1e-12)

    def test_s_symmetry(self):
        s = np.array([[0.4, -1.1], [2.0, 0.5]])
        a = psi(1, 1.0, s, 0.0, GAUSS, SMALL, check=False)
        b = psi(1, 1.0, -s, 0.0, GAUSS, SMALL, check=False)
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_d4_conjugate(self):
        # psi(-t, -s, -v) = conj psi(t, s, v); the v-derivative picks up a sign
        a = d4_psi(1, 0.7, (0.3, -0.4), GAUSS, SMALL, check=False)
        b = d4_psi(1, -0.7, (-0.3, 0.4), GAUSS, SMALL, check=False)
        assert a == pytest.approx(-b.conjugate(), abs=1e-12)
        c = d4_psi_fd(1, -0.7, (-0.3, 0.4), GAUSS, quad=SMALL, check=False)
        assert c == pytest.approx(b, rel=1e-6)

    def test_d4_zero_at_origin(self):
        assert abs(d4_psi(1, 0.0, (0.0, 0.0), GAUSS, SMALL, check=False)) < 1e-8

    def test_d22_at_zero(self):
        v = d22_psi(1, 0.0, GAUSS, SMALL, check=False)
        assert v.imag == 0.0
        assert v.real == pytest.approx(-kernel_moment(GAUSS, "d1", 2, SMALL), rel=1e-12)
        assert v.real < 0

    def test_finite_differences(self):
        a = d4_psi(2, 1.0, (0.5, 0.2), GAUSS, SMALL, check=False)
        b = d4_psi_fd(2, 1.0, (0.5, 0.2), GAUSS, quad=SMALL, check=False)
        assert abs(a - b) <= 1e-3 * abs(a)
        c = d22_psi(1, 1.0, GAUSS, SMALL, check=False)
        d = d22_psi_fd(1, 1.0, GAUSS, axis="s2", quad=SMALL, check=False)
        assert abs(c - d) <= 1e-3 * abs(c)

    def test_radial_route_matches_table(self):
        cf = radial_cf(GAUSS, 1.0, nodes=200, rho_max=20.0)
        quad = CFQuad(r_panels=48, phi_nodes=64, amp_nodes=6)
        assert cf.psi0 == pytest.approx(psi(1, 1.0, model=GAUSS, quad=quad, check=False), abs=1e-8)
        assert cf.d22 == pytest.approx(d22_psi(1, 1.0, GAUSS, quad, check=False), abs=1e-8)
        a, b = 0.6, -0.3
        assert cf.d4(a, b) == pytest.approx(d4_psi(1, 1.0, (a, b), GAUSS, quad, check=False), abs=1e-6)

    def test_radial_route_rejects_anisotropic(self):
        with pytest.raises(ValueError):
            radial_cf(make_model("aniso_gaussian"), 1.0, nodes=50)

    def test_angular_constant(self):
        assert angular_constant() == pytest.approx((math.pi - 2) / 8, abs=1e-14)
        assert ISOTROPY_FACTOR == pytest.approx(angular_constant() / (2 * math.pi))


class TestMonteCarlo:
    def test_summary_permutation_invariant(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=500) + 1j * rng.normal(size=500)
        a, b = mc_summary(v), mc_summary(v[rng.permutation(500)])
        assert a == b

    def test_summary_values(self):
        est = mc_summary([1.0, 3.0])
        assert est.estimate == 2.0
        assert est.stderr == pytest.approx(1.0)

    def test_empirical_cf_at_zero(self):
        assert empirical_cf(GAUSS, t=0.0, reps=10).estimate == 1.0

    def test_empirical_cf_matches_psi(self):
        est = empirical_cf(GAUSS, t=1.0, reps=2000, seed=17)
        assert abs(est.estimate - psi(1, 1.0, model=GAUSS, check=False)) <= 3 * est.stderr + 1e-3

    def test_gamma_at_zero_is_real(self):
        est = mc_gamma_at_origin(0.0, GAUSS, reps=2000, seed=17)
        assert abs(est.estimate.imag) <= 3 * est.stderr_im + 1e-15

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            mc_gamma_at_origin(1.0, GAUSS, window_radius=1.0, reps=10)
