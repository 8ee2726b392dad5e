"""Kernel quadrature module: rules, normalization, q, lambda(p), sampling."""

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from homoboltz.errors import KernelNormalizationError, UnsupportedDimension
from homoboltz.kernels import (bump_kernel, build_quadrature, isotropic_kernel,
                               lambda_p, normalize_kernel, q_coefficient,
                               sample_directions, tabulated_kernel)


class TestBuildQuadrature:
    def test_circle_rule(self):
        q = build_quadrature(2, 64)
        assert q.size == 64
        assert np.allclose(q.weights, 2 * np.pi / 64)
        assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0, atol=1e-14)

    def test_sphere_product_rule(self):
        q = build_quadrature(3, 16)
        assert q.size == 16 * 32
        assert abs(q.weights.sum() - 4 * np.pi) < 1e-12
        assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0, atol=1e-14)

    def test_isotropic_tensor_identity(self):
        # exact identity: int n (x) n dn / |S^2| = I / 3
        q = build_quadrature(3, 16)
        nn = np.einsum("qi,qj,q->ij", q.nodes, q.nodes, q.weights) / (4 * np.pi)
        assert np.abs(nn - np.eye(3) / 3).max() < 1e-12

    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedDimension):
            build_quadrature(4, 16)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            build_quadrature(3, 3)


class TestNormalize:
    def test_constant_kernel_d3(self, quad3):
        k = normalize_kernel(isotropic_kernel(3), quad3)
        assert abs(k.g(np.array([0.3]))[0] - 1 / (4 * np.pi)) < 1e-14

    def test_constant_kernel_d2(self, quad2):
        k = normalize_kernel(isotropic_kernel(2), quad2)
        assert abs(k.g(np.array([-0.5]))[0] - 1 / (2 * np.pi)) < 1e-14

    def test_quadratic_profile_analytic_constant(self, quad3):
        # c * int (1 + eta^2) dn = 1 with int eta^2 over S^2 = 4 pi / 3
        k = normalize_kernel(
            tabulated_kernel(3, np.linspace(-1, 1, 4001), 1 + np.linspace(-1, 1, 4001) ** 2),
            quad3)
        expect = 1.0 / (4 * np.pi * (1 + 1 / 3))
        assert abs(k.normalization_constant - expect) < 1e-8
        # cross-check by quadrature: the normalized integral is one
        e = np.array([1.0, 0, 0])
        s = quad3.nodes @ e
        assert abs(quad3.weights @ k.g(s) - 1.0) < 1e-12

    def test_idempotent(self, quad3):
        k1 = normalize_kernel(isotropic_kernel(3), quad3)
        k2 = normalize_kernel(k1, quad3)
        assert abs(k1.normalization_constant - k2.normalization_constant) < 1e-15

    def test_normalized_for_every_direction(self, quad3, iso3):
        rng = np.random.default_rng(3)
        sums = []
        for _ in range(5):
            w = rng.standard_normal(3)
            w /= np.linalg.norm(w)
            sums.append(quad3.weights @ iso3.g(quad3.nodes @ w))
        assert max(sums) - min(sums) < 1e-10
        assert abs(sums[0] - 1.0) < 1e-10

    def test_rejects_zero_profile(self, quad3):
        with pytest.raises(KernelNormalizationError):
            normalize_kernel(
                tabulated_kernel(3, np.array([-1.0, 1.0]), np.array([0.0, 0.0])), quad3)


class TestQCoefficient:
    def test_isotropic_d3(self, iso3, quad3):
        assert abs(q_coefficient(iso3, quad3) - 2 / 3) < 1e-10

    def test_isotropic_d2(self, iso2, quad2):
        assert abs(q_coefficient(iso2, quad2) - 1 / 2) < 1e-10

    def test_bump_kernel_small_q(self):
        # mass concentrated near eta = +-1 makes 1 - eta^2 negligible;
        # the Gaussian profile exp(-((eta-1)/w)^2) gives q ~ 2 w / sqrt(pi)
        quad = build_quadrature(3, 600)
        qs = []
        for w in (0.008, 0.005):
            k = normalize_kernel(bump_kernel(3, 1.0, w), quad)
            qs.append(q_coefficient(k, quad, dir_tol=1e-6))
        assert qs[0] < 0.01
        assert qs[1] < qs[0]  # q -> 0 as the bump narrows


class TestLambdaP:
    def test_endpoints_d3(self, iso3, quad3):
        assert abs(lambda_p(iso3, quad3, 0.0) + 1.0) < 1e-10
        assert abs(lambda_p(iso3, quad3, 2.0)) < 1e-10

    def test_endpoints_d2(self, iso2, quad2):
        assert abs(lambda_p(iso2, quad2, 0.0) + 1.0) < 1e-10
        assert abs(lambda_p(iso2, quad2, 2.0)) < 1e-10

    def test_endpoints_hold_for_any_kernel(self, quad3):
        quad = build_quadrature(3, 200)
        k = normalize_kernel(bump_kernel(3, 0.3, 0.2), quad)
        assert abs(lambda_p(k, quad, 0.0, dir_tol=1e-8) + 1.0) < 1e-10
        assert abs(lambda_p(k, quad, 2.0, dir_tol=1e-8)) < 1e-10

    def test_closed_form_isotropic_d3(self, iso3, quad3):
        # substitution u = (1 +- s)/2 gives lambda(p) = 1 - 4/(p+2);
        # even p is a polynomial integrand (quadrature-exact)
        for p in (0.0, 2.0, 4.0, 6.0, 8.0):
            assert abs(lambda_p(iso3, quad3, p) - (1 - 4 / (p + 2))) < 1e-8

    def test_closed_form_fractional_p(self):
        # (1 +- s)^{p/2} has endpoint branch points; needs a finer rule
        quad = build_quadrature(3, 800)
        k = normalize_kernel(isotropic_kernel(3), quad)
        for p in (1.0, 3.0, 6.5):
            assert abs(lambda_p(k, quad, p, check_dirs=0) - (1 - 4 / (p + 2))) < 1e-8

    def test_monotone_in_p(self, iso3, quad3, iso2, quad2):
        for k, q in ((iso3, quad3), (iso2, quad2)):
            ps = np.arange(0, 8.01, 0.25)
            lams = [lambda_p(k, q, p, check_dirs=0) for p in ps]
            assert np.all(np.diff(lams) > 0)

    def test_negative_p_rejected(self, iso3, quad3):
        with pytest.raises(ValueError):
            lambda_p(iso3, quad3, -0.5)


class TestSampleDirection:
    def test_isotropic_symmetry(self, iso3):
        rng = np.random.default_rng(10)
        u = np.array([0.0, 0.0, 1.0])
        n = sample_directions(iso3, rng, np.tile(u, (200_000, 1)))
        s = n @ u
        # mean 0 within 3 sigma / sqrt(N); Var(s) = 1/3 for uniform
        assert abs(s.mean()) < 3 * np.sqrt(1 / 3 / s.size)
        # second moment 1/3 within 3 standard errors; Var(s^2) = 1/5 - 1/9
        assert abs((s**2).mean() - 1 / 3) < 3 * np.sqrt((1 / 5 - 1 / 9) / s.size)
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)

    def test_one_sided_kernel_ks(self, quad3):
        # empirical CDF of n.u against direct numerical integration
        quad = build_quadrature(3, 64)
        k = normalize_kernel(
            tabulated_kernel(3, np.linspace(-1, 1, 8001),
                             np.maximum(np.linspace(-1, 1, 8001), 0.0)), quad)
        rng = np.random.default_rng(5)
        u = np.array([1.0, 0.0, 0.0])
        n_samp = 1_000_000
        s = np.sort(sample_directions(k, rng, np.tile(u, (n_samp, 1))) @ u)
        norm = scipy_quad(lambda x: max(x, 0.0), -1, 1)[0]
        grid = np.linspace(-1, 1, 401)
        cdf = np.array([scipy_quad(lambda x: max(x, 0.0) / norm, -1, g)[0] for g in grid])
        emp = np.searchsorted(s, grid, side="right") / n_samp
        assert np.abs(emp - cdf).max() <= 0.005

    def test_d2_sampling(self, iso2):
        rng = np.random.default_rng(2)
        u = np.array([np.cos(0.3), np.sin(0.3)])
        n = sample_directions(iso2, rng, np.tile(u, (100_000, 1)))
        s = n @ u
        assert abs(s.mean()) < 3 / np.sqrt(2 * s.size)  # Var(cos theta) = 1/2
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
