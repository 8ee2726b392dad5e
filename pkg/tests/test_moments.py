"""Second-moment generator, dominant eigenpair, trajectory and scale factor."""

import numpy as np
import pytest

from conftest import shear_matrix
from homoboltz.errors import DominanceViolation
from homoboltz.moments import (dominant_eigenpair, eigen_residual, evolve_B,
                               extract_lambda_scale, operator_norm,
                               sym_to_vec, vec_to_sym, vectorize_generator)

Q3 = 2.0 / 3.0  # isotropic kernel, d = 3


class TestVectorization:
    def test_isometry(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((3, 3))
        B1, B2 = M + M.T, np.diag([1.0, 2.0, -1.0])
        assert abs(np.vdot(sym_to_vec(B1), sym_to_vec(B2)) - np.trace(B1 @ B2)) < 1e-12
        assert np.abs(vec_to_sym(sym_to_vec(B1), 3) - B1).max() < 1e-14

    def test_spectrum_A_zero(self):
        G = vectorize_generator(np.zeros((3, 3)), Q3, 0.0)
        vals = np.sort(np.linalg.eigvals(G).real)
        # trace direction conserved; traceless part decays at q d/(2(d-1)) = 1/2
        assert np.abs(vals[:5] + 0.5).max() < 1e-12
        assert abs(vals[5]) < 1e-12

    def test_spectrum_A_scalar(self):
        a = 0.07
        G = vectorize_generator(a * np.eye(3), Q3, 0.0)
        vals = np.sort(np.linalg.eigvals(G).real)
        assert np.abs(vals[:5] + (2 * a + 0.5)).max() < 1e-12
        assert abs(vals[5] + 2 * a) < 1e-12

    def test_trace_dynamics(self):
        # d/dt tr B = -2 tr(B A) - 2 beta tr B: the isotropic term is traceless
        rng = np.random.default_rng(1)
        A = rng.standard_normal((3, 3))
        beta = 0.3
        B = rng.standard_normal((3, 3))
        B = B + B.T
        G = vectorize_generator(A, Q3, beta)
        dB = vec_to_sym(G @ sym_to_vec(B), 3)
        assert abs(np.trace(dB) + 2 * np.trace(B @ A) + 2 * beta * np.trace(B)) < 1e-12

    def test_q_range_validated(self):
        with pytest.raises(ValueError):
            vectorize_generator(np.zeros((3, 3)), 1.5, 0.0)


class TestDominantEigenpair:
    def test_A_zero(self):
        pair = dominant_eigenpair(np.zeros((3, 3)), Q3)
        assert abs(pair.beta) < 1e-12
        assert np.abs(pair.N - np.eye(3)).max() < 1e-12
        assert abs(pair.spectral_gap - 0.5) < 1e-12

    @pytest.mark.parametrize("a", [0.001, 0.01])
    def test_A_scalar(self, a):
        pair = dominant_eigenpair(a * np.eye(3), Q3)
        assert abs(pair.beta + a) < 1e-12
        assert np.abs(pair.N - np.eye(3)).max() < 1e-12

    def test_shear_residual_and_normalization(self):
        for K in (0.005, 0.01, 0.02):
            pair = dominant_eigenpair(shear_matrix(3, K), Q3)
            assert eigen_residual(shear_matrix(3, K), Q3, pair.beta, pair.N) < 1e-10
            assert abs(np.trace(pair.N.T @ pair.N) / 3 - 1.0) < 1e-12
            assert np.trace(pair.N) > 0
            assert np.linalg.eigvalsh(pair.N).min() > 0

    def test_perturbation_scaling(self):
        # |beta| <= C eps and ||N - I|| <= C eps with one fitted constant
        rng = np.random.default_rng(4)
        Ahat = rng.standard_normal((3, 3))
        Ahat /= operator_norm(Ahat)
        eps = np.logspace(-4, -2, 5)
        betas, devs = [], []
        for e in eps:
            pair = dominant_eigenpair(e * Ahat, Q3)
            betas.append(abs(pair.beta))
            devs.append(operator_norm(pair.N - np.eye(3)))
        C = max(max(b / e for b, e in zip(betas, eps)),
                max(d / e for d, e in zip(devs, eps)))
        assert np.all(np.array(betas) <= C * eps + 1e-15)
        assert np.all(np.array(devs) <= C * eps + 1e-15)
        assert C < 10.0

    def test_dominant_eigenvalue_real_for_random_A(self):
        # exp(Gt) preserves the cone of covariance matrices, so the top
        # eigenvalue is real well beyond the perturbative gate
        rng = np.random.default_rng(12)
        for _ in range(20):
            A = 0.2 * rng.standard_normal((3, 3))
            pair = dominant_eigenpair(A, Q3)
            assert np.isfinite(pair.beta)
            assert pair.spectral_gap > 0

    def test_dominance_violation_gate(self):
        # the operational gate rejects spectra whose gap is below tolerance
        with pytest.raises(DominanceViolation):
            dominant_eigenpair(shear_matrix(3, 0.01), Q3, gap_tol=1.0)

    def test_homogeneous_equation_trivial(self):
        # (1 + 2 beta) M + M A + (M A)^T = 0 has only M = 0 for small A:
        # the d^2-dimensional linear system has full rank
        beta = 0.01
        A = shear_matrix(3, 0.1)
        assert operator_norm(A) < 0.5 + beta
        rows = []
        for i in range(3):
            for j in range(3):
                E = np.zeros((3, 3))
                E[i, j] = 1.0
                rows.append(((1 + 2 * beta) * E + E @ A + (E @ A).T).ravel())
        sv = np.linalg.svd(np.stack(rows), compute_uv=False)
        assert sv.min() > 0.5


class TestEvolveB:
    def test_A_zero_trace_and_traceless(self):
        B0 = np.diag([1.0, 2.0, 3.0])
        t = np.linspace(0.0, 4.0, 9)
        traj = evolve_B(np.zeros((3, 3)), Q3, 0.0, B0, t)
        for ti, B in zip(t, traj.matrices):
            assert abs(np.trace(B) - 6.0) < 1e-12
            expect = 2 * np.eye(3) + np.exp(-ti / 2) * (B0 - 2 * np.eye(3))
            assert np.abs(B - expect).max() < 1e-12

    def test_dominant_mode_stationary(self):
        K = 0.01
        A = shear_matrix(3, K)
        pair = dominant_eigenpair(A, Q3)
        lam2 = 1.7
        traj = evolve_B(A, Q3, pair.beta, lam2 * pair.N, np.array([0.0, 2.0, 10.0]))
        for B in traj.matrices:
            assert np.abs(B - lam2 * pair.N).max() < 1e-10

    def test_against_rk4_oracle(self):
        # independent fixed-step integrator of the same linear ODE
        rng = np.random.default_rng(8)
        A = 0.05 * rng.standard_normal((3, 3))
        beta = 0.013
        M = rng.standard_normal((3, 3))
        B0 = M @ M.T

        def rhs(B):
            Ab = A + beta * np.eye(3)
            BA = B @ Ab
            return -(BA + BA.T) - 0.5 * Q3 * 3 / 2 * (B - np.trace(B) / 3 * np.eye(3))

        B = B0.copy()
        dt = 1e-3
        for _ in range(int(round(2.0 / dt))):
            k1 = rhs(B)
            k2 = rhs(B + dt / 2 * k1)
            k3 = rhs(B + dt / 2 * k2)
            k4 = rhs(B + dt * k3)
            B = B + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj = evolve_B(A, Q3, beta, B0, np.array([2.0]))
        assert np.abs(traj.matrices[0] - B).max() < 1e-8

    def test_exponential_convergence_to_scaled_N(self):
        # ||B(t) - lambda^2 N|| <= C exp(-gap t) on t in [0, 20/gap]
        K = 0.02
        A = shear_matrix(3, K)
        pair = dominant_eigenpair(A, Q3)
        rng = np.random.default_rng(9)
        M = rng.standard_normal((3, 3))
        B0 = M @ M.T
        lam = extract_lambda_scale(A, Q3, pair.beta, pair.N, B0)
        gap = pair.spectral_gap
        t = np.linspace(0.0, 20.0 / gap, 41)
        traj = evolve_B(A, Q3, pair.beta, B0, t)
        dev0 = np.linalg.norm(B0 - lam**2 * pair.N)
        for ti, B in zip(t[1:], traj.matrices[1:]):
            dev = np.linalg.norm(B - lam**2 * pair.N)
            assert dev <= 3.0 * dev0 * np.exp(-gap * ti) + 1e-12

    def test_positive_semidefinite_preserved(self):
        A = shear_matrix(3, 0.01)
        pair = dominant_eigenpair(A, Q3)
        B0 = np.diag([1.0, 0.0, 0.5])
        traj = evolve_B(A, Q3, pair.beta, B0, np.linspace(0, 10, 21))
        for B in traj.matrices:
            assert np.linalg.eigvalsh(B).min() > -1e-12


class TestLambdaScale:
    def test_pure_mode(self):
        K = 0.01
        A = shear_matrix(3, K)
        pair = dominant_eigenpair(A, Q3)
        lam = extract_lambda_scale(A, Q3, pair.beta, pair.N, 4.0 * pair.N)
        assert abs(lam - 2.0) < 1e-12

    def test_dirac_case(self):
        pair = dominant_eigenpair(np.zeros((3, 3)), Q3)
        lam = extract_lambda_scale(np.zeros((3, 3)), Q3, pair.beta, pair.N,
                                   np.zeros((3, 3)))
        assert lam == 0.0

    def test_A_zero_trace_average_and_longtime(self):
        B0 = np.diag([0.5, 1.0, 2.5])
        pair = dominant_eigenpair(np.zeros((3, 3)), Q3)
        lam = extract_lambda_scale(np.zeros((3, 3)), Q3, 0.0, pair.N, B0)
        assert abs(lam**2 - np.trace(B0) / 3) < 1e-12
        # cross-check against the trajectory at t = 50
        traj = evolve_B(np.zeros((3, 3)), Q3, 0.0, B0, np.array([50.0]))
        assert np.abs(traj.matrices[0] - lam**2 * pair.N).max() < 1e-10
