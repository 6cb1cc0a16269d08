import numpy as np
import pytest

import vesselkit as vk
from vesselkit.errors import GridMismatch, NonFinite, SingularSigma1
from vesselkit.matrix_kernel import frob

from helpers import const, rand_complex, rand_hermitian, rand_skew


def coefficient_fixture(n_steps, m=2, seed=8, sigma2_scale=0.25, gamma_scale=0.3):
    """Constant sigma1 with skew gamma: the reflection identities hold exactly."""
    rng = np.random.default_rng(seed)
    grid = vk.TimeGrid(0.0, 1.0, n_steps)
    s1 = const(np.diag([1.0, -1.0]), grid)
    s2 = const(rand_hermitian(rng, m, sigma2_scale), grid)
    g = const(rand_skew(rng, m, gamma_scale), grid)
    return grid, s1, s2, g


class TestIntegrateLinearOde:
    def test_zero_coefficient(self):
        grid = vk.TimeGrid(0.0, 1.0, 10)
        fam = vk.integrate_linear_ode(const(np.zeros((2, 2)), grid), np.eye(2), grid)
        assert all(np.allclose(fam[i], np.eye(2)) for i in range(11))

    def test_constant_coefficient_matches_exponential(self):
        rng = np.random.default_rng(0)
        k = rand_complex(rng, (3, 3), 0.4)
        grid = vk.TimeGrid(0.0, 1.0, 64)
        fam = vk.integrate_linear_ode(const(k, grid), np.eye(3), grid)
        assert frob(fam[64] - vk.matrix_exp(k)) < 1e-8

    def test_richardson_order(self):
        rng = np.random.default_rng(1)
        k = rand_complex(rng, (3, 3))
        k = 0.6 * k / frob(k)
        ref = vk.matrix_exp(k)
        errs = []
        for n_steps in (16, 32):
            grid = vk.TimeGrid(0.0, 1.0, n_steps)
            fam = vk.integrate_linear_ode(const(k, grid), np.eye(3), grid)
            errs.append(frob(fam[n_steps] - ref))
        assert 12.0 <= errs[0] / errs[1] <= 20.0

    def test_backward_inverts_forward(self):
        rng = np.random.default_rng(2)
        grid = vk.TimeGrid(0.0, 1.0, 50)
        coeff = vk.GridOperatorFamily.from_callable(
            lambda t: 0.4 * np.array([[1j * t, 0.3], [-0.3, -0.5j * t]]), grid
        )
        fwd = vk.integrate_linear_ode(coeff, np.eye(2), grid, "forward")
        bwd = vk.integrate_linear_ode(coeff, fwd[50], grid, "backward")
        assert frob(bwd[0] - np.eye(2)) < 1e-9

    def test_determinism(self):
        rng = np.random.default_rng(3)
        k = rand_complex(rng, (2, 2))
        grid = vk.TimeGrid(0.0, 1.0, 30)
        a = vk.integrate_linear_ode(const(k, grid), np.eye(2), grid)
        b = vk.integrate_linear_ode(const(k, grid), np.eye(2), grid)
        assert np.array_equal(a.data, b.data)

    def test_blowup_raises(self):
        grid = vk.TimeGrid(0.0, 100.0, 100)
        with pytest.raises(NonFinite):
            vk.integrate_linear_ode(const(1e6 * np.eye(1), grid), np.array([[1.0]]), grid)


class TestFundamentalMatrix:
    def test_constant_coefficient_closed_form(self):
        rng = np.random.default_rng(4)
        grid = vk.TimeGrid(0.0, 1.0, 100)
        m = 2
        g = rand_skew(rng, m, 0.5)
        lam = 0.4 + 0.3j
        phi = vk.fundamental_matrix(lam, const(np.eye(m), grid), const(np.eye(m), grid),
                                    const(g, grid), grid)
        ref = vk.matrix_exp((lam * np.eye(m) + g) * 1.0)
        assert frob(phi[100] - ref) < 1e-8

    def test_identity_at_base(self):
        grid, s1, s2, g = coefficient_fixture(40)
        phi = vk.fundamental_matrix(1.0 + 2.0j, s1, s2, g, grid, base_index=17)
        assert frob(phi[17] - np.eye(2)) == 0.0

    def test_scalar_exponential(self):
        grid = vk.TimeGrid(0.0, 1.0, 200)
        one = const(np.eye(1), grid)
        zero = const(np.zeros((1, 1)), grid)
        phi = vk.fundamental_matrix(1.0, one, one, zero, grid)
        assert abs(phi[200][0, 0] - np.e) < 1e-8

    def test_singular_sigma1(self):
        grid = vk.TimeGrid(0.0, 1.0, 10)
        s1 = const(np.diag([1.0, 0.0]), grid)
        with pytest.raises(SingularSigma1):
            vk.fundamental_matrix(1.0, s1, s1, s1, grid)

    def test_cocycle(self):
        grid, s1, s2, g = coefficient_fixture(100)
        lam = 0.8 + 0.3j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phi_mid = vk.fundamental_matrix(lam, s1, s2, g, grid, base_index=50)
        defect = frob(phi[100] - phi_mid[100] @ phi[50])
        assert defect < 100.0 * grid.h ** 4


class TestPhiSymmetry:
    def test_skew_gamma_small_residual(self):
        grid, s1, s2, g = coefficient_fixture(200)
        lam = 0.4 + 0.3j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phic = vk.fundamental_matrix(-np.conj(lam), s1, s2, g, grid)
        assert vk.phi_symmetry_residual(phi, phic, s1) < 1e-7

    def test_base_node_contributes_zero(self):
        grid, s1, s2, g = coefficient_fixture(20)
        lam = 1.0 + 1.0j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phic = vk.fundamental_matrix(-np.conj(lam), s1, s2, g, grid)
        lhs = s1[0] @ phi[0]
        rhs = np.linalg.inv(phic[0]).conj().T @ s1[0]
        assert frob(lhs - rhs) == 0.0

    def test_imaginary_lambda_self_paired(self):
        grid, s1, s2, g = coefficient_fixture(200)
        lam = 0.9j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        assert vk.phi_symmetry_residual(phi, phi, s1) < 1e-7

    def test_wrong_pairing_rejected(self):
        grid, s1, s2, g = coefficient_fixture(20)
        phi = vk.fundamental_matrix(1.0 + 1.0j, s1, s2, g, grid)
        other = vk.fundamental_matrix(2.0 + 1.0j, s1, s2, g, grid)
        with pytest.raises(GridMismatch):
            vk.phi_symmetry_residual(phi, other, s1)

    def test_constant_coefficients_machine_exact(self):
        # For constant coefficients the one-step polynomial preserves the
        # reflection identity to O(h^6) per step; the residual is noise.
        grid, s1, s2, g = coefficient_fixture(100)
        lam = 0.4 + 0.3j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phic = vk.fundamental_matrix(-np.conj(lam), s1, s2, g, grid)
        assert vk.phi_symmetry_residual(phi, phic, s1) < 1e-12

    def test_convergence_order_varying_gamma(self):
        # Interpolated skew coefficients stay skew, so the integrator
        # preserves the identity at (at least) its own order even for
        # time-varying gamma; assert strong decay under halving.
        rng = np.random.default_rng(12)
        skew = rand_skew(rng, 2, 0.4)
        herm = rand_hermitian(rng, 2, 0.25)
        lam = 0.4 + 0.3j
        res = []
        for n_steps in (50, 100):
            grid = vk.TimeGrid(0.0, 1.0, n_steps)
            s1 = const(np.diag([1.0, -1.0]), grid)
            s2 = const(herm, grid)
            g = vk.GridOperatorFamily.from_callable(
                lambda t: (1.0 + 0.4 * np.sin(3.0 * t)) * skew, grid
            )
            phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
            phic = vk.fundamental_matrix(-np.conj(lam), s1, s2, g, grid)
            res.append(vk.phi_symmetry_residual(phi, phic, s1))
        assert res[1] < res[0] / 8.0


class TestPhiBilinear:
    def test_reflected_pair_is_conserved(self):
        grid, s1, s2, g = coefficient_fixture(200)
        lam = 0.4 + 0.3j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phic = vk.fundamental_matrix(-np.conj(lam), s1, s2, g, grid)
        # mu = -conj(lam) makes Phi(mu)^H sigma1 Phi(lam) constant, so the
        # bilinear residual reduces to finite-difference noise.
        assert vk.phi_bilinear_residual(phic, phi, s1, s2) < 1e-6

    def test_sigma2_zero_conserved(self):
        rng = np.random.default_rng(9)
        grid = vk.TimeGrid(0.0, 1.0, 200)
        s1 = const(np.diag([1.0, -1.0]), grid)
        s2 = const(np.zeros((2, 2)), grid)
        g = const(rand_skew(rng, 2, 0.4), grid)
        phi = vk.fundamental_matrix(1.2 + 0.4j, s1, s2, g, grid)
        phim = vk.fundamental_matrix(-0.3 + 0.8j, s1, s2, g, grid)
        assert vk.phi_bilinear_residual(phim, phi, s1, s2) < 1e-6

    def test_scalar_constant_coefficients_analytic(self):
        grid = vk.TimeGrid(0.0, 1.0, 400)
        s1 = const(np.eye(1), grid)
        s2 = const(0.5 * np.eye(1), grid)
        g = const(0.3j * np.eye(1), grid)
        lam, mu = 0.7 + 0.2j, -0.1 + 0.6j
        phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
        phim = vk.fundamental_matrix(mu, s1, s2, g, grid)
        # d/dt [conj(Phi(mu)) Phi(lam)] = (lam + conj(mu)) * 0.5 * conj(Phi(mu)) Phi(lam)
        assert vk.phi_bilinear_residual(phim, phi, s1, s2) < 1e-6

    def test_generic_pair_residual(self):
        grid, s1, s2, g = coefficient_fixture(400)
        phi = vk.fundamental_matrix(0.4 + 0.3j, s1, s2, g, grid)
        phim = vk.fundamental_matrix(-0.2 + 0.5j, s1, s2, g, grid)
        assert vk.phi_bilinear_residual(phim, phi, s1, s2) < 1e-6

    def test_central_difference_order(self):
        # The bilinear residual is dominated by the O(h^2) derivative stencil.
        lam, mu = 0.7 + 0.2j, -0.1 + 0.6j
        res = []
        for n_steps in (100, 200):
            grid, s1, s2, g = coefficient_fixture(n_steps)
            phi = vk.fundamental_matrix(lam, s1, s2, g, grid)
            phim = vk.fundamental_matrix(mu, s1, s2, g, grid)
            res.append(vk.phi_bilinear_residual(phim, phi, s1, s2))
        assert 3.0 <= res[0] / res[1] <= 5.5


class TestGridTypes:
    def test_grid_nodes(self):
        grid = vk.TimeGrid(0.0, 2.0, 4)
        assert np.allclose(grid.nodes(), [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.h == 0.5

    def test_family_shape_validation(self):
        grid = vk.TimeGrid(0.0, 1.0, 2)
        from vesselkit.errors import ShapeMismatch

        with pytest.raises(ShapeMismatch):
            vk.GridOperatorFamily(grid, np.zeros((2, 2, 2)))  # needs 3 samples

    def test_family_data_readonly(self):
        grid = vk.TimeGrid(0.0, 1.0, 2)
        fam = const(np.eye(2), grid)
        with pytest.raises(ValueError):
            fam.data[0, 0, 0] = 5.0

    def test_family_derivative_linear_exact(self):
        grid = vk.TimeGrid(0.0, 1.0, 10)
        fam = vk.GridOperatorFamily.from_callable(lambda t: np.array([[2.0 * t]]), grid)
        d = vk.family_derivative(fam)
        assert all(abs(d[i][0, 0] - 2.0) < 1e-12 for i in range(11))
