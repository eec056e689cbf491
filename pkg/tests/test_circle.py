from dataclasses import replace

import numpy as np
import pytest

from ellipticfund.errors import BracketError, InvalidInputError
from ellipticfund.operators import (
    EllipticityPair,
    eigen_symmetric,
    eval_operator,
    f1_operator,
    laplacian,
    linear,
    pucci_minus,
    pucci_plus,
    sample_supinf,
)
from ellipticfund.circle import (
    CircleConfig,
    CircleProfile,
    eigenpair_at_alpha,
    exponent_2d,
    fundamental_profile_2d,
    hessian_homogeneous_2d,
    profile_residuals,
    profile_to_csv,
)
from ellipticfund.radial import exponent_rotinv, rescale_apply, xi_hessian

CFG = CircleConfig()


def fd_hessian_2d(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    H = np.zeros((2, 2))
    e = np.eye(2) * h
    f0 = f(x)
    for i in range(2):
        H[i, i] = (f(x + e[i]) - 2.0 * f0 + f(x - e[i])) / h ** 2
    H[0, 1] = H[1, 0] = (
        f(x + e[0] + e[1]) - f(x + e[0] - e[1]) - f(x - e[0] + e[1]) + f(x - e[0] - e[1])
    ) / (4.0 * h ** 2)
    return H


class TestHomogeneousHessian:
    def test_constant_profile_matches_radial(self):
        for alpha in (0.5, 1.0, 3.0):
            H = hessian_homogeneous_2d(1.0, 0.0, 0.0, alpha, 0.0).to_array()
            assert np.allclose(H, np.diag([alpha * (alpha + 1.0), -alpha]), atol=1e-14)
            assert np.allclose(H, xi_hessian(alpha, np.array([1.0, 0.0])).to_array(),
                               atol=1e-13)

    def test_log_branch_constant_profile(self):
        H = hessian_homogeneous_2d(0.0, 0.0, 0.0, 0.0, 0.0, branch="log").to_array()
        assert np.allclose(H, np.diag([1.0, -1.0]), atol=1e-14)

    def test_matches_finite_difference_hessian(self):
        alpha = 0.8

        def u(x):
            r = np.hypot(x[0], x[1])
            th = np.arctan2(x[1], x[0])
            return r ** -alpha * (1.0 + 0.3 * np.cos(2.0 * th))

        rng = np.random.default_rng(1)
        for _ in range(12):
            r = rng.uniform(0.5, 2.0)
            th = rng.uniform(0.0, 2.0 * np.pi)
            x = r * np.array([np.cos(th), np.sin(th)])
            phi = 1.0 + 0.3 * np.cos(2.0 * th)
            dphi = -0.6 * np.sin(2.0 * th)
            ddphi = -1.2 * np.cos(2.0 * th)
            H = hessian_homogeneous_2d(phi, dphi, ddphi, alpha, th).to_array()
            H = H * r ** (-alpha - 2.0)
            Hfd = fd_hessian_2d(u, x)
            assert np.max(np.abs(H - Hfd)) <= 1e-6 * max(1.0, np.max(np.abs(H)))


class TestEigenpair:
    def test_pucci_root_alpha(self):
        est = eigenpair_at_alpha(pucci_plus(1, 2, 2), 1.0, CFG)
        assert abs(est.mu) <= 1e-4
        assert np.max(np.abs(est.profile.values - 1.0)) <= 1e-6

    def test_pucci_below_root(self):
        est = eigenpair_at_alpha(pucci_plus(1, 2, 2), 0.5, CFG)
        assert est.mu == pytest.approx(0.25, abs=1e-4)
        assert est.eta == pytest.approx(0.5, abs=2e-4)

    def test_laplacian_negative_mu(self):
        est = eigenpair_at_alpha(laplacian(2), 0.5, CFG)
        assert est.mu == pytest.approx(-0.25, abs=1e-4)
        assert est.eta == pytest.approx(-0.5, abs=2e-4)

    def test_negative_alpha_profile_sign(self):
        est = eigenpair_at_alpha(pucci_plus(1, 2, 2), -0.5, CFG)
        assert np.all(est.profile.values < 0)
        # closed form: eta = Lam(n-1) - lam(alpha+1) at radial profiles
        assert est.eta == pytest.approx(2.0 - 0.5, abs=1e-4)

    def test_residual_invariant_at_convergence(self):
        est = eigenpair_at_alpha(pucci_minus(1, 2, 2), 0.7, CFG)
        res = profile_residuals(pucci_minus(1, 2, 2), est.profile, est.mu)
        bound = CFG.tol * (1.0 + abs(est.mu)) * np.max(np.abs(est.profile.values))
        assert np.max(np.abs(res)) <= bound

    def test_dead_zone_rejected(self):
        with pytest.raises(InvalidInputError):
            eigenpair_at_alpha(laplacian(2), 1e-6, CFG)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            eigenpair_at_alpha(pucci_plus(1, 2, 3), 0.5, CFG)


class TestExponent2d:
    def test_pucci_plus(self):
        res = exponent_2d(pucci_plus(1, 2, 2), CFG)
        assert res.alpha_star == pytest.approx(1.0, abs=1e-3)
        assert res.branch == "power"

    def test_pucci_minus(self):
        res = exponent_2d(pucci_minus(1, 2, 2), CFG)
        assert res.alpha_star == pytest.approx(-0.5, abs=1e-3)

    def test_laplacian_log_branch(self):
        res = exponent_2d(laplacian(2), CFG)
        assert res.branch == "log"
        assert res.alpha_star == 0.0
        assert res.residual <= 1e-4

    def test_anisotropic_linear_log_branch(self):
        res = exponent_2d(linear(np.diag([1.0, 4.0])), CFG)
        assert res.branch == "log"
        prof = fundamental_profile_2d(linear(np.diag([1.0, 4.0])), res, CFG)
        assert np.max(prof.values) - np.min(prof.values) > 0.1  # nonconstant level sets

    def test_f1_dim2_is_log(self):
        # at n = 2 both extreme coefficients collapse to Lam: a Laplacian multiple
        res = exponent_2d(f1_operator(1, 2, 2), CFG)
        assert res.branch == "log"

    def test_matches_rotinv_on_invariant_operators(self):
        ops = [pucci_plus(1, 2, 2), pucci_minus(1, 2, 2), pucci_plus(1, 4, 2),
               pucci_minus(2, 3, 2), laplacian(2),
               eigen_symmetric([1.2, 1.7], EllipticityPair(1, 2))]
        for F in ops:
            a_circle = exponent_2d(F, CFG).alpha_star
            a_radial = exponent_rotinv(F).alpha_star
            assert abs(a_circle - a_radial) <= 1e-3, F.kind

    def test_eta_audit_on_clean_operators(self):
        cfg = replace(CFG, audit_eta=True)
        for F in (pucci_plus(1, 2, 2), pucci_minus(1, 2, 2)):
            res = exponent_2d(F, cfg)
            assert res.branch == "power"

    def test_random_supinf_within_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(3):
            F = sample_supinf(2, EllipticityPair(1, 2), rng)
            res = exponent_2d(F, CFG)
            assert -0.5 - 1e-3 <= res.alpha_star <= 1.0 + 1e-3

    def test_dim3_rejected(self):
        with pytest.raises(InvalidInputError):
            exponent_2d(pucci_plus(1, 2, 3), CFG)


class TestFundamentalProfile:
    def test_pucci_profile_is_constant(self):
        F = pucci_plus(1, 2, 2)
        res = exponent_2d(F, CFG)
        prof = fundamental_profile_2d(F, res, CFG)
        assert np.max(np.abs(prof.values - 1.0)) <= 1e-4

    def test_anisotropic_log_profile_closed_form(self):
        F = linear(np.diag([1.0, 4.0]))
        res = exponent_2d(F, CFG)
        prof = fundamental_profile_2d(F, res, CFG)
        th = prof.thetas
        exact = -0.5 * np.log(np.cos(th) ** 2 + 0.25 * np.sin(th) ** 2)
        exact -= exact.mean()
        assert np.max(np.abs(prof.values - exact)) <= 1e-2

    def test_uniqueness_from_random_inits(self):
        F = linear(np.diag([1.0, 4.0]))
        res = exponent_2d(F, CFG)
        p1 = fundamental_profile_2d(F, res, replace(CFG, init_seed=1))
        p2 = fundamental_profile_2d(F, res, replace(CFG, init_seed=2))
        assert np.max(np.abs(p1.values - p2.values)) <= 1e-3

    def test_grid_convergence(self):
        for F in (pucci_plus(1, 2, 2), pucci_minus(1, 2, 2)):
            a256 = exponent_2d(F, CFG).alpha_star
            a512 = exponent_2d(F, replace(CFG, n_theta=512)).alpha_star
            assert abs(a256 - a512) <= 5e-4

    def test_rescale_invariance_of_reconstruction(self):
        F = pucci_plus(1, 2, 2)
        res = exponent_2d(F, CFG)
        prof = fundamental_profile_2d(F, res, CFG)
        u = prof.as_function()
        pts = np.array([[0.3, 0.4], [1.0, 0.0], [-2.0, 1.0]])
        for sigma in (0.5, 2.0):
            Tu = rescale_apply(res.alpha_star, sigma, u)
            for p in pts:
                assert Tu(p) == pytest.approx(u(p), abs=1e-10 * (1 + abs(u(p))))

    def test_csv_export(self, tmp_path):
        F = pucci_plus(1, 2, 2)
        res = exponent_2d(F, CFG)
        prof = fundamental_profile_2d(F, res, CFG)
        path = tmp_path / "profile.csv"
        profile_to_csv(F, prof, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# alpha=")
        assert lines[1] == "theta,phi,residual"
        assert len(lines) == 2 + prof.n_theta


class TestCircleProfileType:
    def test_power_normalization(self):
        p = CircleProfile(8, 3.0 * np.ones(8), 1.0, "power")
        assert np.allclose(p.values, 1.0)

    def test_log_normalization(self):
        p = CircleProfile(8, np.arange(8.0), 0.0, "log")
        assert p.values.mean() == pytest.approx(0.0, abs=1e-14)

    def test_sign_violation_rejected(self):
        with pytest.raises(InvalidInputError):
            CircleProfile(8, np.linspace(-1, 1, 8), 1.0, "power")

    def test_non_power_of_two_rejected(self):
        with pytest.raises(InvalidInputError):
            CircleProfile(10, np.ones(10), 1.0, "power")
