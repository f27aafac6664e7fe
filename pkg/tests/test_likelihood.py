import numpy as np
import pytest

from svarma import likelihood as lik
from svarma.errors import ContractError, SingularMatrixError
from svarma.filter import simulate
from svarma.model import SvarmaSpec, normalize_scheme_a, relabel, theta_for_spec, ThetaVector

from helpers import fd_gradient, kink_free_path, max_rel_error, random_theta, truth


class TestLoglik:
    def test_laplace_at_zero(self):
        spec = SvarmaSpec(1, 0, 0)
        value = lik.loglik(spec, theta_for_spec(spec), np.zeros((7, 1)))
        assert value == pytest.approx(-np.log(np.sqrt(2.0)), abs=1e-15)

    def test_scale_shift(self):
        spec = SvarmaSpec(1, 0, 0)
        l1 = lik.loglik(spec, theta_for_spec(spec), np.zeros((7, 1)))
        l2 = lik.loglik(spec, theta_for_spec(spec, sigma=[2.0]), np.zeros((7, 1)))
        assert l2 - l1 == pytest.approx(-np.log(2.0), abs=1e-15)

    def test_contributions_average(self):
        spec, theta = truth()
        Y = simulate(spec, theta, 100, np.random.default_rng(0)).Y
        lt = lik.loglik_contributions(spec, theta, Y)
        assert lt.shape == (100,)
        assert lik.loglik(spec, theta, Y) == pytest.approx(lt.mean(), abs=1e-14)

    def test_singular_is_minus_inf(self):
        spec = SvarmaSpec(2, 0, 0)
        theta = theta_for_spec(spec).replace(beta=[1.0, 1.0])
        assert lik.loglik(spec, theta, np.ones((4, 2))) == -np.inf

    def test_dimension_mismatch(self):
        spec = SvarmaSpec(2, 1, 0)
        with pytest.raises(ContractError):
            lik.loglik(spec, theta_for_spec(SvarmaSpec(2, 0, 0)), np.ones((4, 2)))

    def test_relabel_invariance(self):
        spec, theta = truth(("laplace", "student_t"), [6.0])
        Y = simulate(spec, theta, 300, np.random.default_rng(1)).Y
        B = np.array([[1.0, 3.0], [0.5, 1.0]])
        theta = theta.replace(beta=[0.5, 3.0])
        spec2, theta2 = relabel(spec, theta, normalize_scheme_a(B, theta.sigma))
        assert abs(lik.loglik(spec, theta, Y) - lik.loglik(spec2, theta2, Y)) < 1e-12


class TestScore:
    def test_sigma_block_closed_form(self):
        spec = SvarmaSpec(1, 0, 0)
        Y = np.random.default_rng(2).standard_normal((50, 1))
        s = 1.7
        g = lik.score(spec, theta_for_spec(spec, sigma=[s]), Y)
        x = np.abs(Y[:, 0]) / s
        assert g[-1] == pytest.approx(np.mean(np.sqrt(2.0) * x - 1.0) / s, rel=1e-13)

    @pytest.mark.parametrize("dims", [(1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 1, 2)])
    @pytest.mark.parametrize("family", ["laplace", "student_t", "gaussian"])
    def test_against_finite_differences(self, dims, family):
        rng = np.random.default_rng(sum(dims))
        n = dims[0]
        dens = (family,) + ("laplace",) * (n - 1)
        spec = SvarmaSpec(*dims, dens)
        lam = [6.0] if family == "student_t" else None
        theta = random_theta(rng, spec, lam=lam)
        Y = kink_free_path(spec, theta, 300, rng)
        g = lik.score(spec, theta, Y)
        assert max_rel_error(g, fd_gradient(spec, theta.pack(), Y)) < 1e-5

    def test_score_contributions_shape(self):
        spec, theta = truth()
        Y = simulate(spec, theta, 40, np.random.default_rng(3)).Y
        assert lik.score_contributions(spec, theta, Y).shape == (40, spec.dim)
        l, g = lik.loglik_and_score(spec, theta, Y)
        assert l == lik.loglik(spec, theta, Y)
        np.testing.assert_array_equal(g, lik.score(spec, theta, Y))


class TestSecondOrder:
    def test_gaussian_sigma_curvature(self):
        spec = SvarmaSpec(1, 0, 0, ("gaussian",))
        H = lik.hessian(spec, theta_for_spec(spec), np.zeros((5, 1)))
        assert H[-1, -1] == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("dens", [("student_t", "gaussian"), ("student_t", "student_t")])
    def test_smooth_asymmetry(self, dens):
        rng = np.random.default_rng(4)
        spec = SvarmaSpec(2, 1, 1, dens)
        lam = [6.0] * sum(d == "student_t" for d in dens)
        theta = random_theta(rng, spec, lam=lam)
        Y = simulate(spec, theta, 500, rng).Y
        res = lik.hessian(spec, theta, Y, full_output=True)
        assert res.method == "central"
        assert res.asymmetry < 1e-4
        np.testing.assert_array_equal(res.hessian, res.hessian.T)

    def test_kink_uses_richardson(self):
        spec, theta = truth()
        Y = simulate(spec, theta, 500, np.random.default_rng(5)).Y
        res = lik.hessian(spec, theta, Y, full_output=True)
        assert res.method == "richardson"
        assert np.all(np.diag(res.hessian) < 0)

    def test_opg_psd(self):
        spec, theta = truth()
        Y = simulate(spec, theta, 200, np.random.default_rng(6)).Y
        J = lik.opg(spec, theta, Y)
        np.testing.assert_allclose(J, J.T)
        assert np.min(np.linalg.eigvalsh(J)) > -1e-12

    def test_opg_rank_one(self):
        spec, theta = truth()
        J = lik.opg(spec, theta, np.array([[0.3, -0.7]]))
        assert np.linalg.matrix_rank(J) <= 1

    def test_asy_cov(self):
        spec, theta = truth()
        Y = simulate(spec, theta, 10_000, np.random.default_rng(7)).Y
        c = lik.asy_cov(spec, theta, Y)
        np.testing.assert_allclose(c.cov * 10_000, np.linalg.inv(lik.opg(spec, theta, Y)), rtol=1e-8)
        np.testing.assert_allclose(c.se, np.sqrt(np.diag(c.cov)))
        h = lik.asy_cov(spec, theta, Y, method="hessian")
        assert np.all(h.se > 0)
        assert np.max(np.abs(np.log(h.se / c.se))) < 0.5
        with pytest.raises(ContractError):
            lik.asy_cov(spec, theta, Y, method="sandwich")

    def test_asy_cov_singular(self):
        spec, theta = truth()
        with pytest.raises(SingularMatrixError):
            lik.asy_cov(spec, theta, np.array([[0.3, -0.7], [0.1, 0.2]]))


def test_sigma_score_vanishes_at_half_root_two():
    spec = SvarmaSpec(1, 0, 0)
    s = 1.3
    g = lik.score(spec, theta_for_spec(spec, sigma=[s]), np.array([[s / np.sqrt(2.0)]]))
    assert abs(g[-1]) < 1e-15


def test_truth_beats_perturbations():
    spec, theta = truth()
    Y = simulate(spec, theta, 20_000, np.random.default_rng(12)).Y
    l0 = lik.loglik(spec, theta, Y)
    rng = np.random.default_rng(13)
    for _ in range(10):
        delta = 0.05 * rng.standard_normal(spec.dim)
        assert lik.loglik(spec, theta.pack() + delta, Y) < l0


def test_methods_agree_at_large_T():
    spec, theta = truth()
    Y = simulate(spec, theta, 10_000, np.random.default_rng(14)).Y
    se_opg = lik.asy_cov(spec, theta, Y).se
    se_h = lik.asy_cov(spec, theta, Y, method="hessian").se
    assert np.max(np.abs(se_h / se_opg - 1.0)) < 0.25
