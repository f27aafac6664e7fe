import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svarma import model as M
from svarma.errors import ContractError, NotNormalizableError, TieError
from svarma.shockdist import ComponentDensity

REPORTED_BETA = [-0.0168, 0.0280, 0.1224, 0.175, -0.1282, 0.0107]
REPORTED_B = np.array([[1, 0.1224, -0.1282], [-0.0168, 1, 0.0107], [0.0280, 0.175, 1]])
REPORTED_SIGMA = np.array([0.0685, 0.0315, 0.14])


class TestH:
    def test_scalar(self):
        assert M.build_H(1).shape == (1, 0)

    def test_bivariate_column_major(self):
        H = M.build_H(2)
        vecB = H @ np.array([0.7, -0.2]) + np.eye(2).reshape(-1, order="F")
        np.testing.assert_array_equal(vecB, [1, 0.7, -0.2, 1])

    def test_trivariate(self):
        H = M.build_H(3)
        assert H.shape == (9, 6)
        np.testing.assert_array_equal(H.sum(axis=0), 1)
        offdiag = 1 - np.eye(3).reshape(-1, order="F")
        np.testing.assert_array_equal(H.sum(axis=1), offdiag)


class TestBeta:
    def test_zero(self):
        np.testing.assert_array_equal(M.b_from_beta(np.zeros(6), 3), np.eye(3))

    def test_reported_matrix(self):
        np.testing.assert_array_equal(M.b_from_beta(REPORTED_BETA, 3), REPORTED_B)

    @settings(max_examples=30)
    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
    def test_round_trip(self, beta):
        assert M.beta_from_b(M.b_from_beta(beta, 3)).tolist() == list(np.asarray(beta, float))

    def test_nonunit_diagonal(self):
        with pytest.raises(ContractError):
            M.beta_from_b(np.diag([2.0, 1.0]))


class TestTheta:
    def test_pack_unpack_exact(self):
        spec = M.SvarmaSpec(2, 2, 1, ("laplace", {"family": "student_t", "lambda": [5.0]}))
        vec = np.random.default_rng(0).standard_normal(spec.dim)
        theta = M.ThetaVector.unpack(spec, vec)
        assert theta.pack().tobytes() == vec.tobytes()

    def test_matrix_views(self):
        ar = [np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([[0.5, 0.6], [0.7, 0.8]])]
        theta = M.ThetaVector.from_matrices(ar, [], np.eye(2), [1, 1])
        np.testing.assert_array_equal(theta.pi2[:4], [0.1, 0.3, 0.2, 0.4])
        np.testing.assert_array_equal(theta.ar_coeffs, ar)

    def test_spec_checks(self):
        with pytest.raises(ContractError):
            M.SvarmaSpec(2, 0, 0, ("gaussian", "gaussian"))
        with pytest.raises(ContractError):
            M.SvarmaSpec(2, 0, 0, ("laplace",))
        spec = M.SvarmaSpec(2, 1, 0)
        assert spec.densities == (ComponentDensity("laplace"),) * 2
        assert M.SvarmaSpec.from_json(spec.to_json()) == spec


class TestValidate:
    def test_valid(self):
        spec = M.SvarmaSpec(1, 1, 0)
        assert M.validate(spec, M.theta_for_spec(spec, ar=[0.5])) == []

    def test_unstable(self):
        spec = M.SvarmaSpec(2, 1, 0)
        theta = M.theta_for_spec(spec, ar=[np.diag([1.05, 0.2])])
        assert any("stability" in p for p in M.validate(spec, theta))

    def test_common_factor(self):
        spec = M.SvarmaSpec(1, 1, 1)
        theta = M.theta_for_spec(spec, ar=[0.4], ma=[-0.4])
        assert any("coprime" in p for p in M.validate(spec, theta))

    def test_single_violation_mutants(self):
        spec = M.SvarmaSpec(2, 1, 1, ("laplace", "student_t"))
        base = M.theta_for_spec(spec, [np.diag([0.5, 0.2])], [np.diag([0.3, 0.4])],
                                [[1, 0.2], [0.1, 1]], [1, 2], [6.0])
        assert M.validate(spec, base) == []
        mutants = {
            "invertibility": base.replace(pi3=[2.0, 0, 0, 0.4]),
            "sigma": base.replace(sigma=[1.0, -1.0]),
            "lambda": base.replace(lam=[1.5]),
            "B": base.replace(beta=[1.0, 1.0]),
            "full rank": base.replace(pi2=[0.5, 0, 0, 0], pi3=[0.3, 0, 0, 0]),
        }
        for key, theta in mutants.items():
            problems = M.validate(spec, theta)
            assert problems and any(key in p for p in problems), (key, problems)


def _cov(B, sigma):
    Bs = B * sigma
    return Bs @ Bs.T


class TestSchemes:
    def test_reported_estimate_is_fixed_point(self):
        out = M.normalize_scheme_a(REPORTED_B, REPORTED_SIGMA)
        np.testing.assert_allclose(out.B, REPORTED_B, atol=1e-15)
        np.testing.assert_allclose(out.sigma, REPORTED_SIGMA, atol=1e-15)

    def test_scale_absorbed(self):
        out = M.normalize_scheme_a(np.diag([2.0, 1.0]), [1.0, 1.0])
        np.testing.assert_array_equal(out.B, np.eye(2))
        np.testing.assert_array_equal(out.sigma, [2.0, 1.0])

    def test_scheme_b_sign(self):
        out = M.normalize_scheme_b(np.diag([-1.0, 1.0]), [1.0, 1.0])
        np.testing.assert_array_equal(np.abs(out.B), np.eye(2))
        assert np.all(np.diag(out.B) > 0)
        np.testing.assert_array_equal(out.sigma, [1.0, 1.0])

    def test_scheme_b_identity(self):
        out = M.normalize_scheme_b(np.eye(2), [1.0, 3.0])
        np.testing.assert_array_equal(out.B, np.eye(2))

    def test_scheme_c(self):
        np.testing.assert_array_equal(M.normalize_scheme_c(np.eye(2), [1, 1]).B, np.eye(2))
        out = M.normalize_scheme_c(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 2.0])
        np.testing.assert_array_equal(out.B, np.eye(2))
        np.testing.assert_array_equal(out.sigma, [2.0, 1.0])

    def test_ties(self):
        with pytest.raises(NotNormalizableError):
            M.normalize_scheme_a(np.array([[1.0, 1.0], [-1.0, 1.0]]), [1, 1])
        with pytest.raises(TieError):
            # two columns equal up to 1e-11 after normalization
            M.normalize_scheme_c(np.array([[1.0, 1.0], [0.0, 1e-11]]), [1, 1])
        with pytest.raises(TieError):
            # largest entries of the first column tie with opposite signs
            M.normalize_scheme_c(np.array([[1.0, 0.0], [-1.0, 1.0]]), [1, 1])

    @pytest.mark.parametrize("scheme", ["A", "B", "C"])
    def test_unique_representative(self, scheme):
        """Exactly one signed permutation of a normalized B satisfies the scheme."""
        rng = np.random.default_rng(11)
        n = 3
        B = rng.standard_normal((n, n))
        ref = M.normalize(B, np.ones(n), scheme).B
        hits = 0
        for P in M.signed_permutations(n):
            cand = ref @ P
            out = M.normalize(cand, np.ones(n), scheme)
            assert np.max(np.abs(out.B - ref)) < 1e-10
            # the candidate itself satisfies the scheme only for the identity
            if np.max(np.abs(out.B - cand)) < 1e-12:
                hits += 1
        assert hits == 1

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.sampled_from("ABC"))
    def test_pd_invariance(self, seed, n, scheme):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((n, n))
        sigma = rng.uniform(0.2, 3.0, n)
        perm = rng.permutation(n)
        signs = rng.choice([-1.0, 1.0], n)
        D = rng.uniform(0.2, 5.0, n)
        P = np.zeros((n, n))
        P[perm, np.arange(n)] = signs
        B2 = B @ P @ np.diag(D)
        sigma2 = sigma[perm] / D
        try:
            r1 = M.normalize(B, sigma, scheme)
        except NotNormalizableError:
            with pytest.raises(NotNormalizableError):
                M.normalize(B2, sigma2, scheme)
            return
        r2 = M.normalize(B2, sigma2, scheme)
        assert np.max(np.abs(r1.B - r2.B)) < 1e-10
        assert np.max(np.abs(r1.sigma - r2.sigma)) < 1e-10
        assert np.max(np.abs(_cov(r1.B, r1.sigma) - _cov(B, sigma))) < 1e-10
        np.testing.assert_allclose(B @ r1.P @ r1.D, r1.B, atol=1e-12)

    def test_scheme_b_unit_norm(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            out = M.normalize_scheme_b(rng.standard_normal((3, 3)), np.ones(3))
            np.testing.assert_allclose(np.linalg.norm(out.B, axis=0), 1, atol=1e-12)


def test_relabel_permutes_densities():
    spec = M.SvarmaSpec(2, 0, 0, ("laplace", {"family": "student_t", "lambda": [5.0]}))
    theta = M.theta_for_spec(spec, B=[[1.0, 3.0], [0.5, 1.0]], sigma=[1.0, 2.0], lam=[5.0])
    norm = M.normalize_scheme_a(theta.B, theta.sigma)
    new_spec, new_theta = M.relabel(spec, theta, norm)
    assert [d.family for d in new_spec.densities] == ["student_t", "laplace"]
    np.testing.assert_allclose(_cov(new_theta.B, new_theta.sigma), _cov(theta.B, theta.sigma))
    assert new_theta.lam.tolist() == [5.0]
