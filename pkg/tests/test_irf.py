import importlib

import numpy as np
import pytest

from svarma.errors import ContractError
from svarma.estimate import FitOptions, fit
from svarma.filter import simulate
from svarma.model import SvarmaSpec, theta_for_spec

from helpers import random_theta, truth

# the package namespace exports the irf function under the module's name
I = importlib.import_module("svarma.irf")


def test_impact_is_B():
    _, theta = truth()
    res = I.irf(theta, 0, shock="unit")
    assert res.phi.shape == (1, 2, 2)
    np.testing.assert_array_equal(res.phi[0], theta.B)
    np.testing.assert_array_equal(np.diag(res.phi[0]), 1.0)


def test_ar1_geometric():
    spec = SvarmaSpec(1, 1, 0)
    res = I.irf(theta_for_spec(spec, ar=[0.5]), 6, shock="unit")
    np.testing.assert_allclose(res.phi[:, 0, 0], 0.5 ** np.arange(7), rtol=1e-14)


def test_shock_conventions():
    _, theta = truth()
    unit = I.irf(theta, 4, "unit").responses
    sd = I.irf(theta, 4).responses
    np.testing.assert_allclose(sd, unit * theta.sigma)
    with pytest.raises(ContractError):
        I.irf(theta, 4, "two-sd")
    with pytest.raises(ContractError):
        I.irf(theta, -1)


def test_long_run_sum():
    _, theta = truth()
    phi = I.irf(theta, 400, "unit").phi
    a1 = np.eye(2) - theta.ar_coeffs.sum(axis=0)
    b1 = np.eye(2) + theta.ma_coeffs.sum(axis=0)
    np.testing.assert_allclose(phi.sum(axis=0), np.linalg.solve(a1, b1) @ theta.B, atol=1e-12)


def test_fevd_equal_shares():
    spec = SvarmaSpec(2, 0, 0)
    theta = theta_for_spec(spec, B=[[1.0, 0.0], [1.0, 1.0]])
    f = I.fevd(theta, 3)
    np.testing.assert_allclose(f[0, 1], [0.5, 0.5])
    np.testing.assert_allclose(f[:, 0], np.broadcast_to([1.0, 0.0], (4, 2)))
    np.testing.assert_allclose(f.sum(axis=2), 1.0)


def test_fevd_identity():
    spec = SvarmaSpec(2, 1, 0)
    theta = theta_for_spec(spec, ar=[np.diag([0.5, -0.3])])
    np.testing.assert_array_equal(I.fevd(theta, 5), np.broadcast_to(np.eye(2), (6, 2, 2)))


def test_fevd_degenerate():
    spec = SvarmaSpec(1, 0, 0)
    with pytest.raises(ContractError):
        I.fevd(theta_for_spec(spec, sigma=[0.0]), 2)


@pytest.mark.parametrize("seed", range(10))
def test_state_space_route(seed):
    rng = np.random.default_rng(seed)
    n, p, q = 1 + seed % 3, seed % 3, (seed // 2) % 3
    theta = random_theta(rng, SvarmaSpec(n, p, q))
    k = I.state_space_transfer_coeffs(theta, 30)
    phi = I.irf(theta, 30, "unit").phi
    assert np.max(np.abs(k @ theta.B - phi)) < 1e-10


def test_long_rows():
    _, theta = truth()
    rows = I.irf(theta, 2).long_rows()
    assert len(rows) == 3 * 4 and rows[0][:3] == (0, 0, 0)
    assert np.isnan(rows[0][4])


class TestBootstrap:
    @pytest.fixture(scope="class")
    @staticmethod
    def setup():
        spec, theta = truth()
        Y = simulate(spec, theta, 400, np.random.default_rng(11)).Y
        return spec, theta, Y

    def test_two_replicates_give_extremes(self, setup):
        spec, theta, Y = setup
        with pytest.warns(RuntimeWarning):
            res = I.bootstrap_irf(spec, theta, Y, 4, R=2, level=0.9, rng=5)
        assert res.meta["kept"] == 2
        draws = np.stack([
            I._replicate((spec, theta, _centered(spec, theta, Y), s, 4, "one-sd",
                          FitOptions(covariance=False)))
            for s in np.random.SeedSequence(5).spawn(2)
        ])
        np.testing.assert_array_equal(res.lower, draws.min(axis=0))
        np.testing.assert_array_equal(res.upper, draws.max(axis=0))

    def test_seeded(self, setup):
        spec, theta, Y = setup
        with pytest.warns(RuntimeWarning):
            a = I.bootstrap_irf(spec, theta, Y, 3, R=3, rng=7)
            b = I.bootstrap_irf(spec, theta, Y, 3, R=3, rng=7)
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)
        assert np.all(a.lower <= a.upper)

    def test_impact_diagonal_of_unit_responses(self, setup):
        spec, theta, Y = setup
        with pytest.warns(RuntimeWarning):
            res = I.bootstrap_irf(spec, theta, Y, 2, R=3, rng=8, shock="unit")
        np.testing.assert_array_equal(np.diag(res.lower[0]), 1.0)
        np.testing.assert_array_equal(np.diag(res.upper[0]), 1.0)

    def test_bad_arguments(self, setup):
        spec, theta, Y = setup
        with pytest.raises(ContractError):
            I.bootstrap_irf(spec, theta, Y, 2, R=0)
        with pytest.raises(ContractError):
            I.bootstrap_irf(spec, theta, Y, 2, R=10, level=1.0)


def _centered(spec, theta, Y):
    from svarma.filter import structural_shocks

    z = structural_shocks(theta, Y).standardized
    return z - z.mean(axis=0)


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_bands_cover_point_and_shrink():
    spec, theta = truth()
    widths = []
    for T in (1000, 4000):
        Y = simulate(spec, theta, T, np.random.default_rng(T)).Y
        fitted = fit(Y, spec, FitOptions(covariance=False))
        res = I.bootstrap_irf(fitted.spec, fitted.theta_hat, Y, 6, R=40, level=0.9, rng=1)
        inside = (res.lower <= res.responses) & (res.responses <= res.upper)
        assert inside.mean() >= 0.95
        widths.append(np.median(res.upper - res.lower))
    assert widths[1] < widths[0]
