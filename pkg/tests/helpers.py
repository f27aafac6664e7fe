"""Shared fixtures for the test modules."""
from __future__ import annotations

import numpy as np

from svarma import lagpoly
from svarma import likelihood as lik
from svarma.filter import simulate, structural_shocks
from svarma.model import SvarmaSpec, ThetaVector, theta_for_spec, validate

TRUE_AR = [[[0.5, 0.1], [-0.2, 0.3]]]
TRUE_MA = [[[0.3, 0.0], [0.1, -0.2]]]
TRUE_B = [[1.0, 0.4], [-0.3, 1.0]]
TRUE_SIGMA = [1.0, 0.5]


def truth(densities=("laplace", "laplace"), lam=None):
    """Bivariate ARMA(1,1) design used by the Monte Carlo checks."""
    spec = SvarmaSpec(2, 1, 1, densities)
    theta = theta_for_spec(spec, TRUE_AR, TRUE_MA, TRUE_B, TRUE_SIGMA, lam)
    return spec, theta


def random_theta(rng, spec: SvarmaSpec, scale: float = 0.3, lam=None) -> ThetaVector:
    """Draw a valid parameter vector by rejection."""
    n = spec.n
    while True:
        ar = [scale * rng.standard_normal((n, n)) / (i + 1) for i in range(spec.p)]
        ma = [scale * rng.standard_normal((n, n)) / (i + 1) for i in range(spec.q)]
        B = np.eye(n) + 0.4 * rng.standard_normal((n, n)) * (1 - np.eye(n))
        sigma = rng.uniform(0.5, 1.5, n)
        theta = theta_for_spec(spec, ar, ma, B, sigma, lam)
        if not validate(spec, theta):
            return theta


def kink_free_path(spec, theta, T, rng, margin=1e-4, max_tries=50):
    """Simulate until no standardized shock sits within ``margin`` of a Laplace kink."""
    for _ in range(max_tries):
        Y = simulate(spec, theta, T, rng, burnin=100).Y
        x = structural_shocks(theta, Y).standardized
        if np.min(np.abs(x)) > margin:
            return Y
    raise RuntimeError("could not draw a kink-free path")


def fd_gradient(spec, vec, Y, h=1e-6):
    g = np.empty_like(vec)
    for i in range(vec.size):
        e = np.zeros_like(vec)
        e[i] = h
        g[i] = (lik.loglik(spec, vec + e, Y) - lik.loglik(spec, vec - e, Y)) / (2 * h)
    return g


def max_rel_error(a, f, floor=1e-3):
    return float(np.max(np.abs(a - f) / np.maximum(np.abs(f), floor)))


def direct_ma_autocov(coeffs, cov, s):
    """``sum_j C_{j+s} cov C_j'`` by brute force for MA coefficients ``C_0 = I, C_1..``."""
    n = cov.shape[0]
    C = [np.eye(n)] + [np.asarray(c) for c in coeffs]
    out = np.zeros((n, n))
    for j in range(len(C) - s):
        out += C[j + s] @ cov @ C[j].T
    return out


def is_invertible_coeffs(coeffs, n):
    return lagpoly.is_invertible(lagpoly.MatrixPolynomial.ma(coeffs, n))
