"""Conditional log-likelihood, analytic score, numeric Hessian and covariance estimators.

With ``eps_t = B^{-1} u_t(theta)`` and ``x_t = Sigma^{-1} eps_t`` the per-period
contribution is

    l_t = sum_i log f_i(x_{i,t}; lambda_i) - log|det B| - sum_i log sigma_i

and ``L_T`` is its time average. Writing ``g_t = B'^{-1} Sigma^{-1} e_{x,t}``
the score blocks are

* ``pi``: ``D_t' g_t`` where ``D_t = du_t / dpi'`` solves
  ``D_t = -(x_{t-1}' (x) I_n) - sum_j b_j D_{t-j}`` for the AR block and the
  same recursion with ``w_{t-1} = (u_{t-1}', ..., u_{t-q}')'`` for the MA block;
* ``beta``: ``-H' vec(g_t eps_t') - H' vec(B'^{-1})``;
* ``sigma``: ``-Sigma^{-2} (e_x (.) eps + sigma)``;
* ``lambda``: ``e_lambda``.

The MA block carries the ``B'^{-1}`` factor, and ``u_t`` does not depend on
``beta``; both are confirmed by the finite-difference tests.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._kernels import lag_filter, lagged_stack
from .errors import ContractError, SingularMatrixError
from .filter import _as_panel, ar_part
from .model import SvarmaSpec, ThetaVector, _offdiag_positions
from .shockdist import is_smooth

DEFAULT_STEP = 1e-5
SINGULAR_COND = 1e14


def _theta(spec: SvarmaSpec, theta) -> ThetaVector:
    if isinstance(theta, ThetaVector):
        if (theta.n, theta.p, theta.q) != (spec.n, spec.p, spec.q):
            raise ContractError("theta does not match the spec dimensions")
        return theta
    return ThetaVector.unpack(spec, theta)


def _evaluate(spec: SvarmaSpec, theta: ThetaVector, Y: np.ndarray, want_score: bool):
    n, p, q = spec.n, spec.p, spec.q
    B = theta.B
    sigma = theta.sigma
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularMatrixError("B is singular", cond)
    lam_blocks = theta.lambda_blocks(spec)

    u = lag_filter(ar_part(theta, Y), theta.ma_coeffs)
    B_inv = np.linalg.inv(B)
    eps = u @ B_inv.T
    x = eps / sigma
    T = Y.shape[0]

    logf = np.zeros(T)
    for i, dens in enumerate(spec.densities):
        logf += dens.log_density(x[:, i], lam_blocks[i] if dens.n_params else None)
    _, logdet = np.linalg.slogdet(B)
    lt = logf - logdet - np.sum(np.log(sigma))
    if not want_score:
        return lt, None

    ex = np.column_stack([
        dens.e_x(x[:, i], lam_blocks[i] if dens.n_params else None)
        for i, dens in enumerate(spec.densities)
    ])
    # rows are g_t' = e_x' Sigma^{-1} B^{-1}
    g = (ex / sigma) @ B_inv
    blocks = []

    m2, m3 = n * n * p, n * n * q
    if m2 + m3:
        rhs = np.zeros((T, n, m2 + m3))
        if p:
            X = lagged_stack(Y, p)
            for r in range(n):
                rhs[:, r, r:m2:n] = -X
        if q:
            W = lagged_stack(u, q)
            for r in range(n):
                rhs[:, r, m2 + r::n] = -W
        D = lag_filter(rhs, theta.ma_coeffs)
        blocks.append(np.einsum("trm,tr->tm", D, g))

    pos = _offdiag_positions(n)
    if pos:
        rows = np.array([r for r, _ in pos])
        cols = np.array([c for _, c in pos])
        blocks.append(-g[:, rows] * eps[:, cols] - B_inv[cols, rows])

    blocks.append(-(ex * x + 1.0) / sigma)

    for i, dens in enumerate(spec.densities):
        if dens.n_params:
            blocks.append(dens.e_lambda(x[:, i], lam_blocks[i]))
    return lt, np.concatenate(blocks, axis=1)


def loglik_contributions(spec: SvarmaSpec, theta, Y) -> np.ndarray:
    """Per-period log-likelihood ``l_t``, shape (T,)."""
    theta = _theta(spec, theta)
    return _evaluate(spec, theta, _as_panel(Y, spec.n), False)[0]


def loglik(spec: SvarmaSpec, theta, Y) -> float:
    """Standardized conditional log-likelihood ``L_T = T^{-1} sum_t l_t``.

    Returns ``-inf`` when ``B`` is numerically singular.
    """
    try:
        return float(np.mean(loglik_contributions(spec, theta, Y)))
    except SingularMatrixError:
        return -np.inf


def score_contributions(spec: SvarmaSpec, theta, Y) -> np.ndarray:
    """Per-period score ``dl_t / dtheta``, shape (T, dim)."""
    theta = _theta(spec, theta)
    return _evaluate(spec, theta, _as_panel(Y, spec.n), True)[1]


def loglik_and_score(spec: SvarmaSpec, theta, Y) -> tuple:
    theta = _theta(spec, theta)
    lt, st = _evaluate(spec, theta, _as_panel(Y, spec.n), True)
    return float(np.mean(lt)), st.mean(axis=0)


def score(spec: SvarmaSpec, theta, Y) -> np.ndarray:
    """Gradient of ``L_T``, blocks ordered ``(pi2, pi3, beta, sigma, lambda)``."""
    return score_contributions(spec, theta, Y).mean(axis=0)


def has_kink(spec: SvarmaSpec) -> bool:
    return any(not is_smooth(d.family) for d in spec.densities)


def _relative_steps(spec: SvarmaSpec, vec: np.ndarray, h: float) -> np.ndarray:
    s = spec.block_slices()
    steps = h * np.maximum(np.abs(vec), 1.0)
    # positive parameters get purely relative steps so they stay positive
    for name in ("sigma", "lambda"):
        steps[s[name]] = h * np.abs(vec[s[name]])
    return steps


def _kink_steps(spec: SvarmaSpec, vec: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # Equalize the typical shift of the standardized shocks across parameters:
    # score column i has scale sqrt(opg_ii) and moves x_t by about step_i times that.
    h = Y.shape[0] ** -0.2
    info = np.diag(opg(spec, vec, Y))
    steps = h / np.sqrt(np.maximum(info, 1e-12))
    # sigma and lambda leave eps_t untouched, so their columns are smooth
    s = spec.block_slices()
    for name in ("sigma", "lambda"):
        steps[s[name]] = DEFAULT_STEP * np.abs(vec[s[name]])
    return steps


def _central_jacobian(spec, vec, Y, steps):
    M = np.empty((vec.size, vec.size))
    for i in range(vec.size):
        up, dn = vec.copy(), vec.copy()
        up[i] += steps[i]
        dn[i] -= steps[i]
        M[:, i] = (score(spec, up, Y) - score(spec, dn, Y)) / (2.0 * steps[i])
    return M


class HessianResult(NamedTuple):
    hessian: np.ndarray
    asymmetry: float
    method: str


def hessian(spec: SvarmaSpec, theta, Y, step: float | None = None, *,
            full_output: bool = False):
    """Finite differences of the analytic score, symmetrized as ``(M + M') / 2``.

    Parameters
    ----------
    step : float, optional
        Relative step for plain central differences. ``None`` uses ``1e-5``
        when every density is smooth. With a Laplace component the score
        jumps whenever a shock changes sign, and a tiny step sees almost no
        such crossings, so ``None`` then switches to steps of order
        ``T^{-1/5}`` scaled by the OPG diagonal, combined as ``2 D(h) - D(2h)``
        to cancel the first-order bias caused by the kink.
    full_output : bool
        Also return the relative asymmetry ``||M - M'|| / ||M||`` before
        symmetrization and a label of the scheme used.
    """
    theta = _theta(spec, theta)
    Y = _as_panel(Y, spec.n)
    vec = theta.pack()
    if step is None and has_kink(spec):
        steps = _kink_steps(spec, vec, Y)
        M = 2.0 * _central_jacobian(spec, vec, Y, steps) - _central_jacobian(spec, vec, Y, 2.0 * steps)
        method = "richardson"
    else:
        h = DEFAULT_STEP if step is None else float(step)
        M = _central_jacobian(spec, vec, Y, _relative_steps(spec, vec, h))
        method = "central"
    norm = np.linalg.norm(M)
    asym = float(np.linalg.norm(M - M.T) / norm) if norm > 0 else 0.0
    H = 0.5 * (M + M.T)
    if full_output:
        return HessianResult(H, asym, method)
    return H


def opg(spec: SvarmaSpec, theta, Y) -> np.ndarray:
    """Average outer product of the per-period scores."""
    S = score_contributions(spec, theta, Y)
    return S.T @ S / S.shape[0]


class Covariance(NamedTuple):
    cov: np.ndarray
    se: np.ndarray
    condition_number: float


def asy_cov(spec: SvarmaSpec, theta, Y, method: str = "opg", step: float | None = None) -> Covariance:
    """Asymptotic covariance of the estimator, already divided by ``T``.

    ``method="opg"`` inverts the outer-product estimator, ``method="hessian"``
    inverts minus the numeric Hessian.
    """
    Y = _as_panel(Y, spec.n)
    T = Y.shape[0]
    if method == "opg":
        info = opg(spec, theta, Y)
    elif method == "hessian":
        info = -hessian(spec, theta, Y, step)
    else:
        raise ContractError(f"unknown covariance method {method!r}")
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrixError("information matrix is nearly singular", cond)
    cov = np.linalg.inv(info) / T
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return Covariance(cov, se, float(cond))
