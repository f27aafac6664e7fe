"""Residual recursion, structural shocks, simulation and second moments.

All recursions use zero presample values for both ``y`` and ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import lagpoly
from ._kernels import lag_filter, lagged_stack
from .errors import ContractError, SingularMatrixError
from .model import SvarmaSpec, ThetaVector, validate

MA_TRUNCATION = 1e-14
MA_MAX_TERMS = 10_000


@dataclass(frozen=True)
class SamplePath:
    """Observed panel ``y_1..y_T`` with the zero-presample convention.

    ``shocks`` holds the generating structural shocks when the path was
    simulated, and is ``None`` otherwise.
    """

    Y: np.ndarray
    shocks: np.ndarray | None = None
    presample: str = "zero"

    @property
    def T(self) -> int:
        return self.Y.shape[0]


class Shocks(NamedTuple):
    eps: np.ndarray
    standardized: np.ndarray


def _as_panel(Y, n: int) -> np.ndarray:
    Y = np.asarray(Y.Y if isinstance(Y, SamplePath) else Y, dtype=float)
    if Y.ndim == 1 and n == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[1] != n:
        raise ContractError(f"Y must have shape (T, {n})")
    return Y


def ar_part(theta: ThetaVector, Y: np.ndarray) -> np.ndarray:
    """``y_t - a_1 y_{t-1} - ... - a_p y_{t-p}``."""
    if theta.p == 0:
        return Y.copy()
    X = lagged_stack(Y, theta.p)
    A = np.concatenate(list(theta.ar_coeffs), axis=1)
    return Y - X @ A.T


def residuals_u(theta: ThetaVector, Y) -> np.ndarray:
    """Reduced-form residuals ``u_t(theta)`` from the conditional recursion."""
    Y = _as_panel(Y, theta.n)
    return lag_filter(ar_part(theta, Y), theta.ma_coeffs)


def structural_shocks(theta: ThetaVector, Y) -> Shocks:
    """``eps_t = B^{-1} u_t`` and the standardized ``Sigma^{-1} eps_t``."""
    B = theta.B
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError("B is singular", cond)
    u = residuals_u(theta, Y)
    eps = np.linalg.solve(B, u.T).T
    return Shocks(eps, eps / theta.sigma)


def simulate(spec: SvarmaSpec, theta: ThetaVector, T: int, rng: np.random.Generator,
             burnin: int = 500, shocks=None) -> SamplePath:
    """Simulate ``a(z) y_t = b(z) B eps_t``.

    Parameters
    ----------
    spec, theta : model and parameters (``theta`` must validate)
    T : number of retained observations
    rng : generator owned by the caller
    burnin : discarded leading observations
    shocks : optional (burnin + T, n) array of standardized shocks replacing the
        random draws (used by the residual bootstrap)
    """
    problems = validate(spec, theta)
    if problems:
        raise ContractError("invalid parameters: " + "; ".join(problems))
    if T < 1 or burnin < 0:
        raise ContractError("need T >= 1 and burnin >= 0")
    total = T + burnin
    n = spec.n
    if shocks is None:
        z = np.column_stack([d.sample(rng, total) for d in spec.densities])
    else:
        z = np.asarray(shocks, dtype=float)
        if z.shape != (total, n):
            raise ContractError(f"shocks must have shape ({total}, {n})")
    eps = z * theta.sigma
    u = eps @ theta.B.T
    v = u.copy()
    for j, bj in enumerate(theta.ma_coeffs, start=1):
        v[j:] += u[:-j] @ bj.T
    Y = lag_filter(v, -theta.ar_coeffs)
    return SamplePath(Y[burnin:], eps[burnin:])


def innovation_covariance(theta: ThetaVector) -> np.ndarray:
    """``B Sigma^2 B'``."""
    Bs = theta.B * theta.sigma
    return Bs @ Bs.T


def ma_infinity(theta: ThetaVector, tol: float = MA_TRUNCATION, cap: int = MA_MAX_TERMS) -> np.ndarray:
    """Transfer coefficients ``k_0, k_1, ...`` truncated once their norm falls below ``tol``."""
    a, b = theta.a_poly, theta.b_poly
    K = 64
    while True:
        k = lagpoly.transfer_coeffs(a, b, min(K, cap))
        norms = np.linalg.norm(k, axis=(1, 2))
        tail = max(theta.p, theta.q) + 1
        small = norms < tol
        # the recursion has memory p, so a run of small terms longer than that ends it
        for j in range(len(norms) - tail):
            if small[j:j + tail].all():
                return k[:j]
        if K >= cap:
            return k
        K *= 2


def autocovariance(theta: ThetaVector, max_lag: int) -> np.ndarray:
    """``gamma(s) = E y_t y_{t-s}'`` for ``s = 0..max_lag``, shape (max_lag + 1, n, n)."""
    if max_lag < 0:
        raise ContractError("max_lag must be nonnegative")
    k = ma_infinity(theta)
    omega = innovation_covariance(theta)
    kw = k @ omega
    n = theta.n
    out = np.zeros((max_lag + 1, n, n))
    J = k.shape[0]
    for s in range(min(max_lag, J - 1) + 1):
        out[s] = np.einsum("jab,jcb->ac", kw[s:], k[:J - s])
    return out


def spectral_density(theta: ThetaVector, freqs) -> np.ndarray:
    """``f(lambda) = k(z) B Sigma^2 B' k(z)^*`` at ``z = exp(-i lambda)`` (no ``1/2pi`` factor)."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    omega = innovation_covariance(theta)
    a, b = theta.a_poly, theta.b_poly
    out = np.empty((freqs.size, theta.n, theta.n), dtype=complex)
    for i, lam in enumerate(freqs):
        z = np.exp(-1j * lam)
        kz = np.linalg.solve(a(z), b(z))
        f = kz @ omega @ kz.conj().T
        out[i] = 0.5 * (f + f.conj().T)
    return out
