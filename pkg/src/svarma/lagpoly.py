"""Matrix lag polynomials.

A :class:`MatrixPolynomial` represents ``I_n - c_1 z - ... - c_d z^d`` (AR
sign convention) or ``I_n + c_1 z + ... + c_d z^d`` (MA sign convention).
The sign convention is stored explicitly so that the AR polynomial ``a(z)``
and the MA polynomial ``b(z)`` of a VARMA system can both be written with the
coefficient matrices that appear in the recursion ``y_t = sum a_i y_{t-i} +
u_t + sum b_j u_{t-j}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError, NotFactorizableError, SingularPolynomialError

STABILITY_MARGIN = 1e-8

SignConvention = Literal["ar", "ma"]


@dataclass(frozen=True)
class MatrixPolynomial:
    """Monic matrix polynomial with an explicit sign convention.

    Parameters
    ----------
    coeffs : array_like, shape (d, n, n)
        The matrices ``c_1, ..., c_d``. The constant term is always ``I_n``.
    sign : {"ar", "ma"}
        ``"ar"`` for ``I - c_1 z - ...`` and ``"ma"`` for ``I + c_1 z + ...``.
    dim : int, optional
        Required when ``d == 0`` and ``coeffs`` carries no shape information.
    """

    coeffs: np.ndarray
    sign: SignConvention = "ma"
    dim: int | None = None

    def __post_init__(self):
        if self.sign not in ("ar", "ma"):
            raise ValueError(f"unknown sign convention {self.sign!r}")
        c = np.asarray(self.coeffs, dtype=float)
        if c.size == 0:
            if self.dim is None:
                raise ValueError("dim is required for a degree-0 polynomial")
            c = np.zeros((0, self.dim, self.dim))
        elif c.ndim == 2 and self.dim is not None:
            c = c.reshape(-1, self.dim, self.dim)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coefficients must have shape (d, n, n), got {c.shape}")
        if self.dim is not None and c.shape[1] != self.dim:
            raise ValueError("dim does not match the coefficient shape")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "dim", c.shape[1])

    @classmethod
    def ar(cls, coeffs, dim: int | None = None) -> "MatrixPolynomial":
        return cls(_as_coeff_stack(coeffs, dim), "ar", dim)

    @classmethod
    def ma(cls, coeffs, dim: int | None = None) -> "MatrixPolynomial":
        return cls(_as_coeff_stack(coeffs, dim), "ma", dim)

    @classmethod
    def identity(cls, n: int, sign: SignConvention = "ma") -> "MatrixPolynomial":
        return cls(np.zeros((0, n, n)), sign, n)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0]

    def signed_coeffs(self) -> np.ndarray:
        """Return ``(C_0, ..., C_d)`` with ``poly(z) = sum_j C_j z^j``."""
        n, d = self.dim, self.degree
        out = np.empty((d + 1, n, n))
        out[0] = np.eye(n)
        out[1:] = -self.coeffs if self.sign == "ar" else self.coeffs
        return out

    def __call__(self, z: complex) -> np.ndarray:
        return evaluate(self, z)


def _as_coeff_stack(coeffs, dim):
    if isinstance(coeffs, (list, tuple)) and len(coeffs) == 0:
        if dim is None:
            raise ValueError("dim is required for a degree-0 polynomial")
        return np.zeros((0, dim, dim))
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1, 1, 1)
    elif c.ndim == 1:
        # scalar polynomial given as (c_1, ..., c_d)
        c = c.reshape(-1, 1, 1)
    elif c.ndim == 2:
        c = c[None]
    return c


def evaluate(poly: MatrixPolynomial, z: complex) -> np.ndarray:
    """Evaluate the polynomial at a complex point (Horner scheme)."""
    c = poly.signed_coeffs()
    out = np.array(c[-1], dtype=complex)
    for j in range(c.shape[0] - 2, -1, -1):
        out = out * z + c[j]
    return out


def det_coefficients(poly: MatrixPolynomial) -> np.ndarray:
    """Coefficients ``(1, g_1, ..., g_N)`` of the scalar polynomial ``det poly(z)``.

    ``det poly(z)`` has degree at most ``N = n d``. It is evaluated at the
    ``N + 1`` roots of unity and the coefficients are recovered with an inverse
    DFT, which is an exact interpolation on the unit circle.
    """
    n, d = poly.dim, poly.degree
    big_n = n * d
    if big_n == 0:
        return np.ones(1)
    m = big_n + 1
    nodes = np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.array([np.linalg.det(evaluate(poly, z)) for z in nodes])
    # samples carry exp(+i...), the forward DFT exp(-i...): coefficient j lands at index j
    g = np.fft.fft(vals) / m
    return g.real


def det_roots(poly: MatrixPolynomial) -> np.ndarray:
    """All roots of ``det poly(z)``, counted with multiplicity.

    Roots are the reciprocals of the nonzero eigenvalues of the companion
    matrix of the reversed determinant polynomial.
    """
    g = det_coefficients(poly)
    scale = np.max(np.abs(g))
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularPolynomialError("determinant polynomial vanishes identically")
    if abs(g[0]) <= 1e-14 * scale:
        raise SingularPolynomialError("det poly(0) = 0")
    g = g / g[0]
    # trailing coefficients at interpolation noise level are a degree drop
    keep = len(g)
    while keep > 1 and abs(g[keep - 1]) <= 1e-13 * np.max(np.abs(g[:keep])):
        keep -= 1
    g = g[:keep]
    deg = len(g) - 1
    if deg == 0:
        return np.zeros(0, dtype=complex)
    # w^deg + g_1 w^{deg-1} + ... + g_deg = 0 with w = 1/z
    companion = np.zeros((deg, deg))
    companion[0, :] = -g[1:]
    companion[1:, :-1] = np.eye(deg - 1)
    w = np.linalg.eigvals(companion)
    w = w[np.abs(w) > 1e-300]
    return 1.0 / w


def is_stable(a: MatrixPolynomial, margin: float = STABILITY_MARGIN) -> bool:
    """True iff every root of ``det a(z)`` has modulus ``> 1 + margin``."""
    roots = det_roots(a)
    return bool(np.all(np.abs(roots) > 1.0 + margin))


def is_invertible(b: MatrixPolynomial, margin: float = STABILITY_MARGIN) -> bool:
    """True iff every root of ``det b(z)`` has modulus ``> 1 + margin``."""
    return is_stable(b, margin)


def power_series_inverse(poly: MatrixPolynomial, K: int) -> np.ndarray:
    """Coefficients ``psi_0..psi_K`` of ``poly(z)^{-1}``, shape (K+1, n, n)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if not is_stable(poly):
        raise DomainError("polynomial has determinantal roots in the closed unit disk")
    c = poly.signed_coeffs()
    n, d = poly.dim, poly.degree
    psi = np.zeros((K + 1, n, n))
    psi[0] = np.eye(n)
    for j in range(1, K + 1):
        acc = np.zeros((n, n))
        for i in range(1, min(j, d) + 1):
            acc -= c[i] @ psi[j - i]
        psi[j] = acc
    return psi


def transfer_coeffs(a: MatrixPolynomial, b: MatrixPolynomial, K: int) -> np.ndarray:
    """Power-series coefficients ``k_0..k_K`` of ``k(z) = a(z)^{-1} b(z)``.

    Solved from ``a(z) k(z) = b(z)`` by forward substitution.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if not is_stable(a):
        raise DomainError("a(z) is not stable")
    return _transfer_recursion(a.signed_coeffs(), b.signed_coeffs(), K)


def _transfer_recursion(ca: np.ndarray, cb: np.ndarray, K: int) -> np.ndarray:
    n = ca.shape[1]
    p, q = ca.shape[0] - 1, cb.shape[0] - 1
    k = np.zeros((K + 1, n, n))
    for j in range(K + 1):
        acc = cb[j].copy() if j <= q else np.zeros((n, n))
        for i in range(1, min(j, p) + 1):
            acc -= ca[i] @ k[j - i]
        k[j] = acc
    return k


def left_coprime_check(a: MatrixPolynomial, b: MatrixPolynomial, tol: float = 1e-6) -> bool:
    """Numerical left-coprimeness test.

    At every determinantal root ``z*`` of ``a`` or ``b`` the block ``[a(z*), b(z*)]``
    must have full row rank, i.e. its smallest singular value relative to the
    largest must exceed ``tol``. Away from those roots the block trivially has
    full rank, so this covers all of the complex plane.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    candidates = []
    for poly in (a, b):
        if poly.degree > 0:
            candidates.extend(det_roots(poly))
    for z in candidates:
        block = np.hstack([evaluate(a, z), evaluate(b, z)])
        s = np.linalg.svd(block, compute_uv=False)
        if s[-1] <= tol * max(s[0], 1.0):
            return False
    return True


def ma_autocovariances(b: MatrixPolynomial, cov: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Autocovariances ``gamma_s = sum_j C_{j+s} cov C_j'`` of ``v_t = b(z) eta_t``."""
    c = b.signed_coeffs()
    q = c.shape[0] - 1
    if max_lag is None:
        max_lag = q
    gam = np.zeros((max_lag + 1,) + cov.shape)
    for s in range(min(max_lag, q) + 1):
        for j in range(q - s + 1):
            gam[s] += c[j + s] @ cov @ c[j].T
    return gam


def mirror_noninvertible_roots(
    b: MatrixPolynomial,
    cov: np.ndarray,
    *,
    margin: float = 1e-6,
    tol: float = 1e-14,
    max_iter: int = 200_000,
) -> tuple[MatrixPolynomial, np.ndarray]:
    """Replace determinantal roots of ``b`` inside the unit disk by their mirror images.

    Returns ``(b*, cov*)`` such that ``b*`` is invertible and the MA process
    ``b*(z) eta*_t`` with ``E eta* eta*' = cov*`` has the same autocovariances as
    ``b(z) eta_t`` with ``E eta eta' = cov``.

    The minimum-phase factor is obtained from the innovations form of the MA
    state space model: the Riccati recursion of the Kalman predictor is
    iterated from the stationary state covariance until the innovation
    covariance settles.
    """
    cov = np.asarray(cov, dtype=float)
    n = b.dim
    if cov.shape != (n, n):
        raise ValueError("cov must be n x n")
    if b.degree == 0:
        return MatrixPolynomial.identity(n, "ma"), cov.copy()
    roots = det_roots(b)
    if np.any(np.abs(np.abs(roots) - 1.0) <= margin):
        raise NotFactorizableError("MA polynomial has a determinantal root on the unit circle")
    if np.all(np.abs(roots) > 1.0 + STABILITY_MARGIN):
        return b, cov.copy()

    c = b.signed_coeffs()
    q = b.degree
    m = n * q
    F = np.zeros((m, m))
    F[n:, :-n] = np.eye(m - n)
    G = np.zeros((m, n))
    G[:n] = np.eye(n)
    H = np.hstack(list(c[1:]))
    P = np.kron(np.eye(q), cov)
    GQ = G @ cov
    GQG = GQ @ G.T
    # the innovation covariance can stall for a step (e.g. c_1 = 0) while the
    # state covariance still moves, so convergence is judged on P
    # with cancellation the change can plateau at the rounding floor above tol
    best, stagnant = np.inf, 0
    for _ in range(max_iter):
        omega = H @ P @ H.T + cov
        K = np.linalg.solve(omega.T, (F @ P @ H.T + GQ).T).T
        new_P = F @ P @ F.T + GQG - K @ omega @ K.T
        new_P = 0.5 * (new_P + new_P.T)
        change = np.max(np.abs(new_P - P)) / max(np.max(np.abs(new_P)), 1e-300)
        P = new_P
        if change <= tol:
            break
        if change < best:
            best, stagnant = change, 0
        else:
            stagnant += 1
        if best < 1e-10 and stagnant >= 50:
            break
    else:
        raise NotFactorizableError("innovations recursion did not converge")
    omega = H @ P @ H.T + cov
    K = np.linalg.solve(omega.T, (F @ P @ H.T + GQ).T).T
    new = np.empty((q, n, n))
    Fk = np.eye(m)
    for j in range(q):
        new[j] = H @ Fk @ K
        Fk = F @ Fk
    return MatrixPolynomial.ma(new), 0.5 * (omega + omega.T)


def shrink_to_stable(a: MatrixPolynomial, target: float = 0.98) -> MatrixPolynomial:
    """Scale ``a_i -> a_i c^i`` so that the largest companion eigenvalue is ``target``.

    Replacing ``a(z)`` by ``a(cz)`` divides every determinantal root by ``c``.
    A stable polynomial is returned unchanged.
    """
    if a.degree == 0 or is_stable(a):
        return a
    rho = 1.0 / np.min(np.abs(det_roots(a)))
    scale = target / rho
    powers = scale ** np.arange(1, a.degree + 1)
    return MatrixPolynomial(a.coeffs * powers[:, None, None], a.sign)


def coeff_list(coeffs: Sequence[np.ndarray] | np.ndarray, n: int) -> np.ndarray:
    """Stack a possibly empty sequence of n x n matrices into shape (d, n, n)."""
    if len(coeffs) == 0:
        return np.zeros((0, n, n))
    return np.asarray(coeffs, dtype=float).reshape(-1, n, n)
