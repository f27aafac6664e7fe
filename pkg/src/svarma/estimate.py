"""Initial values, maximum likelihood fitting, order selection and residual diagnostics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import stats

from . import lagpoly
from . import likelihood as lik
from ._kernels import lagged_stack
from .errors import ContractError, NotFactorizableError, RankDeficientError, SingularMatrixError
from .filter import _as_panel, structural_shocks
from .lagpoly import MatrixPolynomial
from .model import SvarmaSpec, ThetaVector, normalize, normalize_scheme_a, relabel, validate
from .shockdist import lambda_lower_bounds


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``ftol`` and ``stall_iter`` define the stopping rule used when the gradient
    tolerance cannot be met because the likelihood is not differentiable
    everywhere (Laplace shocks).
    """

    max_iter: int = 500
    grad_tol: float = 1e-6
    sigma_min: float = 1e-8
    seed: int | None = None
    scheme: str = "A"
    restarts: int = 0
    ftol: float = 1e-12
    stall_iter: int = 5
    covariance: bool = True

    @classmethod
    def from_json(cls, obj: dict | None) -> "FitOptions":
        obj = dict(obj or {})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ContractError(f"unknown fit options: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class EstimationResult:
    """Outcome of :func:`fit`. ``theta_hat`` is scheme-A normalized."""

    spec: SvarmaSpec
    theta_hat: ThetaVector
    loglik_value: float
    score_norm: float
    cov_opg: np.ndarray | None
    cov_hessian: np.ndarray | None
    se: np.ndarray | None
    iterations: int
    converged: bool
    termination: str
    n_obs: int
    scheme: str = "A"
    B_scheme: np.ndarray | None = None
    sigma_scheme: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def aic(self) -> float:
        if not self.converged:
            return math.inf
        return -2.0 * self.n_obs * self.loglik_value + 2.0 * self.spec.dim

    def to_json(self) -> dict[str, Any]:
        def mat(m):
            return None if m is None else np.asarray(m).tolist()

        return {
            "model": {**self.spec.to_json(), "theta": self.theta_hat.to_json()},
            "loglik": self.loglik_value,
            "aic": self.aic,
            "score_norm": self.score_norm,
            "converged": self.converged,
            "termination": self.termination,
            "iterations": self.iterations,
            "n_obs": self.n_obs,
            "se": mat(self.se),
            "cov_opg": mat(self.cov_opg),
            "cov_hessian": mat(self.cov_hessian),
            "scheme": self.scheme,
            "B": mat(self.theta_hat.B),
            "B_scheme": mat(self.B_scheme),
            "sigma_scheme": mat(self.sigma_scheme),
        }


# -- initial values -----------------------------------------------------------

def _ols(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if X.shape[1] == 0:
        return np.zeros((0, Y.shape[1]))
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientError("regressor matrix does not have full column rank")
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef


def _split_coeffs(coef: np.ndarray, n: int, d: int) -> np.ndarray:
    # coef rows are stacked lags; lag i occupies rows (i-1)n..in-1 and equals c_i'
    return np.stack([coef[i * n:(i + 1) * n].T for i in range(d)]) if d else np.zeros((0, n, n))


def initial_estimate(Y, spec: SvarmaSpec) -> ThetaVector:
    """Two-stage least-squares starting value.

    A long autoregression of order ``ceil(1.5 log T)`` supplies innovation
    proxies, a regression of ``y_t`` on lagged ``y`` and lagged proxies gives
    the AR and MA coefficients, and ``B``/``sigma`` come from the unit-diagonal
    rescaling of the Cholesky factor of the residual covariance. A
    non-invertible MA part is mirrored and an unstable AR part is shrunk.
    """
    Y = _as_panel(Y, spec.n)
    T, n = Y.shape
    p, q = spec.p, spec.q
    if np.any(np.ptp(Y, axis=0) == 0.0):
        raise RankDeficientError("a series is constant")
    k = int(math.ceil(1.5 * math.log(T))) if q else 0
    start = k + max(p, q)
    if T - start <= n * (p + q) + n:
        raise ContractError("sample too short for the initial regressions")

    if q:
        Xl = lagged_stack(Y, k)
        coef = _ols(Xl[k:], Y[k:])
        ehat = np.zeros_like(Y)
        ehat[k:] = Y[k:] - Xl[k:] @ coef
        Z = np.hstack([lagged_stack(Y, p), lagged_stack(ehat, q)])
    else:
        Z = lagged_stack(Y, p)
    Zs, Ys = Z[start:], Y[start:]
    coef = _ols(Zs, Ys)
    resid = Ys - Zs @ coef
    ar = _split_coeffs(coef[:n * p], n, p)
    ma = _split_coeffs(coef[n * p:], n, q)
    omega = resid.T @ resid / resid.shape[0]

    a = MatrixPolynomial(ar, "ar", n)
    b = MatrixPolynomial(ma, "ma", n)
    if q and not lagpoly.is_invertible(b, 1e-3):
        try:
            b, omega = lagpoly.mirror_noninvertible_roots(b, omega)
        except NotFactorizableError:
            b = lagpoly.shrink_to_stable(b, 0.95)
        if not lagpoly.is_invertible(b, 1e-3):
            b = lagpoly.shrink_to_stable(b, 0.95)
    if p and not lagpoly.is_stable(a, 1e-3):
        a = lagpoly.shrink_to_stable(a, 0.98)

    try:
        L = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise RankDeficientError("residual covariance is singular") from None
    d = np.diag(L)
    B0 = L / d
    lam = np.concatenate([np.asarray(dd.lam, dtype=float) for dd in spec.densities]) \
        if sum(spec.lambda_sizes) else np.zeros(0)
    return ThetaVector.from_matrices(a.coeffs, b.coeffs, B0, d, lam)


# -- optimizer ------------------------------------------------------------------

class _Objective:
    """Log-likelihood with barrier semantics: infeasible points evaluate to ``None``."""

    def __init__(self, spec: SvarmaSpec, Y: np.ndarray, options: FitOptions):
        self.spec, self.Y, self.options = spec, Y, options
        s = spec.block_slices()
        self.s_sigma, self.s_lam = s["sigma"], s["lambda"]
        self.lam_lower = np.array([b for d in spec.densities for b in lambda_lower_bounds(d.family)])
        self.n_eval = 0

    def feasible(self, vec: np.ndarray) -> bool:
        if not np.all(np.isfinite(vec)):
            return False
        if np.any(vec[self.s_sigma] <= self.options.sigma_min):
            return False
        if self.lam_lower.size and np.any(vec[self.s_lam] < self.lam_lower):
            return False
        theta = ThetaVector.unpack(self.spec, vec)
        if self.spec.p and not lagpoly.is_stable(theta.a_poly):
            return False
        if self.spec.q and not lagpoly.is_invertible(theta.b_poly):
            return False
        return np.linalg.cond(theta.B) < 1e12

    def __call__(self, vec: np.ndarray):
        if not self.feasible(vec):
            return None
        self.n_eval += 1
        try:
            f, g = lik.loglik_and_score(self.spec, vec, self.Y)
        except SingularMatrixError:
            return None
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            return None
        return f, g


def _initial_inverse(obj: _Objective, x: np.ndarray):
    """Inverse OPG as the starting inverse curvature, identity if it is unusable."""
    try:
        J = lik.opg(obj.spec, x, obj.Y)
        if np.linalg.cond(J) < 1e10:
            return np.linalg.inv(J), True
    except SingularMatrixError:
        pass
    return np.eye(x.size), False


def _bfgs_maximize(obj: _Objective, x0: np.ndarray, options: FitOptions):
    """Quasi-Newton ascent with Armijo backtracking that rejects infeasible trials.

    The inverse curvature starts, and restarts, from the inverse outer product
    of the scores, which fixes the scaling of the first steps.
    """
    x = x0.copy()
    res = obj(x)
    if res is None:
        raise ContractError("starting value is outside the parameter space")
    f, g = res
    dim = x.size
    Hinv, scaled = _initial_inverse(obj, x)
    fresh = True
    small_steps = 0
    reason = "max_iter"
    it = 0
    for it in range(1, options.max_iter + 1):
        if np.max(np.abs(g)) < options.grad_tol:
            reason = "gtol"
            it -= 1
            break
        d = Hinv @ g
        slope = g @ d
        if not slope > 0:
            Hinv, scaled = _initial_inverse(obj, x)
            fresh = True
            d = Hinv @ g
            slope = g @ d
            if not slope > 0:
                Hinv, scaled = np.eye(dim), False
                d, slope = g.copy(), g @ g
        step, accepted = 1.0, None
        while step > 1e-20:
            trial = x + step * d
            r = obj(trial)
            if r is not None and r[0] >= f + 1e-4 * step * slope:
                accepted = (trial, r)
                break
            step *= 0.5
        if accepted is None:
            if fresh:
                reason = "stall"
                break
            Hinv, scaled = _initial_inverse(obj, x)
            fresh = True
            continue
        x_new, (f_new, g_new) = accepted
        s = x_new - x
        yv = g - g_new  # gradient change of the minimized function -L
        sy = s @ yv
        if sy > 1e-300:
            if fresh and not scaled:
                Hinv = np.eye(dim) * (sy / (yv @ yv))
            rho = 1.0 / sy
            V = np.eye(dim) - rho * np.outer(s, yv)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
            fresh = False
        gain = f_new - f
        x, f, g = x_new, f_new, g_new
        if gain <= options.ftol * (1.0 + abs(f)):
            small_steps += 1
            if small_steps >= options.stall_iter:
                reason = "ftol"
                break
        else:
            small_steps = 0
    return x, f, g, it, reason


KINK_CROSSINGS = 10


def kink_grad_tol(spec: SvarmaSpec, theta, Y, grad_tol: float) -> np.ndarray:
    """Per-coordinate gradient tolerance accepted at a stall.

    With a Laplace component the average score jumps by about
    ``2 sd_i / T`` whenever one shock changes sign, ``sd_i`` being the
    root-mean-square of score coordinate ``i``, so it cannot be driven below
    that order. A stall is accepted as convergence within the size of
    ``KINK_CROSSINGS`` such jumps. Smooth models keep ``grad_tol``.
    """
    if not lik.has_kink(spec):
        return np.full(spec.dim, grad_tol)
    S = lik.score_contributions(spec, theta, Y)
    sd = np.sqrt(np.mean(S * S, axis=0))
    return np.maximum(grad_tol, 2.0 * KINK_CROSSINGS * sd / S.shape[0])


def fit(Y, spec: SvarmaSpec, options: FitOptions | None = None, theta0=None) -> EstimationResult:
    """Maximize the conditional likelihood and normalize the result with scheme A.

    Non-convergence is reported through ``converged`` and ``termination``
    rather than raised.
    """
    options = options or FitOptions()
    Y = _as_panel(Y, spec.n)
    T = Y.shape[0]
    if theta0 is None:
        theta0 = initial_estimate(Y, spec)
    elif not isinstance(theta0, ThetaVector):
        theta0 = ThetaVector.unpack(spec, theta0)
    obj = _Objective(spec, Y, options)

    x, f, g, iters, reason = _bfgs_maximize(obj, theta0.pack(), options)
    rng = np.random.default_rng(options.seed)
    for _ in range(options.restarts):
        jitter = x * (1.0 + 0.05 * rng.standard_normal(x.size))
        if not obj.feasible(jitter):
            continue
        x2, f2, g2, it2, r2 = _bfgs_maximize(obj, jitter, options)
        iters += it2
        if f2 > f:
            x, f, g, reason = x2, f2, g2, r2

    converged = reason == "gtol" or (
        reason in ("ftol", "stall")
        and bool(np.all(np.abs(g) <= kink_grad_tol(spec, x, Y, options.grad_tol))))

    theta = ThetaVector.unpack(spec, x)
    out_spec = spec
    try:
        norm = normalize_scheme_a(theta.B, theta.sigma)
        out_spec, theta = relabel(spec, theta, norm)
    except Exception as exc:  # normalization is undefined on a null set
        warnings.warn(f"scheme A normalization failed: {exc}", RuntimeWarning, stacklevel=2)

    f, g = lik.loglik_and_score(out_spec, theta, Y)
    gnorm = float(np.max(np.abs(g)))

    cov_opg = cov_h = se = None
    if options.covariance:
        try:
            c = lik.asy_cov(out_spec, theta, Y, "opg")
            cov_opg, se = c.cov, c.se
        except SingularMatrixError:
            pass
        try:
            cov_h = lik.asy_cov(out_spec, theta, Y, "hessian").cov
        except SingularMatrixError:
            pass

    B_s = sigma_s = None
    scheme = options.scheme.upper()
    try:
        ns = normalize(theta.B, theta.sigma, scheme)
        B_s, sigma_s = ns.B, ns.sigma
    except Exception:
        pass

    return EstimationResult(out_spec, theta, f, gnorm, cov_opg, cov_h, se, iters, converged, reason,
                            T, scheme, B_s, sigma_s, {"n_eval": obj.n_eval})


# -- order selection --------------------------------------------------------------

@dataclass(frozen=True)
class OrderSelection:
    p: int
    q: int
    table: list

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "table": self.table}


def select_order(Y, spec_template: SvarmaSpec, p_max: int, q_max: int,
                 options: FitOptions | None = None, threads: int = 1) -> OrderSelection:
    """Fit every ``(p, q)`` on the grid and pick the smallest AIC.

    A cell that fails or does not converge gets ``AIC = +inf``. Ties go to the
    first cell in ``(p, q)`` lexicographic order.
    """
    if p_max < 0 or q_max < 0:
        raise ContractError("p_max and q_max must be nonnegative")
    Y = _as_panel(Y, spec_template.n)
    cells = [(p, q) for p in range(p_max + 1) for q in range(q_max + 1)]
    args = [(Y, spec_template.with_order(p, q), options) for p, q in cells]
    if threads > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_fit_cell, args))
    else:
        results = [_fit_cell(a) for a in args]
    table = []
    for (p, q), r in zip(cells, results):
        table.append({"p": p, "q": q, **r})
    best = min(table, key=lambda row: (row["aic"], row["p"], row["q"]))
    return OrderSelection(best["p"], best["q"], table)


def _fit_cell(args) -> dict:
    Y, spec, options = args
    opts = replace(options or FitOptions(), covariance=False)
    try:
        res = fit(Y, spec, opts)
    except Exception as exc:
        return {"aic": math.inf, "loglik": None, "converged": False, "error": str(exc)}
    return {"aic": res.aic, "loglik": res.loglik_value, "converged": res.converged,
            "dim": spec.dim}


# -- diagnostics --------------------------------------------------------------------

def _acf_stat(x: np.ndarray, lags: int) -> np.ndarray:
    T = x.shape[0]
    xc = x - x.mean(axis=0)
    denom = np.sum(xc * xc, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        Q = np.zeros(x.shape[1:])
        for k in range(1, lags + 1):
            rho = np.sum(xc[k:] * xc[:-k], axis=0) / denom
            Q += rho * rho / (T - k)
    return T * (T + 2.0) * Q


def ljung_box(e, lags: int) -> tuple:
    """Ljung-Box ``Q`` per column and its chi-square(lags) p-value."""
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    if not 0 < lags < e.shape[0]:
        raise ContractError("need 0 < lags < T")
    Q = _acf_stat(e, lags)
    return Q, stats.chi2.sf(Q, lags)


def mcleod_li(e, lags: int) -> tuple:
    """Ljung-Box statistic of the squared residuals."""
    e = np.asarray(e, dtype=float)
    return ljung_box(e * e, lags)


def jarque_bera(e) -> tuple:
    """``JB = T/6 (S^2 + (K - 3)^2 / 4)`` per column and its chi-square(2) p-value."""
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    T = e.shape[0]
    xc = e - e.mean(axis=0)
    m2 = np.mean(xc ** 2, axis=0)
    S = np.mean(xc ** 3, axis=0) / m2 ** 1.5
    K = np.mean(xc ** 4, axis=0) / m2 ** 2
    JB = T / 6.0 * (S * S + (K - 3.0) ** 2 / 4.0)
    return JB, stats.chi2.sf(JB, 2)


def diagnostics(residuals, lags: int = 10) -> dict:
    """Portmanteau and normality tests per component of a residual panel."""
    e = np.asarray(residuals, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    lb, lb_p = ljung_box(e, lags)
    ml, ml_p = mcleod_li(e, lags)
    jb, jb_p = jarque_bera(e)
    out = []
    for i in range(e.shape[1]):
        out.append({
            "ljung_box": {"statistic": float(lb[i]), "pvalue": float(lb_p[i]), "lags": lags},
            "mcleod_li": {"statistic": float(ml[i]), "pvalue": float(ml_p[i]), "lags": lags},
            "jarque_bera": {"statistic": float(jb[i]), "pvalue": float(jb_p[i])},
        })
    return {"components": out}


def standardized_residuals(spec: SvarmaSpec, theta: ThetaVector, Y) -> np.ndarray:
    """``Sigma^{-1} B^{-1} u_t(theta)``."""
    return structural_shocks(theta, Y).standardized
