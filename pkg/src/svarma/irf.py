"""Impulse responses, variance decompositions and residual-bootstrap bands."""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lagpoly
from .errors import BootstrapError, ContractError
from .estimate import FitOptions, fit
from .filter import _as_panel, simulate, structural_shocks
from .model import SvarmaSpec, ThetaVector

SHOCK_CONVENTIONS = ("unit", "one-sd")
MAX_DROP_SHARE = 0.2


@dataclass
class IrfResult:
    """Point responses and optional bootstrap bands.

    ``phi[j] = k_j B`` is the response to unit structural impulses and
    ``responses`` applies the requested shock-size convention (``one-sd``
    scales column ``c`` by ``sigma_c``). Bands refer to ``responses``.
    """

    phi: np.ndarray
    responses: np.ndarray
    fevd: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.phi.shape[0] - 1

    def to_json(self) -> dict:
        out = {
            "meta": self.meta,
            "phi": self.phi.tolist(),
            "responses": self.responses.tolist(),
            "fevd": self.fevd.tolist(),
        }
        if self.lower is not None:
            out["lower"] = self.lower.tolist()
            out["upper"] = self.upper.tolist()
        return out

    def long_rows(self) -> list:
        """Rows ``(horizon, response_var, shock, point, lo, hi)``; bands are NaN when absent."""
        rows = []
        Hp1, n, _ = self.responses.shape
        for j in range(Hp1):
            for r in range(n):
                for c in range(n):
                    lo = self.lower[j, r, c] if self.lower is not None else np.nan
                    hi = self.upper[j, r, c] if self.upper is not None else np.nan
                    rows.append((j, r, c, self.responses[j, r, c], lo, hi))
        return rows


def _check_shock(shock: str) -> str:
    if shock not in SHOCK_CONVENTIONS:
        raise ContractError(f"shock must be one of {SHOCK_CONVENTIONS}")
    return shock


def _phi(theta: ThetaVector, H: int) -> np.ndarray:
    if H < 0:
        raise ContractError("H must be nonnegative")
    k = lagpoly.transfer_coeffs(theta.a_poly, theta.b_poly, H)
    phi = k @ theta.B
    phi[0] = theta.B
    return phi


def fevd(theta: ThetaVector, H: int) -> np.ndarray:
    """Share of the ``h``-step forecast-error variance of variable ``r`` due to shock ``c``."""
    scaled = _phi(theta, H) * theta.sigma
    cum = np.cumsum(scaled * scaled, axis=0)
    total = cum.sum(axis=2, keepdims=True)
    if np.any(total <= 0.0):
        raise ContractError("degenerate variance decomposition: a variable has zero forecast variance")
    return cum / total


def irf(theta: ThetaVector, H: int, shock: str = "one-sd") -> IrfResult:
    """Point impulse responses ``Phi_j = k_j B`` for ``j = 0..H``."""
    shock = _check_shock(shock)
    phi = _phi(theta, H)
    responses = phi * theta.sigma if shock == "one-sd" else phi.copy()
    return IrfResult(phi, responses, fevd(theta, H), meta={"horizon": H, "shock": shock})


def state_space_transfer_coeffs(theta: ThetaVector, H: int) -> np.ndarray:
    """``k_0..k_H`` from the companion form, independent of the polynomial recursion.

    The state stacks ``(y_t, ..., y_{t-p+1}, u_t, ..., u_{t-q+1})`` (at least
    the current ``y_t``) so that ``k_j = C A^j G``.
    """
    n, q = theta.n, theta.q
    pp = max(theta.p, 1)
    ar = np.zeros((pp, n, n))
    ar[:theta.p] = theta.ar_coeffs
    m = n * (pp + q)
    A = np.zeros((m, m))
    A[:n, :n * pp] = np.hstack(list(ar))
    if q:
        A[:n, n * pp:] = np.hstack(list(theta.ma_coeffs))
    A[n:n * pp, :n * (pp - 1)] = np.eye(n * (pp - 1))
    if q > 1:
        A[n * pp + n:, n * pp:m - n] = np.eye(n * (q - 1))
    G = np.zeros((m, n))
    G[:n] = np.eye(n)
    if q:
        G[n * pp:n * pp + n] = np.eye(n)
    k = np.empty((H + 1, n, n))
    state = G
    for j in range(H + 1):
        k[j] = state[:n]
        state = A @ state
    return k


# -- bootstrap ----------------------------------------------------------------------

def _replicate(args):
    spec, theta, z, seed, H, shock, options = args
    rng = np.random.default_rng(seed)
    T = z.shape[0]
    idx = rng.integers(0, T, size=T)
    path = simulate(spec, theta, T, rng, burnin=0, shocks=z[idx])
    try:
        res = fit(path.Y, spec, options, theta0=theta)
    except Exception:
        return None
    if not res.converged:
        return None
    return irf(res.theta_hat, H, shock).responses


def bootstrap_irf(spec: SvarmaSpec, theta_hat: ThetaVector, Y, H: int, R: int = 1000,
                  level: float = 0.95, rng: np.random.Generator | int | None = None, *,
                  shock: str = "one-sd", threads: int = 1,
                  options: FitOptions | None = None) -> IrfResult:
    """Residual recursive bootstrap percentile bands.

    Centered standardized shocks are resampled with replacement, paths are
    regenerated from ``theta_hat`` with zero presample values and re-fitted
    (all parameters, starting at ``theta_hat``), and each replicate's
    scheme-A normalized responses enter entrywise percentile intervals.
    Replicates that fail to converge are dropped; more than 20% dropped
    raises :class:`BootstrapError`.
    """
    shock = _check_shock(shock)
    if not 0.0 < level < 1.0:
        raise ContractError("level must lie in (0, 1)")
    if R < 1:
        raise ContractError("R must be positive")
    if R < 100:
        warnings.warn("fewer than 100 bootstrap replicates give unreliable bands",
                      RuntimeWarning, stacklevel=2)
    Y = _as_panel(Y, spec.n)
    z = structural_shocks(theta_hat, Y).standardized
    z = z - z.mean(axis=0)
    if isinstance(rng, np.random.Generator):
        ss = np.random.SeedSequence(int(rng.integers(0, 2 ** 63)))
    else:
        ss = np.random.SeedSequence(rng)
    seeds = ss.spawn(R)
    options = replace(options or FitOptions(), covariance=False)
    args = [(spec, theta_hat, z, s, H, shock, options) for s in seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            draws = list(ex.map(_replicate, args, chunksize=max(1, R // (4 * threads))))
    else:
        draws = [_replicate(a) for a in args]
    kept = [d for d in draws if d is not None]
    dropped = R - len(kept)
    if dropped > MAX_DROP_SHARE * R:
        raise BootstrapError(f"{dropped} of {R} bootstrap replicates failed to converge")
    stack = np.stack(kept)
    alpha = 1.0 - level
    lower = np.quantile(stack, alpha / 2, axis=0, method="inverted_cdf")
    upper = np.quantile(stack, 1 - alpha / 2, axis=0, method="inverted_cdf")
    point = irf(theta_hat, H, shock)
    point.lower, point.upper = lower, upper
    point.meta.update({"replications": R, "kept": len(kept), "dropped": dropped,
                       "level": level, "interval": "percentile"})
    return point
