"""Standardized component densities and their log-derivatives.

Every family is standardized to zero mean and unit variance, so a shock with
scale ``sigma_i`` has density ``sigma_i^{-1} f(x / sigma_i; lambda_i)``.

All methods are vectorized over ``x``. Derivative names follow the log-density:
``e_x = d log f / dx``, ``e_xx = d^2 log f / dx^2``, ``e_lambda = d log f / d lambda``,
``e_xlambda = d^2 log f / dx d lambda`` and ``e_lambdalambda`` the
``lambda``-Hessian. Vector-valued results carry the parameter axis last.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, polygamma, psi

FAMILIES = ("laplace", "student_t", "gaussian")

SQRT2 = np.sqrt(2.0)
_LOG_SQRT2 = 0.5 * np.log(2.0)
_LOG_SQRT2PI = 0.5 * np.log(2.0 * np.pi)

# Lower bound on the Student-t degrees of freedom used by the optimizer
NU_MIN = 2.1
DEFAULT_NU = 8.0


@dataclass(frozen=True)
class ComponentDensity:
    """One shock's standardized density family.

    ``lam`` holds the family parameters: empty for ``laplace`` and ``gaussian``,
    ``(nu,)`` with ``nu > 2`` for ``student_t``.
    """

    family: str
    lam: tuple = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown density family {self.family!r}; expected one of {FAMILIES}")
        lam = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lam, dtype=float)))
        if len(lam) != n_params(self.family):
            if len(lam) == 0 and self.family == "student_t":
                lam = (DEFAULT_NU,)
            else:
                raise ValueError(f"{self.family} takes {n_params(self.family)} parameter(s), got {len(lam)}")
        object.__setattr__(self, "lam", lam)

    @property
    def n_params(self) -> int:
        return n_params(self.family)

    def with_lambda(self, lam) -> "ComponentDensity":
        return ComponentDensity(self.family, tuple(np.atleast_1d(lam)))

    def in_domain(self, lam=None) -> bool:
        lam = self.lam if lam is None else tuple(np.atleast_1d(lam))
        if self.family == "student_t":
            return bool(np.isfinite(lam[0]) and lam[0] > 2.0)
        return True

    def to_json(self) -> dict:
        return {"family": self.family, "lambda": list(self.lam)}

    @classmethod
    def from_json(cls, obj) -> "ComponentDensity":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["family"], tuple(obj.get("lambda", ())))

    # -- log density and derivatives -------------------------------------

    def log_density(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family == "laplace":
            return -SQRT2 * np.abs(x) - _LOG_SQRT2
        if self.family == "gaussian":
            return -0.5 * x * x - _LOG_SQRT2PI
        nu = self._nu(lam)
        return (
            gammaln(0.5 * (nu + 1.0))
            - gammaln(0.5 * nu)
            - 0.5 * np.log(np.pi * (nu - 2.0))
            - 0.5 * (nu + 1.0) * np.log1p(x * x / (nu - 2.0))
        )

    def e_x(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family == "laplace":
            # the kink at 0 gets derivative 0 by convention
            return -SQRT2 * np.sign(x)
        if self.family == "gaussian":
            return -x
        nu = self._nu(lam)
        return -(nu + 1.0) * x / (nu - 2.0 + x * x)

    def e_xx(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family == "laplace":
            return np.zeros_like(x)
        if self.family == "gaussian":
            return -np.ones_like(x)
        nu = self._nu(lam)
        den = nu - 2.0 + x * x
        return -(nu + 1.0) * (nu - 2.0 - x * x) / (den * den)

    def e_lambda(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family != "student_t":
            return np.zeros(x.shape + (0,))
        nu = self._nu(lam)
        m = nu - 2.0
        x2 = x * x
        val = (
            0.5 * psi(0.5 * (nu + 1.0))
            - 0.5 * psi(0.5 * nu)
            - 0.5 / m
            - 0.5 * np.log1p(x2 / m)
            + 0.5 * (nu + 1.0) * x2 / (m * (m + x2))
        )
        return val[..., None]

    def e_xlambda(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family != "student_t":
            return np.zeros(x.shape + (0,))
        nu = self._nu(lam)
        den = nu - 2.0 + x * x
        return (x * (3.0 - x * x) / (den * den))[..., None]

    def e_lambdalambda(self, x, lam=None):
        x = np.asarray(x, dtype=float)
        if self.family != "student_t":
            return np.zeros(x.shape + (0, 0))
        nu = self._nu(lam)
        m = nu - 2.0
        x2 = x * x
        den = m + x2
        # d/dnu of (nu+1) x^2 / (2 m (m + x^2))
        num = m * den - (nu + 1.0) * (den + m)
        last = 0.5 * x2 * num / (m * m * den * den)
        val = (
            0.25 * polygamma(1, 0.5 * (nu + 1.0))
            - 0.25 * polygamma(1, 0.5 * nu)
            + 0.5 / (m * m)
            - 0.5 * (1.0 / den - 1.0 / m)
            + last
        )
        return val[..., None, None]

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the standardized density using an externally owned generator."""
        if self.family == "laplace":
            return rng.laplace(0.0, 1.0 / SQRT2, size=size)
        if self.family == "gaussian":
            return rng.standard_normal(size=size)
        nu = self.lam[0]
        return rng.standard_t(nu, size=size) * np.sqrt((nu - 2.0) / nu)

    def _nu(self, lam):
        if lam is None:
            return self.lam[0]
        return float(np.atleast_1d(lam)[0])


def n_params(family: str) -> int:
    return 1 if family == "student_t" else 0


def lambda_lower_bounds(family: str) -> tuple:
    return (NU_MIN,) if family == "student_t" else ()


def is_smooth(family: str) -> bool:
    """False for families whose log-density has a kink (Laplace at zero)."""
    return family != "laplace"
