"""Parameter space, parameter packing and identification schemes.

The structural model is ``a(z) y_t = b(z) B eps_t`` with ``B`` having unit
diagonal and ``eps_{i,t} = sigma_i * (standardized draw from f_i(.; lambda_i))``.
The packed parameter vector is ``theta = (pi2, pi3, beta, sigma, lambda)`` with

* ``pi2 = vec(a_1, ..., a_p)`` (column-major),
* ``pi3 = vec(b_1, ..., b_q)``,
* ``beta`` the off-diagonal entries of ``B`` in column-major order.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import lagpoly
from .errors import ContractError, NotNormalizableError, TieError
from .lagpoly import MatrixPolynomial
from .shockdist import ComponentDensity

NORMALIZE_TOL = 1e-10


@dataclass(frozen=True)
class SvarmaSpec:
    """Model dimensions and the density family of each structural shock."""

    n: int
    p: int
    q: int
    densities: tuple = field(default=())

    def __post_init__(self):
        if self.n < 1 or self.p < 0 or self.q < 0:
            raise ContractError("need n >= 1, p >= 0, q >= 0")
        dens = tuple(
            d if isinstance(d, ComponentDensity) else ComponentDensity.from_json(d)
            for d in self.densities
        )
        if len(dens) == 0:
            dens = (ComponentDensity("laplace"),) * self.n
        if len(dens) != self.n:
            raise ContractError(f"expected {self.n} densities, got {len(dens)}")
        if sum(d.family == "gaussian" for d in dens) > 1:
            raise ContractError("at most one shock may be Gaussian")
        object.__setattr__(self, "densities", dens)

    @property
    def lambda_sizes(self) -> tuple:
        return tuple(d.n_params for d in self.densities)

    @property
    def sizes(self) -> tuple:
        """Block lengths of (pi2, pi3, beta, sigma, lambda)."""
        n = self.n
        return (n * n * self.p, n * n * self.q, n * (n - 1), n, sum(self.lambda_sizes))

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def with_order(self, p: int, q: int) -> "SvarmaSpec":
        return replace(self, p=p, q=q)

    def block_slices(self) -> dict:
        out, start = {}, 0
        for name, size in zip(("pi2", "pi3", "beta", "sigma", "lambda"), self.sizes):
            out[name] = slice(start, start + size)
            start += size
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "densities": [d.to_json() for d in self.densities],
        }

    @classmethod
    def from_json(cls, obj) -> "SvarmaSpec":
        return cls(int(obj["n"]), int(obj.get("p", 0)), int(obj.get("q", 0)),
                   tuple(obj.get("densities", ())))


@dataclass(frozen=True)
class ThetaVector:
    """Structured view of the packed parameter vector.

    The density parameters are stored in ``lam`` (``lambda`` is reserved).
    """

    n: int
    p: int
    q: int
    pi2: np.ndarray
    pi3: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        n, p, q = self.n, self.p, self.q
        expected = {"pi2": n * n * p, "pi3": n * n * q, "beta": n * (n - 1), "sigma": n}
        for name, size in expected.items():
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != size:
                raise ContractError(f"{name} must have length {size}, got {arr.size}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)

    # -- packing ------------------------------------------------------------

    def pack(self) -> np.ndarray:
        return np.concatenate([self.pi2, self.pi3, self.beta, self.sigma, self.lam])

    @classmethod
    def unpack(cls, spec: SvarmaSpec, vec) -> "ThetaVector":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != spec.dim:
            raise ContractError(f"theta must have length {spec.dim}, got {vec.size}")
        s = spec.block_slices()
        return cls(spec.n, spec.p, spec.q, vec[s["pi2"]], vec[s["pi3"]], vec[s["beta"]],
                   vec[s["sigma"]], vec[s["lambda"]])

    @classmethod
    def from_matrices(cls, ar: Sequence, ma: Sequence, B, sigma, lam=()) -> "ThetaVector":
        B = np.asarray(B, dtype=float)
        n = B.shape[0]
        ar = lagpoly.coeff_list(ar, n)
        ma = lagpoly.coeff_list(ma, n)
        return cls(n, ar.shape[0], ma.shape[0], _vec_blocks(ar), _vec_blocks(ma),
                   beta_from_b(B), np.asarray(sigma, dtype=float), np.asarray(lam, dtype=float))

    # -- structured access --------------------------------------------------

    @property
    def ar_coeffs(self) -> np.ndarray:
        """``(a_1, ..., a_p)`` stacked with shape (p, n, n)."""
        return _unvec_blocks(self.pi2, self.n, self.p)

    @property
    def ma_coeffs(self) -> np.ndarray:
        return _unvec_blocks(self.pi3, self.n, self.q)

    @property
    def a_poly(self) -> MatrixPolynomial:
        return MatrixPolynomial(self.ar_coeffs, "ar", self.n)

    @property
    def b_poly(self) -> MatrixPolynomial:
        return MatrixPolynomial(self.ma_coeffs, "ma", self.n)

    @property
    def B(self) -> np.ndarray:
        return b_from_beta(self.beta, self.n)

    def lambda_blocks(self, spec: SvarmaSpec) -> list:
        out, start = [], 0
        for size in spec.lambda_sizes:
            out.append(self.lam[start:start + size])
            start += size
        return out

    def replace(self, **changes) -> "ThetaVector":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "pi2": self.pi2.tolist(),
            "pi3": self.pi3.tolist(),
            "beta": self.beta.tolist(),
            "sigma": self.sigma.tolist(),
            "lambda": self.lam.tolist(),
        }

    @classmethod
    def from_json(cls, spec: SvarmaSpec, obj) -> "ThetaVector":
        return cls(spec.n, spec.p, spec.q, obj.get("pi2", []), obj.get("pi3", []),
                   obj.get("beta", []), obj["sigma"], obj.get("lambda", []))


def _vec_blocks(coeffs: np.ndarray) -> np.ndarray:
    # vec of the n x (n d) matrix (c_1, ..., c_d)
    if coeffs.shape[0] == 0:
        return np.zeros(0)
    return np.concatenate(list(coeffs), axis=1).reshape(-1, order="F")


def _unvec_blocks(vec: np.ndarray, n: int, d: int) -> np.ndarray:
    if d == 0:
        return np.zeros((0, n, n))
    wide = vec.reshape((n, n * d), order="F")
    return np.stack([wide[:, i * n:(i + 1) * n] for i in range(d)])


def theta_for_spec(spec: SvarmaSpec, ar=(), ma=(), B=None, sigma=None, lam=None) -> ThetaVector:
    """Convenience constructor filling defaults (identity B, unit sigma, family defaults)."""
    n = spec.n
    B = np.eye(n) if B is None else B
    sigma = np.ones(n) if sigma is None else sigma
    if lam is None:
        lam = np.concatenate([np.asarray(d.lam, dtype=float) for d in spec.densities]) if spec.dim else []
    theta = ThetaVector.from_matrices(ar, ma, B, sigma, lam)
    if (theta.p, theta.q) != (spec.p, spec.q):
        raise ContractError("AR/MA degrees do not match the spec")
    return theta


# -- B parameterization ---------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _offdiag_positions(n: int) -> tuple:
    # positions (row, col) of the off-diagonal entries in column-major order
    return tuple((r, c) for c in range(n) for r in range(n) if r != c)


def build_H(n: int) -> np.ndarray:
    """Zero-one matrix with ``vec(B) = H beta + vec(I_n)``."""
    pos = _offdiag_positions(n)
    H = np.zeros((n * n, len(pos)))
    for k, (r, c) in enumerate(pos):
        H[c * n + r, k] = 1.0
    return H


def b_from_beta(beta, n: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    pos = _offdiag_positions(n)
    if beta.size != len(pos):
        raise ContractError(f"beta must have length {len(pos)}")
    B = np.eye(n)
    for k, (r, c) in enumerate(pos):
        B[r, c] = beta[k]
    return B


def beta_from_b(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if B.shape != (n, n):
        raise ContractError("B must be square")
    if not np.all(np.diag(B) == 1.0):
        raise ContractError("B must have a unit diagonal")
    return np.array([B[r, c] for r, c in _offdiag_positions(n)])


# -- validation -----------------------------------------------------------------

def validate(spec: SvarmaSpec, theta: ThetaVector, tol: float = 1e-8) -> list:
    """Return the list of violated parameter-space restrictions (empty if valid)."""
    problems = []
    if (theta.n, theta.p, theta.q) != (spec.n, spec.p, spec.q):
        return [f"theta dimensions {(theta.n, theta.p, theta.q)} do not match spec"]
    a, b = theta.a_poly, theta.b_poly
    if not lagpoly.is_stable(a):
        problems.append("stability: det a(z) has a root in the closed unit disk")
    if not lagpoly.is_invertible(b):
        problems.append("invertibility: det b(z) has a root in the closed unit disk")
    last_a = theta.ar_coeffs[-1] if spec.p else np.eye(spec.n)
    last_b = theta.ma_coeffs[-1] if spec.q else np.eye(spec.n)
    sv = np.linalg.svd(np.hstack([last_a, last_b]), compute_uv=False)
    if sv[-1] <= tol * max(sv[0], 1.0):
        problems.append("full rank: (a_p, b_q) does not have rank n")
    if spec.p and spec.q and not lagpoly.left_coprime_check(a, b):
        problems.append("coprimeness: a(z) and b(z) share a common left factor")
    if not np.all(theta.sigma > 0):
        problems.append("sigma: all scales must be positive")
    for i, (dens, lam) in enumerate(zip(spec.densities, theta.lambda_blocks(spec))):
        if not dens.in_domain(lam):
            problems.append(f"lambda: parameter of shock {i} outside the {dens.family} domain")
    sv = np.linalg.svd(theta.B, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        problems.append("B: matrix is singular")
    return problems


# -- identification schemes -------------------------------------------------------

class Normalization(NamedTuple):
    """Result of an identification scheme: ``B* = B P D`` and the matching scales."""

    B: np.ndarray
    sigma: np.ndarray
    P: np.ndarray
    D: np.ndarray

    @property
    def perm(self) -> np.ndarray:
        """``perm[j]`` is the original column placed at position ``j``."""
        return np.argmax(self.P, axis=0)


def _finish(B, sigma, perm, d) -> Normalization:
    n = B.shape[0]
    P = np.zeros((n, n))
    P[perm, np.arange(n)] = 1.0
    D = np.diag(d)
    B_star = B[:, perm] * d
    sigma_star = np.asarray(sigma, dtype=float)[perm] / np.abs(d)
    return Normalization(B_star, sigma_star, P, D)


def _unit_columns(B):
    B = np.asarray(B, dtype=float)
    norms = np.linalg.norm(B, axis=0)
    if np.any(norms == 0.0):
        raise NotNormalizableError("B has a zero column")
    return B / norms, norms


def _dominance_permutation(C, tol):
    # row i picks the remaining column with the largest |entry|; must be strict
    n = C.shape[0]
    remaining = list(range(n))
    perm = []
    for i in range(n):
        vals = np.abs(C[i, remaining])
        order = np.argsort(-vals, kind="stable")
        best = vals[order[0]]
        if best <= tol:
            raise NotNormalizableError(f"row {i}: no nonzero candidate for the diagonal")
        if len(order) > 1 and best - vals[order[1]] <= tol:
            raise NotNormalizableError(f"row {i}: diagonal dominance tie")
        perm.append(remaining.pop(order[0]))
    return np.array(perm)


def normalize_scheme_a(B, sigma, tol: float = NORMALIZE_TOL) -> Normalization:
    """Unit-norm columns, dominance permutation, then unit diagonal."""
    B = np.asarray(B, dtype=float)
    C, _ = _unit_columns(B)
    perm = _dominance_permutation(C, tol)
    d = 1.0 / B[np.arange(B.shape[0]), perm]
    out = _finish(B, sigma, perm, d)
    np.fill_diagonal(out.B, 1.0)
    return out


def normalize_scheme_b(B, sigma, tol: float = NORMALIZE_TOL) -> Normalization:
    """Unit-norm columns, dominance permutation, positive diagonal."""
    B = np.asarray(B, dtype=float)
    C, norms = _unit_columns(B)
    perm = _dominance_permutation(C, tol)
    d = np.sign(B[np.arange(B.shape[0]), perm]) / norms[perm]
    return _finish(B, sigma, perm, d)


def normalize_scheme_c(B, sigma, tol: float = NORMALIZE_TOL) -> Normalization:
    """Unit-norm columns, largest-magnitude entry positive, lexicographic ordering.

    Columns are arranged in decreasing lexicographic order, so ``[[0, 1], [1, 0]]``
    maps to the identity.
    """
    B = np.asarray(B, dtype=float)
    if np.linalg.matrix_rank(B) < B.shape[0]:
        raise NotNormalizableError("B is singular")
    C, norms = _unit_columns(B)
    n = B.shape[0]
    signs = np.empty(n)
    for j in range(n):
        mags = np.abs(C[:, j])
        k = int(np.argmax(mags))
        others = np.delete(mags, k)
        if others.size and mags[k] - others.max() <= tol and np.any(
                (np.abs(mags - mags[k]) <= tol) & (np.sign(C[:, j]) != np.sign(C[k, j]))):
            raise TieError(f"column {j}: largest entries tie in magnitude with opposite signs")
        signs[j] = np.sign(C[k, j])
    S = C * signs

    def cmp(i, j):
        for k in range(n):
            diff = S[k, i] - S[k, j]
            if abs(diff) > tol:
                return -1 if diff > 0 else 1
        raise TieError("two columns coincide in the lexicographic order")

    perm = np.array(sorted(range(n), key=functools.cmp_to_key(cmp)))
    d = signs[perm] / norms[perm]
    return _finish(B, sigma, perm, d)


SCHEMES = {"A": normalize_scheme_a, "B": normalize_scheme_b, "C": normalize_scheme_c}


def normalize(B, sigma, scheme: str = "A", tol: float = NORMALIZE_TOL) -> Normalization:
    try:
        fn = SCHEMES[scheme.upper()]
    except KeyError:
        raise ContractError(f"unknown identification scheme {scheme!r}") from None
    return fn(B, sigma, tol)


def relabel(spec: SvarmaSpec, theta: ThetaVector, scheme_result: Normalization) -> tuple:
    """Apply a scheme-A normalization to ``theta`` and permute the shock labels.

    Column ``j`` of the new ``B`` is the old shock ``perm[j]`` (rescaled), so that
    shock keeps its density family and ``lambda``. Sign flips need no density
    change because every supported family is symmetric.
    """
    perm = scheme_result.perm
    if not np.allclose(np.diag(scheme_result.B), 1.0):
        raise ContractError("relabel needs a unit-diagonal normalization")
    blocks = theta.lambda_blocks(spec)
    lam = np.concatenate([blocks[i] for i in perm]) if spec.dim else np.zeros(0)
    new_spec = replace(spec, densities=tuple(spec.densities[i] for i in perm))
    B = scheme_result.B.copy()
    np.fill_diagonal(B, 1.0)
    new_theta = theta.replace(beta=beta_from_b(B), sigma=scheme_result.sigma,
                              lam=lam if lam.size else np.zeros(0))
    return new_spec, new_theta


def signed_permutations(n: int):
    """Iterate over all ``n! 2^n`` signed permutation matrices."""
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1.0, -1.0), repeat=n):
            P = np.zeros((n, n))
            P[list(perm), np.arange(n)] = signs
            yield P
