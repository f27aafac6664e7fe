"""Structural VARMA models with non-Gaussian independent shocks.

Maximum likelihood estimation, identification by permutation and scaling
normalization, impulse responses and residual-bootstrap bands.
"""
from .errors import SvarmaError
from .estimate import EstimationResult, FitOptions, diagnostics, fit, initial_estimate, select_order
from .filter import SamplePath, autocovariance, residuals_u, simulate, spectral_density, structural_shocks
from .irf import IrfResult, bootstrap_irf, fevd, irf
from .lagpoly import MatrixPolynomial
from .likelihood import asy_cov, hessian, loglik, opg, score
from .model import SvarmaSpec, ThetaVector, normalize, theta_for_spec, validate
from .shockdist import ComponentDensity

__version__ = "0.1.0"

__all__ = [
    "ComponentDensity", "EstimationResult", "FitOptions", "IrfResult", "MatrixPolynomial",
    "SamplePath", "SvarmaError", "SvarmaSpec", "ThetaVector", "asy_cov", "autocovariance",
    "bootstrap_irf", "diagnostics", "fevd", "fit", "hessian", "initial_estimate", "irf",
    "loglik", "normalize", "opg", "residuals_u", "score", "select_order", "simulate",
    "spectral_density", "structural_shocks", "theta_for_spec", "validate",
]
